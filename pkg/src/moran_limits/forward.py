"""
Forward replicator-diffusion equation

    dq/dt = eps * d2/dx2 (x(1-x) q) - d/dx (x(1-x)(x alpha + (1-x) beta) q)

on (0,1), with the probability that leaves through x=0 and x=1 accumulated
into the boundary point masses a(t) and b(t).

The discretisation is a cell-centred finite-volume scheme acting on
w = x(1-x) q. Face fluxes use exponential fitting (Scharfetter-Gummel), which
reduces to upwinding as eps -> 0. The semi-discrete system is therefore the
generator of a birth-death chain on the cells plus the two absorbing states
{a, b}: mass is conserved structurally, the explicit step is positivity
preserving under the stated time-step bound, and a discrete fixation profile
psi_h is conserved exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .quadrature import cell_averages, gauss_panels


def bernoulli(z):
    """B(z) = z / (exp(z) - 1), evaluated without overflow."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-8
    pos = (z > 0) & ~small
    neg = (z < 0) & ~small
    zp = z[pos]
    out[pos] = zp * np.exp(-zp) / -np.expm1(-zp)
    out[neg] = z[neg] / np.expm1(z[neg])
    out[small] = 1 - z[small] / 2
    return out


def _fitted_coefficients(g, length, eps):
    """Flux ``J = cl * w_left - cr * w_right`` across a segment with constant velocity ``g``."""
    g = np.asarray(g, dtype=float)
    if eps == 0:
        cr = np.maximum(-g, 0.0)
    else:
        cr = eps / length * bernoulli(g * length / eps)
    return cr + g, cr


class GridOperator:
    """Discrete forward operator on ``cells`` uniform cells.

    The jump rates of the underlying birth-death chain are exposed as
    ``up`` (cell i -> i+1), ``down`` (cell i -> i-1), ``to_a`` (cell 0 -> x=0)
    and ``to_b`` (last cell -> x=1).
    """

    def __init__(self, alpha, beta, cells, eps=1.0):
        if cells < 2:
            raise ValueError("need at least two cells")
        if eps < 0:
            raise ValueError("diffusion coefficient must be nonnegative")
        self.alpha, self.beta, self.cells, self.eps = float(alpha), float(beta), int(cells), float(eps)
        h = 1.0 / self.cells
        self.dx = h
        self.x = (np.arange(self.cells) + 0.5) * h
        D = self.x * (1 - self.x)

        def g(y):
            return self.beta + (self.alpha - self.beta) * y

        # g is linear, so the midpoint value is exact for its segment integral
        faces = np.arange(1, self.cells) * h
        cl, cr = _fitted_coefficients(g(faces), h, self.eps)
        cl_a, cr_a = _fitted_coefficients(g(h / 4), h / 2, self.eps)
        cl_b, cr_b = _fitted_coefficients(g(1 - h / 4), h / 2, self.eps)
        self.up = np.append(cl * D[:-1] / h, 0.0)
        self.down = np.insert(cr * D[1:] / h, 0, 0.0)
        self.to_a = float(cr_a) * D[0] / h
        self.to_b = float(cl_b) * D[-1] / h

    # -- explicit stepping --------------------------------------------------

    @property
    def outflow(self) -> np.ndarray:
        out = self.up + self.down
        out[0] += self.to_a
        out[-1] += self.to_b
        return out

    def stable_dt(self) -> float:
        """Largest explicit step keeping every update coefficient nonnegative."""
        return 1.0 / float(self.outflow.max())

    def apply(self, q):
        """Return ``(dq/dt, da/dt, db/dt)``."""
        flow_up = self.up * q
        flow_down = self.down * q
        dq = -self.outflow * q
        dq[1:] += flow_up[:-1]
        dq[:-1] += flow_down[1:]
        return dq, self.to_a * q[0] * self.dx, self.to_b * q[-1] * self.dx

    def matrix(self):
        """Dense interior generator L with ``dq/dt = L q``."""
        L = np.diag(-self.outflow)
        L += np.diag(self.up[:-1], -1)
        L += np.diag(self.down[1:], 1)
        return L

    # -- invariants and spectrum -------------------------------------------

    def discrete_psi(self) -> np.ndarray:
        """Cell values of the conserved discrete fixation profile (0 at x=0, 1 at x=1)."""
        if self.eps == 0:
            raise ValueError("no conserved profile without diffusion")
        # increments across [0,x_0], [x_0,x_1], ..., [x_last,1], kept in log space
        rates_back = np.concatenate(([self.to_a], self.down[1:]))
        rates_fwd = np.concatenate((self.up[:-1], [self.to_b]))
        log_inc = np.concatenate(([0.0], np.cumsum(np.log(rates_back) - np.log(rates_fwd))))
        log_cum = np.logaddexp.accumulate(log_inc)
        return np.exp(log_cum[:-1] - log_cum[-1])

    def symmetric_form(self):
        """Return ``(diag, offdiag, log_scale)`` with ``L = S T S^-1``, ``S = exp(log_scale)``."""
        if self.eps == 0:
            raise ValueError("upwind limit is not symmetrisable")
        diag = -self.outflow
        off = np.sqrt(self.up[:-1] * self.down[1:])
        log_s = np.concatenate(([0.0], np.cumsum(0.5 * (np.log(self.up[:-1]) - np.log(self.down[1:])))))
        return diag, off, log_s - log_s.mean()

    def principal_rate(self, rtol=1e-12, maxiter=10_000):
        """Smallest decay rate of the interior generator, to high relative accuracy.

        Inverse iteration on the M-matrix -L with a subtraction-free LU
        factorisation, bracketed by the Collatz-Wielandt bounds. Stays accurate
        when the rate is exponentially small (metastable interior states).
        """
        rate, converged = _principal_rate(self.up, self.down, self.to_a, self.to_b, rtol, maxiter)
        if converged:
            return rate
        # nearly degenerate lowest pair (modes localised at opposite ends): the
        # symmetric eigensolver is accurate as long as the rate is not tiny
        diag, off, _ = self.symmetric_form()
        dense = float(eigh_tridiagonal(-diag, -off, eigvals_only=True, select="i", select_range=(0, 0))[0])
        if dense > 1e-6 * float(self.outflow.max()):
            return dense
        raise RuntimeError("inverse iteration for the spectral gap did not converge")


def _principal_rate(up, down, to_a, to_b, rtol, maxiter):
    n = up.shape[0]
    kappa = np.zeros(n)
    kappa[0] += to_a
    kappa[n - 1] += to_b
    # pivots of -L; piv[i] - up[i] is a positive column excess, so no cancellation
    piv = np.empty(n)
    excess = kappa[0]
    for i in range(n):
        if i > 0:
            excess = kappa[i] + down[i] * excess / piv[i - 1]
        piv[i] = up[i] + excess
    x = np.ones(n)
    y = np.empty(n)
    lo = hi = 1.0
    for _ in range(maxiter):
        for i in range(n):
            y[i] = x[i]
        for i in range(1, n):
            y[i] += up[i - 1] / piv[i - 1] * y[i - 1]
        y[n - 1] /= piv[n - 1]
        for i in range(n - 2, -1, -1):
            y[i] = (y[i] + down[i + 1] * y[i + 1]) / piv[i]
        lo = np.inf
        hi = 0.0
        ymax = 0.0
        for i in range(n):
            r = y[i] / x[i]
            lo = min(lo, r)
            hi = max(hi, r)
            ymax = max(ymax, y[i])
        for i in range(n):
            x[i] = y[i] / ymax
        if hi - lo <= rtol * lo:
            return 2.0 / (lo + hi), True
    return 2.0 / (lo + hi), False


@dataclass(frozen=True)
class DensityField:
    """Interior density ``q`` at cell centres plus boundary masses ``a`` (x=0) and ``b`` (x=1)."""

    q: np.ndarray
    a: float = 0.0
    b: float = 0.0
    t: float = 0.0

    @property
    def cells(self) -> int:
        return len(self.q)

    @property
    def dx(self) -> float:
        return 1.0 / len(self.q)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.dx

    @property
    def interior_mass(self) -> float:
        return float(self.q.sum() * self.dx)

    @property
    def mass(self) -> float:
        return self.a + self.b + self.interior_mass

    def moment(self, weight) -> float:
        """``a*weight(0) + b*weight(1) + int q weight`` with q piecewise constant on the cells.

        Each cell integral of ``weight`` is computed by Gauss-Legendre, so the
        result is the exact moment of the represented density (up to
        quadrature) rather than a midpoint approximation.
        """
        interior = np.sum(self.q * cell_averages(weight, self.cells)) * self.dx
        return float(self.a * weight(0.0) + self.b * weight(1.0) + interior)

    @classmethod
    def from_density(cls, density: Callable, cells: int, a=0.0, b=0.0, normalize=True) -> "DensityField":
        """Cell averages of ``density`` plus point masses; renormalised with a warning if needed."""
        q = cell_averages(density, cells)
        field = cls(q, float(a), float(b))
        if normalize:
            field = normalized(field)
        return field


def normalized(field: DensityField, tol=1e-6) -> DensityField:
    if np.any(field.q < 0) or field.a < 0 or field.b < 0:
        raise ValueError("initial data must be nonnegative")
    m = field.mass
    if m <= 0:
        raise ValueError("initial data has no mass")
    if abs(m - 1) <= tol:
        return field
    warnings.warn(f"initial data has mass {m:.6g}; renormalising to one", stacklevel=3)
    return replace(field, q=field.q / m, a=field.a / m, b=field.b / m)


def step_complete(field: DensityField, alpha, beta, dt, eps=1.0, operator: GridOperator | None = None) -> DensityField:
    """One explicit Euler step of the forward equation with boundary-mass bookkeeping."""
    op = operator or GridOperator(alpha, beta, field.cells, eps)
    if dt > op.stable_dt() * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the stability bound {op.stable_dt():.3e}")
    dq, da, db = op.apply(field.q)
    q = field.q + dt * dq
    if q.min() < -1e-12:
        raise FloatingPointError("negative density produced by the explicit step")
    return DensityField(q, field.a + dt * da, field.b + dt * db, field.t + dt)


def evolve_complete(field: DensityField, alpha, beta, t, eps=1.0, method="auto", cfl=0.9, record=None):
    """Advance ``field`` by model time ``t``.

    ``method`` is ``"explicit"`` (Euler steps at ``cfl`` times the stability
    bound), ``"spectral"`` (exact exponential of the semi-discrete operator,
    for long horizons) or ``"auto"``. ``record`` is an optional sorted sequence
    of times (relative to the start) at which snapshots are returned as a list
    alongside the final field.
    """
    op = GridOperator(alpha, beta, field.cells, eps)
    if method == "auto":
        method = "spectral" if _spectral_ok(op) else "explicit"
    times = [] if record is None else sorted(float(s) for s in record)
    if method == "spectral":
        prop = SpectralPropagator(op)
        snaps = [prop(field, s) for s in times]
        final = prop(field, t)
    elif method == "explicit":
        dt_max = cfl * op.stable_dt()
        snaps = []
        current, elapsed = field, 0.0
        for target in times + [t]:
            current = _explicit_to(current, op, target - elapsed, dt_max)
            elapsed = target
            snaps.append(current)
        final = snaps.pop()
    else:
        raise ValueError(f"unknown method {method!r}")
    return (final, snaps) if record is not None else final


def _explicit_to(field, op, span, dt_max):
    if span <= 0:
        return field
    n = int(np.ceil(span / dt_max))
    q, ga, gb = _euler_steps(field.q.copy(), op.up, op.down, op.to_a, op.to_b, op.dx, span / n, n)
    return DensityField(q, field.a + ga, field.b + gb, field.t + span)


def _euler_steps(q, up, down, to_a, to_b, dx, dt, steps):
    # explicit Euler on the birth-death generator, in place; returns the boundary gains
    m = q.shape[0]
    ga = 0.0
    gb = 0.0
    new = np.empty(m)
    for _ in range(steps):
        for i in range(m):
            v = q[i] * (1.0 - dt * (up[i] + down[i]))
            if i > 0:
                v += dt * up[i - 1] * q[i - 1]
            if i < m - 1:
                v += dt * down[i + 1] * q[i + 1]
            new[i] = v
        new[0] -= dt * to_a * q[0]
        new[m - 1] -= dt * to_b * q[m - 1]
        ga += dt * to_a * q[0] * dx
        gb += dt * to_b * q[m - 1] * dx
        q[:] = new
    return q, ga, gb


try:
    from numba import njit

    _principal_rate = njit(cache=True)(_principal_rate)
    _euler_steps = njit(cache=True)(_euler_steps)
except ImportError:  # pragma: no cover
    pass


_MAX_LOG_SCALE_SPREAD = 12.0


def _spectral_ok(op):
    if op.eps == 0:
        return False
    *_, log_s = op.symmetric_form()
    return np.ptp(log_s) <= _MAX_LOG_SCALE_SPREAD


class SpectralPropagator:
    """Exact time integration of the semi-discrete forward system via ``L = S V diag(lam) V^T S^-1``."""

    def __init__(self, op: GridOperator):
        diag, off, log_s = op.symmetric_form()
        if np.ptp(log_s) > 2 * _MAX_LOG_SCALE_SPREAD:
            warnings.warn("symmetrising scale spans many decades; spectral propagation may lose accuracy")
        self.op = op
        self.lam, self.V = eigh_tridiagonal(diag, off)
        self.s = np.exp(log_s)

    def __call__(self, field: DensityField, t) -> DensityField:
        op = self.op
        c = self.V.T @ (field.q / self.s)
        lt = self.lam * t
        decay = np.exp(lt)
        # (exp(lam t) - 1) / lam, with the lam -> 0 limit
        with np.errstate(divide="ignore", invalid="ignore"):
            integ = np.where(np.abs(lt) > 1e-8, np.expm1(lt) / self.lam, t * (1 + lt / 2))
        q = self.s * (self.V @ (decay * c))
        flux_int = self.s[[0, -1]] * (self.V[[0, -1]] @ (integ * c))
        a = field.a + op.to_a * op.dx * flux_int[0]
        b = field.b + op.to_b * op.dx * flux_int[1]
        return DensityField(q, float(a), float(b), field.t + t)


# -- fixation profile ---------------------------------------------------------


def _weight_exponent(alpha, beta):
    """Exponent E(y) = beta y + (alpha-beta) y^2 / 2 of w = exp(-E), shifted so max w = 1, and its max slope."""
    cand = [0.0, 1.0]
    if alpha != beta:
        ystar = beta / (beta - alpha)
        if 0 < ystar < 1:
            cand.append(ystar)
    vals = [beta * y + (alpha - beta) * y * y / 2 for y in cand]
    shift = min(vals)

    def E(y):
        return beta * y + (alpha - beta) * y * y / 2 - shift

    return E, max(abs(beta), abs(alpha))


def fixation_weight(alpha, beta):
    """``w(y) = exp(-(beta y + (alpha-beta) y^2/2))``, rescaled so that its maximum on [0,1] is 1."""
    E, _ = _weight_exponent(alpha, beta)
    return lambda y: np.exp(-E(np.asarray(y, dtype=float)))


def _panels(alpha, beta):
    _, slope = _weight_exponent(alpha, beta)
    return int(max(64, np.ceil(2 * slope)))


@dataclass
class FixationProfile:
    alpha: float
    beta: float
    lambda0: float

    def __post_init__(self):
        self._w = fixation_weight(self.alpha, self.beta)
        self._panels = _panels(self.alpha, self.beta)
        nodes, weights = _panel_nodes(self._panels)
        per_panel = (weights * self._w(nodes)).reshape(self._panels, -1).sum(axis=1)
        self._cum = np.concatenate(([0.0], np.cumsum(per_panel)))
        self._Z = self._cum[-1]

    def psi(self, x):
        """Continuum fixation probability from the point mass at ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)):
            raise ValueError("x must lie in [0, 1]")
        # cumulative integral to the panel edge below x plus a Gauss rule on the remainder
        k = np.minimum((x * self._panels).astype(int), self._panels - 1)
        lo = k / self._panels
        g, gw = np.polynomial.legendre.leggauss(16)
        half = (x - lo)[..., None] / 2
        rest = np.sum(half * gw * self._w(lo[..., None] + half * (g + 1)), axis=-1)
        return (self._cum[k] + rest) / self._Z

    __call__ = psi

    def derivative(self, x):
        return self._w(x) / self._Z


def psi_profile(alpha, beta, cells=512) -> FixationProfile:
    """Fixation profile for drift parameters (alpha, beta).

    ``psi`` solves ``psi'' + (beta + (alpha-beta) x) psi' = 0`` with psi(0)=0,
    psi(1)=1; ``lambda0`` is the spectral gap estimated on ``cells`` cells.
    """
    return FixationProfile(float(alpha), float(beta), spectral_gap(alpha, beta, cells))


def fixation_probability(p0, alpha, beta, a0=0.0, b0=0.0, tol=1e-6) -> float:
    """Probability that all mass ends at x=1 starting from ``p0``.

    ``p0`` may be a callable interior density, a DensityField, or a float
    (point mass at that x). Computed as

        pi1 = b0 + int_0^1 [int_y^1 p0(x) dx] w(y) dy / int_0^1 w(y) dy.
    """
    w = fixation_weight(alpha, beta)
    panels = _panels(alpha, beta)
    Z = gauss_panels(w, 0.0, 1.0, panels)
    if isinstance(p0, (float, int, np.floating)):
        return float(FixationProfile(alpha, beta, np.nan).psi(float(p0)))
    if isinstance(p0, DensityField):
        field = normalized(p0, tol)
        h = field.dx
        # tail mass above y is piecewise linear for piecewise-constant q
        tail_at_faces = np.concatenate((np.cumsum((field.q * h)[::-1])[::-1], [0.0]))
        faces = np.arange(field.cells + 1) * h

        # int over cell k of tail(y) w(y), tail(y) = tail[k+1] + q[k] (x_{k+1} - y)
        sub = max(1, int(np.ceil(panels / field.cells)))
        g, gw = np.polynomial.legendre.leggauss(16)
        edges = faces[:-1, None] + h * np.arange(sub + 1) / sub
        lo, hi = edges[:, :-1, None], edges[:, 1:, None]
        y = (lo + hi) / 2 + (hi - lo) / 2 * g
        wy = (hi - lo) / 2 * gw * w(y)
        W0 = wy.sum(axis=(1, 2))
        W1 = ((faces[1:, None, None] - y) * wy).sum(axis=(1, 2))
        integral = np.sum(tail_at_faces[1:] * W0 + field.q * W1)
        return float(field.b + integral / Z)
    density = p0
    mass_q = gauss_panels(density, 0.0, 1.0, 256)
    mass = mass_q + a0 + b0
    if min(a0, b0) < 0 or mass <= 0:
        raise ValueError("initial data must be nonnegative with positive mass")
    if abs(mass - 1) > tol:
        warnings.warn(f"initial data has mass {mass:.6g}; renormalising to one", stacklevel=2)
    nodes, weights = _panel_nodes(panels)

    # tail masses int_y^1 p0 at the (sorted) outer nodes, accumulated from the right
    gaps = np.diff(np.append(nodes, 1.0))
    g, gw = np.polynomial.legendre.leggauss(16)
    lo = nodes[:, None]
    pieces = (gaps[:, None] / 2 * gw * density(lo + gaps[:, None] / 2 * (g + 1))).sum(axis=1)
    tail = np.cumsum(pieces[::-1])[::-1]

    integral = float(np.sum(weights * tail * w(nodes)))
    return (b0 + integral / Z) / mass


def _panel_nodes(panels, order=16):
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0, 1, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (lo + hi) / 2 + (hi - lo) / 2 * g
    weights = (hi - lo) / 2 * gw * np.ones_like(lo)
    return nodes.ravel(), weights.ravel()


def fixation_probability_quad(p0: Callable, alpha, beta, b0=0.0) -> float:
    """Reference value of the fixation functional with adaptive quadrature (slow)."""
    w = fixation_weight(alpha, beta)
    Z = integrate.quad(w, 0, 1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    inner = lambda y: integrate.quad(p0, y, 1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    num = integrate.quad(lambda y: inner(y) * w(y), 0, 1, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    return b0 + num / Z


def spectral_gap(alpha, beta, cells=512, eps=1.0) -> float:
    """Smallest decay rate of the discretised interior operator (lambda0)."""
    if cells < 64:
        raise ValueError("spectral_gap needs at least 64 cells")
    return GridOperator(alpha, beta, cells, eps).principal_rate()


def spectral_gap_dense(alpha, beta, cells=512, eps=1.0) -> float:
    """lambda0 from the symmetric tridiagonal eigenproblem (absolute accuracy only)."""
    op = GridOperator(alpha, beta, cells, eps)
    diag, off, _ = op.symmetric_form()
    lam = eigh_tridiagonal(-diag, -off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(lam[0])


@dataclass(frozen=True)
class StrongSelection:
    """Rescaled strong-selection problem.

    The drift (``alpha``, ``beta``) is kept and the diffusion becomes
    ``epsilon``; this is the unscaled forward equation with drift
    (``alpha_unscaled``, ``beta_unscaled``) = (alpha, beta)/epsilon observed on
    the clock ``t_unscaled = time_scale * t``.
    """

    alpha: float
    beta: float
    epsilon: float

    @property
    def alpha_unscaled(self):
        return self.alpha / self.epsilon

    @property
    def beta_unscaled(self):
        return self.beta / self.epsilon

    @property
    def time_scale(self):
        return self.epsilon

    def __iter__(self):
        return iter((self.alpha_unscaled, self.beta_unscaled, self.time_scale))


def rescale_strong_selection(alpha, beta, epsilon) -> StrongSelection:
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return StrongSelection(float(alpha), float(beta), float(epsilon))
