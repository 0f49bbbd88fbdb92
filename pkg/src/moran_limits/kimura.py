"""
Backward (Kimura) equation for the fixation probability

    df/dt = x(1-x) f'' + x(1-x) g(x) f',   g(x) = beta + (alpha - beta) x,

with f(t,0)=0 and f(t,1)=1. The frequency-independent equation with
selection intensity gamma is the case g == gamma (alpha = beta = gamma).

The spatial operator is the transpose of the forward finite-volume generator,
i.e. a non-conservative difference operator on the cell centres with the
boundary values entering through the boundary jump rates. Its stationary
solution is the discrete fixation profile of the forward scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy.linalg import eigh_tridiagonal

from .forward import GridOperator, _spectral_ok


def _drift_params(params):
    """``gamma`` -> (gamma, gamma); ``(alpha, beta)`` -> itself."""
    if np.ndim(params) == 0:
        return float(params), float(params)
    alpha, beta = params
    return float(alpha), float(beta)


@dataclass(frozen=True)
class KimuraSolution:
    """Backward profile on ``x = (0, cell centres, 1)`` at time ``t``.

    ``f_s`` is the discrete stationary profile and ``fbar = f - f_s`` the
    homogeneous part, which vanishes at both ends.
    """

    alpha: float
    beta: float
    x: np.ndarray
    f: np.ndarray
    f_s: np.ndarray
    t: float

    @property
    def gamma(self) -> float | None:
        return self.alpha if self.alpha == self.beta else None

    @property
    def fbar(self) -> np.ndarray:
        return self.f - self.f_s

    @property
    def cells(self) -> int:
        return len(self.x) - 2


class BackwardOperator:
    """Transpose of the forward generator acting on cell values of f."""

    def __init__(self, alpha, beta, cells):
        self.op = GridOperator(alpha, beta, cells)
        self.x = self.op.x

    def stable_dt(self) -> float:
        return self.op.stable_dt()

    def apply(self, f, pins=(0.0, 1.0)):
        """df/dt for interior values ``f`` with boundary values ``pins``."""
        op = self.op
        right = np.append(f[1:], pins[1])
        left = np.insert(f[:-1], 0, pins[0])
        rate_right = np.append(op.up[:-1], op.to_b)
        rate_left = np.insert(op.down[1:], 0, op.to_a)
        return rate_right * (right - f) + rate_left * (left - f)

    def stationary(self) -> np.ndarray:
        return self.op.discrete_psi()


def step_kimura(f, op: BackwardOperator, dt):
    """One explicit Euler step; rejects time steps beyond the monotonicity bound."""
    if dt > op.stable_dt() * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the stability bound {op.stable_dt():.3e}")
    return f + dt * op.apply(f)


def _initial_values(f0, x):
    if callable(f0):
        ends = np.asarray(f0(np.array([0.0, 1.0])), dtype=float)
        if abs(ends[0]) > 1e-12 or abs(ends[1] - 1) > 1e-12:
            raise ValueError(f"initial profile must satisfy f(0)=0 and f(1)=1, got {ends}")
        return np.asarray(f0(x), dtype=float) * np.ones_like(x)
    f = np.asarray(f0, dtype=float)
    if f.shape != x.shape:
        raise ValueError(f"initial values must have shape {x.shape}")
    return f.copy()


def solve_kimura(f0, params, t, cells=1024, method="auto", cfl=0.9) -> KimuraSolution:
    """Advance the backward equation from ``f0`` for time ``t``.

    ``params`` is a selection intensity gamma or an ``(alpha, beta)`` pair.
    ``f0`` is a callable on [0, 1] satisfying the pins, or values at the cell
    centres. ``method`` is ``"explicit"``, ``"spectral"`` or ``"auto"``.
    """
    alpha, beta = _drift_params(params)
    bop = BackwardOperator(alpha, beta, cells)
    op = bop.op
    f = _initial_values(f0, bop.x)
    f_s = bop.stationary()
    if method == "auto":
        method = "spectral" if _spectral_ok(op) else "explicit"
    if t < 0:
        raise ValueError("the backward equation runs forward in t >= 0 only")
    if method == "explicit":
        if t > 0:
            n = int(np.ceil(t / (cfl * bop.stable_dt())))
            f = _euler_steps(f, op.up, op.down, op.to_a, op.to_b, t / n, n)
    elif method == "spectral":
        # L = S T S^-1 for the forward generator, hence L^T = S^-1 T S
        diag, off, log_s = op.symmetric_form()
        lam, V = eigh_tridiagonal(diag, off)
        s = np.exp(log_s)
        fbar = f - f_s
        f = f_s + (V @ (np.exp(lam * t) * (V.T @ (s * fbar)))) / s
    else:
        raise ValueError(f"unknown method {method!r}")
    x = np.concatenate(([0.0], bop.x, [1.0]))
    pad = lambda v, hi: np.concatenate(([0.0], v, [hi]))
    return KimuraSolution(alpha, beta, x, pad(f, 1.0), pad(f_s, 1.0), float(t))


def _euler_steps(f, up, down, to_a, to_b, dt, steps):
    # explicit Euler for the transposed generator with pins f(0)=0, f(1)=1
    m = f.shape[0]
    new = np.empty(m)
    for _ in range(steps):
        for i in range(m):
            left = f[i - 1] if i > 0 else 0.0
            right = f[i + 1] if i < m - 1 else 1.0
            r_left = down[i] if i > 0 else to_a
            r_right = up[i] if i < m - 1 else to_b
            new[i] = f[i] + dt * (r_right * (right - f[i]) + r_left * (left - f[i]))
        f[:] = new
    return f


try:
    from numba import njit

    _euler_steps = njit(cache=True)(_euler_steps)
except ImportError:  # pragma: no cover
    pass


# -- adjointness ---------------------------------------------------------------

_CHEB_DEGREE = 48


def _as_series(f):
    # everything becomes a Chebyshev series on [0, 1] so products and derivatives stay exact
    if isinstance(f, (Polynomial, Chebyshev)):
        return f.convert(kind=Chebyshev, domain=[0, 1])
    if callable(f):
        return Chebyshev.interpolate(f, _CHEB_DEGREE, domain=[0, 1])
    return Polynomial(f).convert(kind=Chebyshev, domain=[0, 1])


def adjointness_residual(fbar, q, params, nodes=64) -> float:
    """``|int (D fbar'' + D g fbar') q - int fbar ((D q)'' - (D g q)')|``, D = x(1-x).

    ``fbar`` and ``q`` are numpy polynomials, power-basis coefficient
    sequences or callables (interpolated by a Chebyshev series). ``params`` is
    gamma or ``(alpha, beta)``. Both integrals use Gauss-Legendre quadrature,
    exact for polynomial pairs of moderate degree.
    """
    alpha, beta = _drift_params(params)
    F, Q = _as_series(fbar), _as_series(q)
    D = _as_series([0, 1, -1])
    G = _as_series([beta, alpha - beta])
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    y, w = (xg + 1) / 2, wg / 2
    backward = (D * F.deriv(2) + D * G * F.deriv(1))(y) * Q(y)
    forward = F(y) * ((D * Q).deriv(2) - (D * G * Q).deriv(1))(y)
    return float(abs(np.sum(w * backward) - np.sum(w * forward)))


# -- duality -----------------------------------------------------------------


def weighted_norm(f, x=None):
    """``sqrt(int f^2 / (x(1-x)) dx)``; arrays are taken as cell-centre values on a uniform grid."""
    if callable(f):
        xg, wg = np.polynomial.legendre.leggauss(200)
        y = (xg + 1) / 2
        return float(np.sqrt(np.sum(wg / 2 * f(y) ** 2 / (y * (1 - y)))))
    f = np.asarray(f, dtype=float)
    x = (np.arange(len(f)) + 0.5) / len(f) if x is None else np.asarray(x, dtype=float)
    return float(np.sqrt(np.sum(f**2 / (x * (1 - x))) / len(f)))


def duality_map(q, x=None, normalize=True):
    """Backward profile ``x(1-x) q(1-x)``, scaled to unit weighted norm.

    ``q`` is a callable (a callable is returned), or cell-centre values on a
    uniform grid, which the reflection maps onto itself. If q solves the
    forward equation with constant g = gamma, the result solves the
    homogeneous backward equation with the same gamma.
    """
    if callable(q):
        raw = lambda y: y * (1 - y) * q(1 - np.asarray(y, dtype=float))
        c = weighted_norm(raw) if normalize else 1.0
        return lambda y: raw(y) / c
    values = getattr(q, "q", q)
    values = np.asarray(values, dtype=float)
    xc = (np.arange(len(values)) + 0.5) / len(values) if x is None else np.asarray(x, dtype=float)
    g = xc * (1 - xc) * values[::-1]
    if normalize:
        g = g / weighted_norm(g, xc)
    return g


def duality_defect(q, params) -> float:
    """Relative defect of the reflection duality for the semi-discrete equations.

    With ``q`` cell values, compares the map of the forward time derivative
    with the homogeneous backward operator applied to the map of ``q``:
    ``|M(L q) - L^T M(q)| / |L^T M(q)|`` in the max norm, where M is
    :func:`duality_map` without normalisation.
    """
    alpha, beta = _drift_params(params)
    q = np.asarray(getattr(q, "q", q), dtype=float)
    bop = BackwardOperator(alpha, beta, len(q))
    dq, _, _ = bop.op.apply(q)
    lhs = duality_map(dq, normalize=False)
    rhs = bop.apply(duality_map(q, normalize=False), pins=(0.0, 0.0))
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
