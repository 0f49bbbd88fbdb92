"""
Replicator flow and the diffusion-free transport equation

    dp/dt = - d/dx (x(1-x)(x alpha + (1-x) beta) p).

The flow of the replicator field V(x) = x(1-x)(x(alpha-beta) + beta) is
integrated in a logit chart zeta = log(x - l) - log(r - x) on each interval
(l, r) between consecutive fixed points. There dzeta/dt is a bounded affine
function of x, so trajectories that approach a fixed point exponentially fast
become linear in zeta and the gaps x - l, r - x stay accurate down to
underflow. Densities are then transported by characteristics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expit

from .forward import DensityField, evolve_complete

RTOL = 1e-10
ATOL = 1e-12


@dataclass(frozen=True)
class ReplicatorFlow:
    """The replicator ODE ``X' = X(1-X)(X(alpha-beta) + beta)``."""

    alpha: float
    beta: float

    @property
    def x_star(self) -> float | None:
        """Interior equilibrium beta/(beta-alpha), or None if it is not in (0, 1)."""
        if self.alpha == self.beta:
            return None
        xs = self.beta / (self.beta - self.alpha)
        return xs if 0 < xs < 1 else None

    @property
    def hawk_dove(self) -> bool:
        return self.alpha < 0 < self.beta

    def fixed_points(self) -> np.ndarray:
        xs = self.x_star
        return np.array([0.0, 1.0] if xs is None else [0.0, xs, 1.0])

    def field(self, x):
        x = np.asarray(x, dtype=float)
        return x * (1 - x) * (x * (self.alpha - self.beta) + self.beta)

    def slope(self, x):
        """dV/dx."""
        x = np.asarray(x, dtype=float)
        d = self.alpha - self.beta
        return (1 - 2 * x) * (x * d + self.beta) + x * (1 - x) * d

    def __call__(self, x0, t):
        return self.transport(x0, t)[0]

    def transport(self, x0, t):
        """Return ``(Phi_t(x0), dPhi_t/dx0)``; negative ``t`` runs the flow backwards."""
        x0 = np.asarray(x0, dtype=float)
        if np.any((x0 < 0) | (x0 > 1)):
            raise ValueError("initial fractions must lie in [0, 1]")
        flat = x0.ravel()
        X = flat.copy()
        jac = np.ones_like(flat)
        if t == 0 or (self.alpha == 0 and self.beta == 0):
            return X.reshape(x0.shape), jac.reshape(x0.shape)

        pts = self.fixed_points()
        fixed = np.isin(flat, pts)
        jac[fixed] = np.exp(self.slope(flat[fixed]) * t)
        move = ~fixed
        if np.any(move):
            x = flat[move]
            k = np.clip(np.searchsorted(pts, x, side="right") - 1, 0, len(pts) - 2)
            l, r = pts[k], pts[k + 1]
            c0, c1 = self._chart_rate(k)
            gl, gr = x - l, r - x
            zeta0 = np.log(gl) - np.log(gr)
            sign = 1.0 if t > 0 else -1.0

            def rhs(_, z):
                return sign * (c0 + c1 * (l + (r - l) * expit(z)))

            sol = solve_ivp(rhs, (0.0, abs(t)), zeta0, method="DOP853", rtol=RTOL, atol=ATOL)
            if not sol.success:
                raise RuntimeError(f"replicator flow integration failed: {sol.message}")
            z = sol.y[:, -1]
            GL, GR = (r - l) * expit(z), (r - l) * expit(-z)
            X[move] = np.where(GL < GR, l + GL, r - GR)
            # dX/dx0 = V(X)/V(x0) with V = gap_l * gap_r * h / (r - l)
            with np.errstate(divide="ignore", invalid="ignore"):
                jac[move] = (GL * GR * (c0 + c1 * X[move])) / (gl * gr * (c0 + c1 * x))
        return X.reshape(x0.shape), jac.reshape(x0.shape)

    def _chart_rate(self, k):
        """Coefficients of dzeta/dt = c0 + c1 x on the interval with index ``k``."""
        d = self.alpha - self.beta
        xs = self.x_star
        if xs is None:
            return np.full(k.shape, self.beta), np.full(k.shape, d)
        c0 = np.where(k == 0, -d * xs, 0.0)
        c1 = np.where(k == 0, d * xs, d * (1 - xs))
        return c0, c1

    def trajectory(self, x0: float, times):
        """Phi_t(x0) at each of ``times``."""
        return np.array([float(self(x0, t)) for t in times])


def flow(x0, t, alpha, beta):
    """Phi_t(x0) for the replicator field with drift parameters (alpha, beta)."""
    return ReplicatorFlow(float(alpha), float(beta))(x0, t)


def logistic_flow(x0, t, beta):
    """Closed form for alpha == beta: ``x e^(beta t) / (1 - x + x e^(beta t))``."""
    x0 = np.asarray(x0, dtype=float)
    e = np.exp(beta * t)
    return x0 * e / (1 - x0 + x0 * e)


@dataclass(frozen=True)
class HyperbolicSolution:
    """Initial data ``a0 delta_0 + b0 delta_1 + q0`` of the transport equation plus an evaluation grid."""

    q0: Callable
    alpha: float
    beta: float
    a0: float = 0.0
    b0: float = 0.0
    grid: np.ndarray | None = None

    @property
    def flow(self) -> ReplicatorFlow:
        return ReplicatorFlow(float(self.alpha), float(self.beta))

    def density(self, t) -> Callable:
        """The interior density x -> q(t, x) as a callable."""

        def q(x):
            X, jac = self.flow.transport(x, -t)
            return self.q0(X) * jac

        return q

    def cell_masses(self, t, cells, order=16, sub=4) -> np.ndarray:
        """Interior mass in each uniform cell at time ``t``, exact up to quadrature.

        The cell edges are pulled back through the flow and ``q0`` is
        integrated between the preimages, so densities narrower than a cell
        are still resolved.
        """
        edges = np.linspace(0, 1, cells + 1)
        pre = self.flow(edges, -t) if t != 0 else edges
        g, w = np.polynomial.legendre.leggauss(order)
        s = np.linspace(0, 1, sub + 1)
        lo = pre[:-1, None] + (pre[1:] - pre[:-1])[:, None] * s[:-1]
        hi = pre[:-1, None] + (pre[1:] - pre[:-1])[:, None] * s[1:]
        nodes = (lo + hi)[..., None] / 2 + (hi - lo)[..., None] / 2 * g
        vals = np.asarray(self.q0(nodes.ravel()), dtype=float).reshape(nodes.shape)
        return ((hi - lo) / 2 * (vals * w).sum(axis=-1)).sum(axis=-1)


@dataclass(frozen=True)
class HyperbolicSnapshot:
    x: np.ndarray
    q: np.ndarray
    a: float
    b: float
    t: float
    source: HyperbolicSolution

    def peak(self) -> float:
        return float(self.x[np.argmax(self.q)])


def solve_nodiffusion(init: HyperbolicSolution, t) -> HyperbolicSnapshot:
    """Evaluate the characteristics solution at time ``t`` on ``init.grid``.

    ``p(t,x) = a0 delta_0 + b0 delta_1 + q0(X) V(X)/V(x)`` with ``X = Phi_{-t}(x)``;
    the boundary masses do not move because V vanishes at 0 and 1.
    """
    if init.grid is None:
        raise ValueError("HyperbolicSolution needs an evaluation grid")
    x = np.asarray(init.grid, dtype=float)
    q = init.density(t)(x) if t != 0 else np.asarray(init.q0(x), dtype=float) * np.ones_like(x)
    return HyperbolicSnapshot(x, q, init.a0, init.b0, float(t), init)


def upwind_nodiffusion(field: DensityField, alpha, beta, t) -> DensityField:
    """Upwind finite-volume solution of the transport equation (cross-check for characteristics)."""
    return evolve_complete(field, alpha, beta, t, eps=0.0, method="explicit")


def lagrangian_density(q, alpha, beta, x=None):
    """``u = x(1-x)(beta + (alpha-beta) x) q``, which is constant along characteristics.

    ``q`` may be an array on ``x``, a DensityField, or a callable (a callable is returned).
    """
    V = ReplicatorFlow(float(alpha), float(beta)).field
    if callable(q):
        return lambda y: V(y) * q(y)
    if isinstance(q, DensityField):
        return V(q.x) * q.q
    if x is None:
        raise ValueError("grid x required for array input")
    return V(x) * np.asarray(q, dtype=float)


def density_from_lagrangian(u, alpha, beta, x):
    """Invert :func:`lagrangian_density` away from the fixed points."""
    V = ReplicatorFlow(float(alpha), float(beta)).field(x)
    if np.any(V == 0):
        raise ValueError("u does not determine q at a fixed point of the flow")
    return np.asarray(u, dtype=float) / V


def lyapunov_weight(alpha, beta):
    """``phi(x) = |x(alpha-beta)+beta|^((alpha-beta)/(alpha beta)) x^(-1/beta) (1-x)^(1/alpha)``.

    Along the transport equation ``d/dt int p phi = - int p phi``. Defined for
    Hawk-Dove parameters alpha < 0 < beta; it vanishes only at x*. The absolute
    value extends the power to x > x* where the base is negative.
    """
    alpha, beta = float(alpha), float(beta)
    if not alpha < 0 < beta:
        raise ValueError("the Lyapunov weight needs Hawk-Dove parameters alpha < 0 < beta")
    k = (alpha - beta) / (alpha * beta)
    xs = beta / (beta - alpha)

    def phi(x, gap=None):
        # ``gap`` = x - x*, passed when known more accurately than x itself
        x = np.asarray(x, dtype=float)
        d = x - xs if gap is None else gap
        with np.errstate(divide="ignore"):
            return np.exp(k * np.log(np.abs((alpha - beta) * d)) - np.log(x) / beta + np.log1p(-x) / alpha)

    return phi


def _graded_nodes(cuts, levels=40, order=16):
    # Gauss-Legendre panels refined geometrically towards each cut point
    edges = set(cuts)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        span = hi - lo
        for j in range(levels):
            f = 0.5 * 0.5**j
            edges.update((lo + f * span, hi - f * span))
        edges.update(np.linspace(lo, hi, 33)[1:-1])
    e = np.array(sorted(edges))
    g, w = np.polynomial.legendre.leggauss(order)
    a, b = e[:-1, None], e[1:, None]
    return ((a + b) / 2 + (b - a) / 2 * g).ravel(), ((b - a) / 2 * w * np.ones_like(g)).ravel()


def lyapunov_moment(p, alpha, beta) -> float:
    """``int p phi`` for a density snapshot and Hawk-Dove parameters.

    For a :class:`HyperbolicSnapshot` the integral is pushed back to the
    initial data, ``int q0(x0) phi(Phi_t(x0)) dx0``, so that exponentially
    concentrated densities need no resolution. Boundary masses give an
    infinite moment.
    """
    phi = lyapunov_weight(alpha, beta)
    flow_ = ReplicatorFlow(float(alpha), float(beta))
    xs = flow_.x_star
    if isinstance(p, HyperbolicSnapshot):
        if p.a > 0 or p.b > 0:
            return float("inf")
        x0, w = _graded_nodes([0.0, xs, 1.0])
        X = flow_(x0, p.t)
        return float(np.sum(w * p.source.q0(x0) * phi(X)))
    if isinstance(p, DensityField):
        if p.a > 0 or p.b > 0:
            return float("inf")
        g, gw = np.polynomial.legendre.leggauss(8)
        y = p.x[:, None] + p.dx / 2 * g
        return float(np.sum(p.q * (gw * phi(y)).sum(axis=1) / 2) * p.dx)
    if callable(p):
        x0, w = _graded_nodes([0.0, xs, 1.0])
        return float(np.sum(w * p(x0) * phi(x0)))
    raise TypeError("unsupported density type")
