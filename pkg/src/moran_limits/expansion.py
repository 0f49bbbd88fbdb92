"""
Large-N expansion of the Moran transition probabilities.

The kernel probabilities evaluated at the lattice neighbours of x = n/N,

    c+(xN - 1, N),  c0(xN, N),  c-(xN + 1, N),

are smooth in h = 1/N at fixed payoffs and are expanded as
``c^(0) + h c^(1) + h^2/2 c^(2) + O(h^3)``.  The coefficients are obtained
numerically by polynomial (Richardson) extrapolation over a list of
population sizes rather than symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moran import PayoffMatrix, ScaledGame, transition_probabilities

DEFAULT_N_LIST = (64, 128, 256, 512)
DEFAULT_X_GRID = np.linspace(0, 1, 103)[1:-1]


@dataclass(frozen=True)
class KernelExpansion:
    """Order 0/1/2 coefficients of c-, c0, c+ sampled on ``x``.

    Each coefficient array has shape ``(3, len(x))`` with rows (order 0, 1, 2).
    ``residual`` bounds the size of the neglected O(h^3) part at the coarsest N.
    """

    x: np.ndarray
    minus: np.ndarray
    zero: np.ndarray
    plus: np.ndarray
    residual: float
    payoffs: PayoffMatrix

    def total(self, order):
        return self.plus[order] + self.zero[order] + self.minus[order]

    def difference(self, order):
        return self.plus[order] - self.minus[order]


def richardson(h, values):
    """Extrapolate samples ``values[k] ~ sum_j coef_j h[k]^j`` to their Taylor coefficients.

    ``values`` has shape ``(len(h), ...)``. Returns ``(coefs, residual)`` where
    ``coefs[j]`` is the coefficient of h^j (j <= 2) and ``residual`` estimates
    the h^3 remainder at the largest h.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or len(h) < 3:
        raise ValueError("need at least three step sizes")
    ratios = h[:-1] / h[1:]
    if np.any(ratios <= 1.1):
        raise ValueError("step sizes must decrease by a factor > 1.1; extrapolation is ill-conditioned")
    values = np.asarray(values, dtype=float)
    V = np.vander(h / h[0], len(h), increasing=True)
    flat = values.reshape(len(h), -1)
    coefs = np.linalg.solve(V, flat)
    scale = h[0] ** np.arange(len(h))
    coefs = coefs / scale[:, None]
    if len(h) > 3:
        residual = float(np.max(np.abs(coefs[3:] * scale[3:, None])))
    else:
        residual = float("nan")
    return coefs[:3].reshape((3,) + values.shape[1:]), residual


def _shifted_kernel(x, N, payoffs, variant):
    n = x * N
    cm, _, _ = transition_probabilities(n + 1, N, payoffs, variant)
    _, cz, _ = transition_probabilities(n, N, payoffs, variant)
    _, _, cp = transition_probabilities(n - 1, N, payoffs, variant)
    return cm, cz, cp


def expand_kernel(game, x_grid=None, N_list=DEFAULT_N_LIST, payoff_N=None, variant="death-first") -> KernelExpansion:
    """Expand the kernel in 1/N at fixed payoffs.

    ``game`` is a PayoffMatrix, or a ScaledGame whose payoffs are frozen at
    ``payoff_N`` (default: the largest size in ``N_list``).
    """
    x = DEFAULT_X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("x grid must lie strictly inside (0, 1)")
    N_list = np.asarray(sorted(N_list), dtype=float)
    if isinstance(game, ScaledGame):
        payoffs = game.finite_payoffs(N_list[-1] if payoff_N is None else payoff_N)
    else:
        payoffs = game
    samples = np.array([_shifted_kernel(x, N, payoffs, variant) for N in N_list])  # (len N, 3, len x)
    coefs, residual = richardson(1.0 / N_list, samples)
    # h^2 coefficient is c^(2)/2
    coefs[2] *= 2.0
    return KernelExpansion(x, coefs[:, 0], coefs[:, 1], coefs[:, 2], residual, payoffs)


def selection_limits(game: ScaledGame, x_grid=None, N_list=DEFAULT_N_LIST, variant="death-first"):
    """Return ``(lim N^nu sum_* c_*^(1), lim N^nu (c+^(0) - c-^(0)))`` on ``x_grid``.

    Both combinations vanish at neutral payoffs; the payoff scale ``N^-nu`` is
    taken to zero by a second extrapolation over ``N_list``.
    """
    x = DEFAULT_X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    N_list = sorted(N_list)
    s = np.array([float(N) ** (-game.nu) for N in N_list])
    totals, diffs = [], []
    for N in N_list:
        exp = expand_kernel(game, x, N_list, payoff_N=N, variant=variant)
        sN = float(N) ** (-game.nu)
        totals.append(exp.total(1) / sN)
        diffs.append(exp.difference(0) / sN)
    # both ratios are smooth in s near 0
    t_coefs, _ = richardson(s, np.array(totals))
    d_coefs, _ = richardson(s, np.array(diffs))
    return t_coefs[0], d_coefs[0]


def drift_limit(game, x):
    """``x(1-x)(x alpha + (1-x) beta)``; ``game`` is a ScaledGame or an (alpha, beta) pair."""
    alpha, beta = (game.alpha, game.beta) if isinstance(game, ScaledGame) else game
    x = np.asarray(x, dtype=float)
    return x * (1 - x) * (x * alpha + (1 - x) * beta)


def drift_divergence_limit(game, x):
    """Limit of ``N^nu (c+^(1) + c0^(1) + c-^(1))``, i.e. minus the derivative of the drift.

    Equals ``-beta - 2(alpha - 2 beta) x + 3(alpha - beta) x^2``.
    """
    alpha, beta = (game.alpha, game.beta) if isinstance(game, ScaledGame) else game
    x = np.asarray(x, dtype=float)
    return -beta - 2 * (alpha - 2 * beta) * x + 3 * (alpha - beta) * x**2


def classify_balance(nu, dt_exponent) -> str:
    """Classify the limit reached with payoffs ``1 + O(N^-nu)`` and time step ``N^-dt_exponent``."""
    if nu <= 0 or dt_exponent <= 0:
        raise ValueError("nu and dt_exponent must be positive")
    if np.isclose(dt_exponent, nu + 1):
        if np.isclose(nu, 1.0):
            return "drift-diffusion"
        if nu < 1:
            return "drift-only"
    return "degenerate"
