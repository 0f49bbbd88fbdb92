"""
Two populations of mixed strategists.

An E_theta strategist plays pure strategy I with probability theta. A game
between E_theta1 (type I) and E_theta2 (type II) is again a 2x2 game, with the
bilinear payoffs of the two mixed strategies, so the continuum limit is the
pure-strategy equation with effective drift parameters

    beta_eff  = (theta1 - theta2)(theta2 alpha + (1 - theta2) beta)
    alpha_eff = beta_eff + (theta1 - theta2)^2 (alpha - beta).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .moran import PayoffMatrix, ScaledGame
from .replicator import ReplicatorFlow

DOMINANCE_GRID = np.linspace(0, 1, 23)[1:-1]


def _check_theta(theta1, theta2):
    for name, th in (("theta1", theta1), ("theta2", theta2)):
        if not 0 <= th <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {th!r}")


def _mixed_payoff(p, q, A, B, C, D):
    # expected payoff of a p-strategist against a q-strategist
    return p * q * A + p * (1 - q) * B + (1 - p) * q * C + (1 - p) * (1 - q) * D


def reduce_payoffs(base: PayoffMatrix, theta1, theta2) -> PayoffMatrix:
    """Payoff matrix of E_theta1 (row/column I) against E_theta2 (II)."""
    _check_theta(theta1, theta2)
    A, B, C, D = base.as_tuple()
    return PayoffMatrix(
        _mixed_payoff(theta1, theta1, A, B, C, D),
        _mixed_payoff(theta1, theta2, A, B, C, D),
        _mixed_payoff(theta2, theta1, A, B, C, D),
        _mixed_payoff(theta2, theta2, A, B, C, D),
    )


def reduce_scaled(game: ScaledGame, theta1, theta2) -> ScaledGame:
    """The same reduction on the scaled payoffs (a, b, c, d); weights sum to one."""
    _check_theta(theta1, theta2)
    abcd = (game.a, game.b, game.c, game.d)
    return ScaledGame(
        _mixed_payoff(theta1, theta1, *abcd),
        _mixed_payoff(theta1, theta2, *abcd),
        _mixed_payoff(theta2, theta1, *abcd),
        _mixed_payoff(theta2, theta2, *abcd),
        game.nu,
    )


@dataclass(frozen=True)
class MixedGame:
    theta1: float
    theta2: float
    alpha: float
    beta: float

    def __post_init__(self):
        _check_theta(self.theta1, self.theta2)

    @property
    def delta(self) -> float:
        return self.theta1 - self.theta2

    @property
    def beta_eff(self) -> float:
        return self.delta * (self.theta2 * self.alpha + (1 - self.theta2) * self.beta)

    @property
    def alpha_eff(self) -> float:
        return self.beta_eff + self.delta**2 * (self.alpha - self.beta)

    @property
    def neutral(self) -> bool:
        return self.theta1 == self.theta2

    def drift(self, x):
        """``x(1-x)(x delta^2 (alpha-beta) + delta (theta2 alpha + (1-theta2) beta))``."""
        x = np.asarray(x, dtype=float)
        d = self.delta
        return x * (1 - x) * (x * d**2 * (self.alpha - self.beta) + d * (self.theta2 * self.alpha + (1 - self.theta2) * self.beta))

    def weight(self, y):
        """``F(y) = exp(-y^2 delta^2 (alpha-beta)/2 - y delta (theta2 alpha + (1-theta2) beta))``."""
        y = np.asarray(y, dtype=float)
        d = self.delta
        return np.exp(-(y**2) * d**2 * (self.alpha - self.beta) / 2 - y * d * (self.theta2 * self.alpha + (1 - self.theta2) * self.beta))

    def reduced(self, base: PayoffMatrix) -> PayoffMatrix:
        return reduce_payoffs(base, self.theta1, self.theta2)


def _quad(f, lo, hi):
    return integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-11, limit=200)[0]


def mixed_fixation(p0, game: MixedGame, tol=1e-6) -> float:
    """Fixation probability of the E_theta1 type.

    ``p0`` is a callable interior density with unit mass, or a float x for the
    point mass at x. Computed by adaptive quadrature of
    ``int p0(x) int_0^x F(y) dy dx / int_0^1 F(y) dy``.
    """
    Z = _quad(game.weight, 0.0, 1.0)
    if isinstance(p0, (float, int, np.floating)):
        x = float(p0)
        if not 0 <= x <= 1:
            raise ValueError("point mass must lie in [0, 1]")
        return _quad(game.weight, 0.0, x) / Z
    if not callable(p0):
        raise TypeError("p0 must be a callable density or a point in [0, 1]")
    mass = _quad(p0, 0.0, 1.0)
    if abs(mass - 1) > tol:
        raise ValueError(f"initial density has mass {mass:.8g}, expected 1")
    # swap the order of integration: int_0^1 F(y) int_y^1 p0 dx dy
    return _quad(lambda y: game.weight(y) * _quad(p0, y, 1.0), 0.0, 1.0) / Z


def dominates(theta1, theta2, alpha, beta, cross_check=False) -> bool:
    """True iff E_theta2 dominates E_theta1 according to the replicator flow.

    The flow carries theta1 towards theta2: the field points from theta1 to
    theta2 and no equilibrium lies strictly between them. At theta1 in {0, 1}
    the direction is read off the field just inside the interval. With
    ``cross_check`` the fixation comparison is evaluated too and a warning is
    issued on disagreement.
    """
    _check_theta(theta1, theta2)
    if theta1 == theta2:
        raise ValueError("equal strategists are mutually neutral")
    flow_ = ReplicatorFlow(float(alpha), float(beta))
    g1 = beta + (alpha - beta) * theta1
    direction = np.sign(flow_.field(theta1)) if 0 < theta1 < 1 else np.sign(g1)
    xs = flow_.x_star
    between = xs is not None and min(theta1, theta2) < xs < max(theta1, theta2)
    result = bool(direction == np.sign(theta2 - theta1) and not between)
    if cross_check:
        other = dominates_by_fixation(theta1, theta2, alpha, beta)
        if other != result:
            warnings.warn(f"flow and fixation criteria disagree at theta=({theta1}, {theta2}), (alpha, beta)=({alpha}, {beta})")
    return result


def dominates_by_fixation(theta1, theta2, alpha, beta, grid=DOMINANCE_GRID) -> bool:
    """Definition check: pi1 of the theta1 type is below x for every point mass on ``grid``."""
    game = MixedGame(theta1, theta2, alpha, beta)
    if game.neutral:
        raise ValueError("equal strategists are mutually neutral")
    return all(mixed_fixation(float(x), game) < x for x in grid)


def fixation_margin(theta1, theta2, alpha, beta, grid=DOMINANCE_GRID) -> np.ndarray:
    """``x - pi1(delta_x)`` on ``grid``; all positive iff theta2 dominates by fixation."""
    game = MixedGame(theta1, theta2, alpha, beta)
    return np.array([x - mixed_fixation(float(x), game) for x in grid])
