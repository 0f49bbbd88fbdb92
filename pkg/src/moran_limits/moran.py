"""
Exact finite-N generalized Moran process.

One step of the chain: an individual chosen uniformly at random dies, the
N-1 survivors play the 2x2 game against each other (self-play excluded) and
one survivor is copied with probability proportional to its average payoff.
The distribution over the number n of type-I individuals evolves by a
tridiagonal, column-stochastic matrix whose two absorbing states are n=0 and
n=N.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

KERNEL_VARIANTS = ("death-first", "birth-first")


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoffs of row player I/II against column player I/II."""

    A: float
    B: float
    C: float
    D: float

    def __post_init__(self):
        for name in "ABCD":
            if not getattr(self, name) > 0:
                raise ValueError(f"payoff {name} must be strictly positive, got {getattr(self, name)!r}")

    @property
    def hawk_dove(self) -> bool:
        return self.C > self.A > 0 and self.B > self.D > 0

    def as_tuple(self):
        return (self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class ScaledGame:
    """Payoffs approaching one as ``1 + (a, b, c, d) / N**nu``."""

    a: float
    b: float
    c: float
    d: float
    nu: float = 1.0

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu!r}")

    @property
    def alpha(self) -> float:
        return self.a - self.c

    @property
    def beta(self) -> float:
        return self.b - self.d

    def finite_payoffs(self, N) -> PayoffMatrix:
        s = float(N) ** (-self.nu)
        return PayoffMatrix(1 + self.a * s, 1 + self.b * s, 1 + self.c * s, 1 + self.d * s)

    @classmethod
    def from_drift(cls, alpha, beta, nu=1.0) -> "ScaledGame":
        """A representative game with the given (alpha, beta): a=alpha, b=beta, c=d=0."""
        return cls(alpha, beta, 0.0, 0.0, nu)


def _reproduction_weight_I(nI, nII, game):
    # Probability that a type-I survivor reproduces. The common 1/(N-2)
    # normalisation of the average payoff cancels in the ratio.
    A, B, C, D = game.as_tuple()
    wI = nI * (A * (nI - 1) + B * nII)
    wII = nII * (C * nI + D * (nII - 1))
    return wI / (wI + wII)


def transition_probabilities(n, N, game: PayoffMatrix, variant="death-first"):
    """Return ``(c_minus, c_zero, c_plus)`` at state ``n`` for population ``N``.

    Only arithmetic is used, so ``n`` may be an int, a float, a numpy array or a
    ``fractions.Fraction`` (payoffs may be Fractions as well). Non-integer
    ``n`` evaluates the rational interpolant used for 1/N expansions.
    """
    if variant == "death-first":
        if N == 2:
            # one survivor: fitness is irrelevant, assign 1
            cplus = (N - n) / N * (n / (N - 1))
            cminus = n / N * ((N - n) / (N - 1))
        else:
            cplus = (N - n) / N * _reproduction_weight_I(n, N - n - 1, game)
            cminus = n / N * (1 - _reproduction_weight_I(n - 1, N - n, game))
    elif variant == "birth-first":
        A, B, C, D = game.as_tuple()
        wI = n * (A * (n - 1) + B * (N - n))
        wII = (N - n) * (C * n + D * (N - n - 1))
        pI = wI / (wI + wII)
        cplus = pI * (N - n) / N
        cminus = (1 - pI) * n / N
    else:
        raise ValueError(f"unknown kernel variant {variant!r}; expected one of {KERNEL_VARIANTS}")
    return cminus, 1 - cminus - cplus, cplus


@dataclass(frozen=True)
class TransitionKernel:
    N: int
    cminus: np.ndarray
    czero: np.ndarray
    cplus: np.ndarray

    def matrix(self) -> np.ndarray:
        """Dense column-stochastic matrix M with ``P(t+1) = M @ P(t)``."""
        M = np.diag(self.czero)
        M += np.diag(self.cplus[:-1], -1)
        M += np.diag(self.cminus[1:], 1)
        return M

    def apply(self, P: np.ndarray) -> np.ndarray:
        out = self.czero * P
        out[1:] += self.cplus[:-1] * P[:-1]
        out[:-1] += self.cminus[1:] * P[1:]
        return out


def build_transition_kernel(game: PayoffMatrix, N: int, variant="death-first") -> TransitionKernel:
    if N < 2 or int(N) != N:
        raise ValueError(f"population size must be an integer >= 2, got {N!r}")
    if not isinstance(game, PayoffMatrix):
        game = PayoffMatrix(*game)
    N = int(N)
    n = np.arange(N + 1, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        cminus, czero, cplus = transition_probabilities(n, N, game, variant)
    # endpoint weights are 0/0 in the closed form; they are absorbing
    cminus = np.where(n == 0, 0.0, cminus)
    cplus = np.where(n == N, 0.0, cplus)
    czero = 1.0 - cminus - cplus
    return TransitionKernel(N, cminus, czero, cplus)


@dataclass(frozen=True)
class ChainState:
    N: int
    P: np.ndarray
    t: int = 0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.shape != (self.N + 1,):
            raise ValueError(f"P must have length N+1={self.N + 1}, got shape {P.shape}")
        if np.any(P < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(P.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to one, got {P.sum()!r}")
        object.__setattr__(self, "P", P)

    @property
    def interior_mass(self) -> float:
        return float(self.P[1:-1].sum())

    @classmethod
    def point(cls, N, n) -> "ChainState":
        P = np.zeros(N + 1)
        P[n] = 1.0
        return cls(N, P)

    @classmethod
    def from_density(cls, N, density) -> "ChainState":
        """Sample a continuum density at x = n/N and renormalise (endpoints included)."""
        x = np.arange(N + 1) / N
        P = np.asarray(density(x), dtype=float) * np.ones(N + 1)
        total = P.sum()
        if total <= 0:
            raise ValueError("density has no mass on the lattice")
        return cls(N, P / total)


@dataclass(frozen=True)
class FixationVector:
    F: np.ndarray

    @property
    def N(self) -> int:
        return len(self.F) - 1


def evolve(state: ChainState, kernel: TransitionKernel, steps: int) -> ChainState:
    if kernel.N != state.N:
        raise ValueError(f"kernel is for N={kernel.N}, state for N={state.N}")
    P = state.P.copy()
    cz, cp, cm = kernel.czero, kernel.cplus[:-1], kernel.cminus[1:]
    new = np.empty_like(P)
    for _ in range(int(steps)):
        np.multiply(cz, P, out=new)
        new[1:] += cp * P[:-1]
        new[:-1] += cm * P[1:]
        P, new = new, P
    return _unchecked_state(state.N, P, state.t + int(steps))


def _unchecked_state(N, P, t):
    # evolve() keeps the invariants up to round-off; skip the O(N) revalidation
    # and the 1e-12 sum check, which long runs may exceed by accumulation
    obj = object.__new__(ChainState)
    object.__setattr__(obj, "N", N)
    object.__setattr__(obj, "P", P)
    object.__setattr__(obj, "t", t)
    return obj


def fixation_vector(kernel: TransitionKernel) -> FixationVector:
    """Left-invariant vector of M with F(0)=0, F(N)=1.

    Solves ``c+(n) (F(n+1)-F(n)) = c-(n) (F(n)-F(n-1))`` through
    ``F(n) = S(n)/S(N)``, ``S(n) = sum_{j<n} prod_{k<=j} c-(k)/c+(k)``, with
    the products and sums carried in log space.
    """
    N = kernel.N
    cm, cp = kernel.cminus[1:N], kernel.cplus[1:N]
    if np.any(cp <= 0) or np.any(cm <= 0):
        raise ValueError("interior transition probabilities must be positive")
    if kernel.cplus[N] != 0 or kernel.cminus[0] != 0:
        raise ValueError("endpoints must be absorbing")
    if np.allclose(cm, cp, rtol=1e-12, atol=0):
        # neutral chain up to rounding of the closed form: F is exactly linear
        return FixationVector(np.arange(N + 1) / N)
    log_terms = np.concatenate(([0.0], np.cumsum(np.log(cm) - np.log(cp))))
    log_S = np.logaddexp.accumulate(log_terms)
    F = np.empty(N + 1)
    F[0] = 0.0
    F[1:] = np.exp(log_S - log_S[-1])
    F[N] = 1.0
    return FixationVector(F)


def absorb(state: ChainState, kernel: TransitionKernel):
    """Return ``(pi0, pi1)``: probabilities of ending at n=0 and n=N."""
    if kernel.N != state.N:
        raise ValueError(f"kernel is for N={kernel.N}, state for N={state.N}")
    pi1 = float(fixation_vector(kernel).F @ state.P)
    pi1 = min(max(pi1, 0.0), 1.0)
    return 1.0 - pi1, pi1


def absorb_by_iteration(state: ChainState, kernel: TransitionKernel, tol=1e-12, max_steps=None, chunk=None):
    """Iterate the chain until the interior mass drops below ``tol``.

    Stops after ``50 N^2`` steps by default and warns if the tolerance was not
    reached. Returns ``(pi0, pi1, steps)``.
    """
    N = state.N
    if max_steps is None:
        max_steps = 50 * N * N
    chunk = chunk or max(N, 1)
    steps = 0
    while state.interior_mass >= tol and steps < max_steps:
        k = min(chunk, max_steps - steps)
        state = evolve(state, kernel, k)
        steps += k
    if state.interior_mass >= tol:
        warnings.warn(f"interior mass {state.interior_mass:.3e} after {steps} steps exceeds {tol:.1e}")
    return float(state.P[0]), float(state.P[-1]), steps


def limit_matrix(kernel: TransitionKernel) -> np.ndarray:
    """``lim M^k``: every column is (1-F(n)) e_0 + F(n) e_N."""
    F = fixation_vector(kernel).F
    L = np.zeros((kernel.N + 1, kernel.N + 1))
    L[0] = 1 - F
    L[-1] = F
    return L
