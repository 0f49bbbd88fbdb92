from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moran_limits.moran import (
    ChainState,
    PayoffMatrix,
    ScaledGame,
    absorb,
    absorb_by_iteration,
    build_transition_kernel,
    evolve,
    fixation_vector,
    limit_matrix,
    transition_probabilities,
)

payoff = st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=50)


def hawk_dove_games():
    # C > A > 0 and B > D > 0
    return st.tuples(
        st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.floats(0.05, 1.5), st.floats(0.05, 1.5)
    ).map(lambda v: PayoffMatrix(v[0], v[1] + v[3], v[0] + v[2], v[1]))


def brute_force(n, N, game):
    """Enumerate (victim, reproducer) pairs individual by individual, exactly."""
    A, B, C, D = game.as_tuple()
    types = ["I"] * n + ["II"] * (N - n)
    up = down = Fraction(0)
    for v in range(N):
        survivors = [i for i in range(N) if i != v]
        fitness = {}
        for i in survivors:
            others = [types[j] for j in survivors if j != i]
            if not others:
                fitness[i] = Fraction(1)
                continue
            row = (A, B) if types[i] == "I" else (C, D)
            fitness[i] = sum(row[0] if o == "I" else row[1] for o in others) / Fraction(len(others))
        total = sum(fitness.values())
        for i in survivors:
            p = Fraction(1, N) * fitness[i] / total
            if types[v] == "II" and types[i] == "I":
                up += p
            elif types[v] == "I" and types[i] == "II":
                down += p
    return down, 1 - up - down, up


@settings(max_examples=30, deadline=None)
@given(payoff, payoff, payoff, payoff, st.integers(2, 6))
def test_kernel_matches_brute_force_enumeration(A, B, C, D, N):
    game = PayoffMatrix(A, B, C, D)
    for n in range(1, N):
        assert transition_probabilities(Fraction(n), N, game) == brute_force(n, N, game)


def test_neutral_two_individuals():
    k = build_transition_kernel(PayoffMatrix(1, 1, 1, 1), 2)
    assert (k.cplus[1], k.cminus[1], k.czero[1]) == (0.5, 0.5, 0.0)
    out = evolve(ChainState.point(2, 1), k, 1)
    np.testing.assert_array_equal(out.P, [0.5, 0.0, 0.5])


@pytest.mark.parametrize("N", [3, 7, 40])
def test_neutral_closed_form(N):
    k = build_transition_kernel(PayoffMatrix(1, 1, 1, 1), N)
    n = np.arange(N + 1)
    np.testing.assert_allclose(k.cplus, n * (N - n) / (N * (N - 1)), atol=1e-15)
    np.testing.assert_allclose(k.cminus, k.cplus, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(hawk_dove_games(), st.integers(2, 80))
def test_kernel_invariants(game, N):
    k = build_transition_kernel(game, N)
    np.testing.assert_allclose(k.cminus + k.czero + k.cplus, 1, atol=1e-15)
    assert k.cplus[N] == 0 and k.cminus[0] == 0 and k.czero[0] == 1 and k.czero[N] == 1
    for c in (k.cminus, k.czero, k.cplus):
        assert np.all((c >= 0) & (c <= 1))
    np.testing.assert_allclose(k.matrix().sum(axis=0), 1, atol=1e-14)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_transition_kernel(PayoffMatrix(1, 1, 1, 1), 1)
    with pytest.raises(ValueError):
        PayoffMatrix(1, 0, 1, 1)
    with pytest.raises(ValueError):
        evolve(ChainState.point(5, 1), build_transition_kernel(PayoffMatrix(1, 1, 1, 1), 6), 1)
    with pytest.raises(ValueError):
        ScaledGame(1, 1, 1, 1, nu=0)


def test_hawk_dove_flag():
    assert PayoffMatrix(1, 3, 2, 1.5).hawk_dove
    assert not PayoffMatrix(2, 1, 1, 2).hawk_dove


def test_absorbing_state_is_fixed():
    k = build_transition_kernel(PayoffMatrix(1, 2, 3, 1), 10)
    np.testing.assert_array_equal(evolve(ChainState.point(10, 0), k, 50).P, ChainState.point(10, 0).P)


def test_fixation_matches_dense_solve_n3():
    game = PayoffMatrix(1.0, 2.0, 1.7, 1.2)
    k = build_transition_kernel(game, 3)
    # harmonic equations F(n) = sum_m M[m, n] F(m) at n = 1, 2 with F(0)=0, F(3)=1
    M = k.matrix()
    A = np.eye(2) - M[1:3, 1:3].T
    rhs = M[3, 1:3]
    F = fixation_vector(k).F
    np.testing.assert_allclose(F[1:3], np.linalg.solve(A, rhs), rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(hawk_dove_games(), st.integers(2, 120))
def test_fixation_vector_left_invariant_and_monotone(game, N):
    k = build_transition_kernel(game, N)
    F = fixation_vector(k).F
    assert F[0] == 0 and F[-1] == 1
    assert np.all(np.diff(F) >= 0)
    np.testing.assert_allclose(k.matrix().T @ F, F, atol=1e-13)


def test_fixation_strong_selection_no_overflow():
    k = build_transition_kernel(ScaledGame(-400, 400, 0, 0).finite_payoffs(500), 500)
    F = fixation_vector(k).F
    assert np.all(np.isfinite(F)) and np.all(np.diff(F) >= 0)


@pytest.mark.parametrize("N", [2, 5, 31])
def test_neutral_fixation_exact(N):
    F = fixation_vector(build_transition_kernel(PayoffMatrix(1, 1, 1, 1), N)).F
    assert np.array_equal(F, np.arange(N + 1) / N)


@settings(max_examples=25, deadline=None)
@given(hawk_dove_games(), st.integers(3, 40), st.integers(0, 2**32 - 1))
def test_dual_invariants(game, N, seed):
    k = build_transition_kernel(game, N)
    F = fixation_vector(k).F
    P = np.random.default_rng(seed).random(N + 1)
    s = ChainState(N, P / P.sum())
    for _ in range(5):
        nxt = evolve(s, k, 7)
        assert abs(nxt.P.sum() - s.P.sum()) <= 7e-12
        assert abs(F @ nxt.P - F @ s.P) <= 7e-12
        s = nxt


def test_absorb_endpoints_and_neutral():
    k = build_transition_kernel(PayoffMatrix(1, 1, 1, 1), 9)
    assert absorb(ChainState.point(9, 9), k) == (0.0, 1.0)
    for n in range(10):
        assert absorb(ChainState.point(9, n), k)[1] == pytest.approx(n / 9, abs=1e-15)


def test_absorb_agrees_with_iteration_hawk_dove():
    game = ScaledGame(-2, 2, 0, 0).finite_payoffs(50)
    assert game.hawk_dove
    k = build_transition_kernel(game, 50)
    P = np.r_[0.0, np.full(49, 1 / 49), 0.0]
    s = ChainState(50, P)
    _, pi1 = absorb(s, k)
    _, pi1_it, _ = absorb_by_iteration(s, k)
    assert abs(pi1 - pi1_it) <= 1e-10


def test_absorption_warns_when_capped():
    k = build_transition_kernel(ScaledGame(-20, 20, 0, 0).finite_payoffs(50), 50)
    with pytest.warns(UserWarning):
        absorb_by_iteration(ChainState.point(50, 25), k, max_steps=5)


def test_interior_mass_decays_geometrically():
    N = 30
    k = build_transition_kernel(PayoffMatrix(1.0, 1.3, 1.2, 1.0), N)
    s = ChainState.point(N, N // 2)
    masses = []
    for _ in range(20):
        s = evolve(s, k, N)
        masses.append(s.interior_mass)
    ratios = np.array(masses[1:]) / np.array(masses[:-1])
    assert ratios.max() < 1


def test_eigenvalue_one_has_multiplicity_two():
    k = build_transition_kernel(PayoffMatrix(1.0, 1.4, 1.3, 1.0), 12)
    ev = np.linalg.eigvals(k.matrix())
    assert np.sum(np.abs(ev - 1) < 1e-10) == 2
    L = limit_matrix(k)
    np.testing.assert_allclose(np.linalg.matrix_power(k.matrix(), 20000), L, atol=1e-10)


def test_from_density_normalises():
    s = ChainState.from_density(10, lambda x: 6 * x * (1 - x))
    assert s.P.sum() == pytest.approx(1, abs=1e-15)
