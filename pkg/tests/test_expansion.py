import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moran_limits.expansion import (
    DEFAULT_X_GRID,
    classify_balance,
    drift_divergence_limit,
    drift_limit,
    expand_kernel,
    richardson,
    selection_limits,
)
from moran_limits.moran import PayoffMatrix, ScaledGame

scaled = st.tuples(*[st.floats(-20, 20)] * 4).map(lambda v: ScaledGame(*v))


def test_richardson_recovers_polynomial():
    h = 1 / np.array([10.0, 20, 40, 80])
    coefs, residual = richardson(h, 3 + 2 * h - 5 * h**2)
    np.testing.assert_allclose(coefs, [3, 2, -5], atol=1e-9)
    assert residual < 1e-9


def test_richardson_rejects_close_steps():
    with pytest.raises(ValueError):
        richardson([0.1, 0.099, 0.05], [1, 1, 1])
    with pytest.raises(ValueError):
        richardson([0.1, 0.05], [1, 1])


def test_zeroth_order_is_stochastic():
    e = expand_kernel(ScaledGame(3, -4, 1, 2))
    np.testing.assert_allclose(e.total(0), 1, atol=1e-9)


def test_neutral_has_no_first_order_correction():
    e = expand_kernel(PayoffMatrix(1, 1, 1, 1))
    # the shifted neutral kernel sums to 1 - 2/(N(N-1)), so only h^4 truncation remains
    np.testing.assert_allclose(e.total(1), 0, atol=1e-5)
    tot, diff = selection_limits(ScaledGame(0, 0, 0, 0))
    assert np.abs(diff).max() < 1e-5
    # dividing by the payoff scale 1/N amplifies the truncation
    assert np.abs(tot).max() < 1e-2


def test_drift_at_half_for_dove_game():
    _, diff = selection_limits(ScaledGame(0, 20, 0, 0))
    i = int(np.argmin(np.abs(DEFAULT_X_GRID - 0.5)))
    assert DEFAULT_X_GRID[i] == 0.5
    assert diff[i] == pytest.approx(2.5, abs=1e-4)


def test_drift_limit_examples():
    assert drift_limit((-20, 20), 0.5) == 0
    assert drift_limit((20, 20), 0.25) == pytest.approx(3.75, abs=1e-15)
    for g in [(3, -7), ScaledGame(1, 2, 3, 4)]:
        assert drift_limit(g, 0.0) == 0 and drift_limit(g, 1.0) == 0


def test_divergence_is_minus_drift_derivative():
    x = np.linspace(0.01, 0.99, 50)
    h = 1e-6
    for g in [(-20, 20), (5, 3), (0, -8)]:
        deriv = (drift_limit(g, x + h) - drift_limit(g, x - h)) / (2 * h)
        np.testing.assert_allclose(drift_divergence_limit(g, x), -deriv, atol=1e-6)


@settings(max_examples=10, deadline=None)
@given(scaled)
def test_extrapolated_limits_match_closed_forms(game):
    tot, diff = selection_limits(game)
    scale = max(1.0, abs(game.alpha), abs(game.beta))
    np.testing.assert_allclose(diff, drift_limit(game, DEFAULT_X_GRID), atol=1e-4 * scale)
    np.testing.assert_allclose(tot, drift_divergence_limit(game, DEFAULT_X_GRID), atol=1e-2)


def test_extrapolation_residual_is_third_order():
    game = ScaledGame(2, -3, 1, 0).finite_payoffs(512)
    r = [expand_kernel(game, N_list=[n, 2 * n, 4 * n, 8 * n]).residual for n in (32, 64)]
    assert r[1] < r[0] / 6


@settings(max_examples=5, deadline=None)
@given(scaled)
def test_kernel_variants_share_the_limit_combinations(game):
    a, b = expand_kernel(game), expand_kernel(game, variant="birth-first")
    for order in (0, 1):
        np.testing.assert_allclose(a.total(order), b.total(order), atol=1e-4)
        np.testing.assert_allclose(a.difference(order), b.difference(order), atol=1e-4)
    da, db = selection_limits(game)[1], selection_limits(game, variant="birth-first")[1]
    np.testing.assert_allclose(da, db, atol=1e-4)


def test_x_grid_must_be_interior():
    with pytest.raises(ValueError):
        expand_kernel(ScaledGame(0, 0, 0, 0), x_grid=[0.0, 0.5])


@pytest.mark.parametrize(
    "nu, dt, expected",
    [(1, 2, "drift-diffusion"), (0.5, 1.5, "drift-only"), (1, 3, "degenerate"), (0.5, 2, "degenerate")],
)
def test_classify_balance(nu, dt, expected):
    assert classify_balance(nu, dt) == expected


def test_classify_balance_rejects_nonpositive():
    with pytest.raises(ValueError):
        classify_balance(0, 2)
