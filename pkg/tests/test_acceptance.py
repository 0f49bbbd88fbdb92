"""Acceptance suite: one PASS/FAIL line per criterion.

Run with pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np

from moran_limits.experiments import INITIAL_DATA, ExperimentConfig, discrete_vs_pde, fitted_order, strong_selection
from moran_limits.forward import (
    DensityField,
    GridOperator,
    evolve_complete,
    fixation_probability,
    psi_profile,
    spectral_gap,
)
from moran_limits.kimura import adjointness_residual, solve_kimura
from moran_limits.mixed import MixedGame, dominates, dominates_by_fixation, mixed_fixation
from moran_limits.moran import ChainState, PayoffMatrix, build_transition_kernel, evolve, fixation_vector
from moran_limits.replicator import HyperbolicSolution, ReplicatorFlow, lyapunov_moment, solve_nodiffusion

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover
    ACCEPTANCE_LINES = []

cubic = INITIAL_DATA["cubic"]
parabola = INITIAL_DATA["parabola"]


def verdict(number, title, checks):
    """Record and print the criterion line, then assert every sub-check."""
    ok = all(passed for _, passed in checks)
    detail = "; ".join(f"{text}{'' if passed else ' [fail]'}" for text, passed in checks)
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_neutral_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for N in range(2, 201):
        F = fixation_vector(build_transition_kernel(PayoffMatrix(1, 1, 1, 1), N)).F
        worst = max(worst, float(np.abs(F - np.arange(N + 1) / N).max()))
    dt = time.perf_counter() - t0
    verdict(1, "neutral exactness", [(f"max |F-n/N| = {worst:.1e} <= 1e-12", worst <= 1e-12), (f"runtime {dt:.2f} s < 1 s", dt < 1)])


def _brute_force(n, N, game):
    from fractions import Fraction

    A, B, C, D = game.as_tuple()
    types = [1] * n + [0] * (N - n)
    up = down = Fraction(0)
    for victim in range(N):
        alive = [i for i in range(N) if i != victim]
        fit = {}
        for i in alive:
            others = [types[j] for j in alive if j != i]
            row = (A, B) if types[i] else (C, D)
            fit[i] = sum(row[0] if o else row[1] for o in others) / Fraction(len(others)) if others else Fraction(1)
        total = sum(fit.values())
        for i in alive:
            p = fit[i] / total / N
            if types[i] and not types[victim]:
                up += p
            elif types[victim] and not types[i]:
                down += p
    return down, 1 - up - down, up


def test_criterion_02_small_n_brute_force():
    from fractions import Fraction

    from moran_limits.moran import transition_probabilities

    rng = np.random.default_rng(0)
    games = [PayoffMatrix(1, 1, 1, 1), PayoffMatrix(1, 3, 4, 2)]
    games += [PayoffMatrix(*(Fraction(int(v), 7) for v in rng.integers(1, 30, 4))) for _ in range(10)]
    mismatches = 0
    cases = 0
    for game in games:
        for N in range(2, 7):
            for n in range(1, N):
                cases += 1
                mismatches += transition_probabilities(Fraction(n), N, game) != _brute_force(n, N, game)
    verdict(2, "small-N brute-force equivalence", [(f"{cases - mismatches}/{cases} exact matches", mismatches == 0)])


def test_criterion_03_invariant_conservation():
    rng = np.random.default_rng(1)
    worst_mass = worst_f = 0.0
    for _ in range(5):
        A, D = rng.uniform(0.5, 2, 2)
        game = PayoffMatrix(A, D + rng.uniform(0.1, 1), A + rng.uniform(0.1, 1), D)
        assert game.hawk_dove
        k = build_transition_kernel(game, 100)
        F = fixation_vector(k).F
        P = rng.random(101)
        s = ChainState(100, P / P.sum())
        end = evolve(s, k, 10_000)
        worst_mass = max(worst_mass, abs(end.P.sum() - s.P.sum()))
        worst_f = max(worst_f, abs(F @ end.P - F @ s.P))
    verdict(
        3,
        "invariant conservation",
        [(f"<1,P> drift {worst_mass:.1e} <= 1e-10", worst_mass <= 1e-10), (f"<F,P> drift {worst_f:.1e} <= 1e-10", worst_f <= 1e-10)],
    )


def test_criterion_04_discrete_to_continuum():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="discrete-vs-pde").resolved()
    rows, _, _ = discrete_vs_pde(cfg)
    dt = time.perf_counter() - t0
    Ns = [r[0] for r in rows]
    l1 = [r[1] for r in rows]
    order = fitted_order(Ns, l1)
    fix_ok = all(r[2] <= 2 / r[0] for r in rows)
    verdict(
        4,
        "discrete to continuum",
        [
            ("L1 " + ", ".join(f"{e:.2e}" for e in l1) + " decreasing", all(a > b for a, b in zip(l1, l1[1:]))),
            (f"order {order:.2f} >= 0.7", order >= 0.7),
            ("fixation errors " + ", ".join(f"{r[2]:.1e}" for r in rows) + " <= 2/N", fix_ok),
            (f"runtime {dt:.1f} s < 120 s", dt < 120),
        ],
    )


def test_criterion_05_pde_conservation():
    checks = []
    for (alpha, beta), p0 in [((-20, 20), cubic), ((20, 20), parabola), ((0, 0), parabola)]:
        prof = psi_profile(alpha, beta)
        drifts = []
        for cells in (512, 1024):
            f0 = DensityField.from_density(p0, cells)
            _, snaps = evolve_complete(f0, alpha, beta, 2.0, method="explicit", record=np.linspace(0.25, 2.0, 8))
            mass = max(abs(s.mass - f0.mass) for s in snaps)
            m0 = f0.moment(prof.psi)
            drift = max(abs(s.moment(prof.psi) - m0) for s in snaps)
            drifts.append(drift)
            checks.append((f"({alpha},{beta}) {cells} cells: mass {mass:.0e}", mass <= 1e-10))
            checks.append((f"psi drift {drift:.2e} <= 5dx^2", drift <= 5 / cells**2))
        if (alpha, beta) != (0, 0):
            ratio = drifts[0] / drifts[1]
            checks.append((f"refinement ratio {ratio:.2f} in [2.8, 5.2]", 2.8 <= ratio <= 5.2))
    verdict(5, "PDE conservation", checks)


def test_criterion_06_fixation_asymptotics():
    cells = 2048
    f0 = DensityField.from_density(cubic, cells)
    lam = spectral_gap(-20, 20, cells)
    # one extra time unit makes e^(-lam T) |q0|_1 strictly below 1e-6
    T = np.log(f0.interior_mass / 1e-6) / lam + 1.0
    bound = np.exp(-lam * T) * f0.interior_mass
    f = evolve_complete(f0, -20, 20, T)
    pi1 = fixation_probability(cubic, -20, 20)
    total = f.a + f.b
    verdict(
        6,
        "fixation asymptotics",
        [
            (f"T = {T:.1f}, e^(-lam T)|q0| = {bound:.2e} < 1e-6", bound < 1e-6),
            (f"|b(T) - pi1| = {abs(f.b - pi1):.1e} <= 1e-3", abs(f.b - pi1) <= 1e-3),
            (f"a+b = 1 - {1 - total:.2e} in [1-1e-6, 1]", 1 - 1e-6 <= total <= 1),
        ],
    )


def test_criterion_07_spectral_decay():
    checks = []
    cases = {(0, 0): (1, 4), (-20, 20): (3, 40), (0, 20): (1, 4), (20, 20): (1.5, 3), (5, -3): (1, 4)}
    for (alpha, beta), (t1, t2) in cases.items():
        times = np.linspace(t1, t2, 30)
        _, snaps = evolve_complete(DensityField.from_density(parabola, 512), alpha, beta, t2, record=times)
        l2 = [np.sqrt(np.sum(s.q**2) * s.dx) for s in snaps]
        rate = -np.polyfit(times, np.log(l2), 1)[0]
        lam = spectral_gap(alpha, beta, 512)
        rel = rate / lam - 1
        checks.append((f"({alpha},{beta}) fitted {rate:.4g} vs lam0 {lam:.4g} ({rel:+.1%})", abs(rel) <= 0.05))
    errs = [abs(spectral_gap(0, 0, c) - 2) for c in (128, 256, 512)]
    checks.append((f"neutral |lam0-2| = {errs[-1]:.1e} <= 4 dx^2", errs[-1] <= 4 / 512**2))
    checks.append((f"neutral refinement ratio {errs[1] / errs[2]:.2f} ~ 4", abs(errs[1] / errs[2] - 4) <= 1.2))
    verdict(7, "spectral decay", checks)


def test_criterion_08_kimura_stationary():
    g, cells = 20.0, 1024
    sol = solve_kimura(lambda x: np.asarray(x, dtype=float), g, 5.0, cells=cells)
    exact = (1 - np.exp(-g * sol.x)) / (1 - np.exp(-g))
    err = float(np.abs(sol.f - exact).max())
    rng = np.random.default_rng(2)
    D = np.polynomial.Polynomial([0, 1, -1])
    worst = 0.0
    for _ in range(50):
        fbar = D * np.polynomial.Polynomial(rng.uniform(-3, 3, rng.integers(1, 5)))
        q = np.polynomial.Polynomial(rng.uniform(-3, 3, rng.integers(1, 7)))
        alpha, beta = rng.uniform(-20, 20, 2)
        worst = max(worst, adjointness_residual(fbar, q, g), adjointness_residual(fbar, q, (alpha, beta)))
    verdict(
        8,
        "Kimura stationary",
        [(f"max error {err:.1e} <= 5dx^2 = {5 / cells**2:.1e}", err <= 5 / cells**2), (f"adjointness residual {worst:.1e} <= 1e-8", worst <= 1e-8)],
    )


def test_criterion_09_strong_selection():
    cfg = ExperimentConfig(experiment="strong-selection").resolved()
    rows, _, _ = strong_selection(cfg)
    dist = [r[1] for r in rows]
    dev = {r[0]: r[2] for r in rows}
    smallest = min(dev)
    verdict(
        9,
        "strong selection",
        [
            ("weighted L2 " + ", ".join(f"{d:.6g}" for d in dist) + " strictly decreasing", all(a > b for a, b in zip(dist, dist[1:]))),
            ("peak deviation (cells) " + ", ".join(f"eps={e}: {v:.2f}" for e, v in dev.items()), True),
            (f"tracking within one cell at eps={smallest}", dev[smallest] <= 1.0),
        ],
    )


def test_criterion_10_hawk_dove_asymptotics():
    sol = HyperbolicSolution(cubic, -20, 20, grid=np.linspace(0, 1, 5))
    m0 = lyapunov_moment(solve_nodiffusion(sol, 0.0), -20, 20)
    worst = max(abs(lyapunov_moment(solve_nodiffusion(sol, t), -20, 20) / (np.exp(-t) * m0) - 1) for t in np.linspace(0.1, 3, 30))
    cells = 256
    x = (np.arange(cells) + 0.5) / cells
    nd_peak = x[np.argmax(sol.cell_masses(3.0, cells))]
    eps = 0.05
    op = GridOperator(-20, 20, cells, eps)
    times = np.linspace(5, 30, 26)
    _, snaps = evolve_complete(DensityField.from_density(cubic, cells), -20, 20, 30.0, eps=eps, method="explicit", record=times)
    peaks = np.array([s.x[np.argmax(s.q)] for s in snaps])
    # exact log-derivative of |q|_1: boundary outflux over interior mass
    rates = np.array([(op.to_a * s.q[0] + op.to_b * s.q[-1]) * s.dx / s.interior_mass for s in snaps])
    lam = spectral_gap(-20, 20, cells, eps=eps)
    rel = float(np.abs(rates[-10:] / lam - 1).max())
    verdict(
        10,
        "Hawk-Dove asymptotics",
        [
            (f"Lyapunov moment vs e^-t max rel dev {worst:.1e} <= 1%", worst <= 0.01),
            (f"nodiffusion peak {nd_peak:.4f} within a cell of 0.5", abs(nd_peak - 0.5) <= 1 / cells),
            (f"eps=0.05 peak max |x-0.5| = {np.abs(peaks - 0.5).max():.4f} <= dx", np.abs(peaks - 0.5).max() <= 1 / cells),
            (f"decay rate vs lam0(eps) = {lam:.3e}: rel dev {rel:.1e} <= 1%", rel <= 0.01),
        ],
    )


def test_criterion_11_mixed_strategies():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    neutral = max(
        abs(mixed_fixation(p, MixedGame(th, th, a, b)) - m)
        for p, m in [(parabola, 0.5), (cubic, 2 / 3), (INITIAL_DATA["uniform"], 0.5)]
        for th, a, b in [(0.3, -20, 20), (0.8, 5, 7)]
    )
    alpha, beta = -20.0, 20.0
    star = beta / (beta - alpha)
    ess = all(dominates(th, star, alpha, beta) and dominates_by_fixation(th, star, alpha, beta) for th in rng.uniform(0, 1, 10))
    draws = []
    for _ in range(20):
        t1, t2 = rng.uniform(0, 1, 2)
        a, b = rng.uniform(-20, 20, 2)
        draws.append((dominates(t1, t2, a, b), dominates_by_fixation(t1, t2, a, b), ReplicatorFlow(a, b).x_star, t1, t2))
    agree = sum(f == d for f, d, *_ in draws)
    between = all(xs is not None and min(t1, t2) < xs < max(t1, t2) for f, d, xs, t1, t2 in draws if f != d)
    dt = time.perf_counter() - t0
    verdict(
        11,
        "mixed strategies",
        [
            (f"theta1=theta2 gives mean, max dev {neutral:.1e}", neutral <= 1e-8),
            ("ESS theta* dominates 10 sampled strategists", ess),
            (f"flow/fixation agreement {agree}/20" + (" (every disagreement has x* between the strategists)" if between and agree < 20 else ""), agree == 20),
            (f"runtime {dt:.1f} s < 60 s", dt < 60),
        ],
    )


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
