"""Moran chain against its continuum limit for the game (2, 6, 5, 1).

Prints the L1 distance and the worst fixation error for N = 100..800
and the observed convergence order.
"""

from moran_limits.experiments import ExperimentConfig, discrete_vs_pde, fitted_order

cfg = ExperimentConfig(experiment="discrete-vs-pde").resolved()
rows, _, _ = discrete_vs_pde(cfg)
print(f"{'N':>5} {'L1 error':>10} {'fixation error':>15}")
for N, l1, fix, *_ in rows:
    print(f"{N:5d} {l1:10.3e} {fix:15.3e}")
print(f"observed order {fitted_order([r[0] for r in rows], [r[1] for r in rows]):.2f}")
