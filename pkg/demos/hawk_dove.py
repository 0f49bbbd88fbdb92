"""Hawk-Dove game (alpha, beta) = (-20, 20): mass piles up at x* = 1/2.

Prints the boundary masses, the interior peak location and the slow
decay rate set by the principal eigenvalue.
"""

import numpy as np

from moran_limits import DensityField, evolve_complete, fixation_probability, spectral_gap

alpha, beta, cells = -20.0, 20.0, 512
p0 = lambda x: 20 * x**3 * (1 - x)
f0 = DensityField.from_density(p0, cells)
times = [0.1, 0.5, 1.0, 5.0, 20.0, 60.0]
_, snaps = evolve_complete(f0, alpha, beta, times[-1], record=times)
print(f"lambda0 = {spectral_gap(alpha, beta, cells):.6f}, pi1 = {fixation_probability(p0, alpha, beta):.6f}")
for s in snaps:
    print(f"t={s.t:6.1f}  a={s.a:.4f}  b={s.b:.4f}  interior={s.interior_mass:.4f}  peak at x={s.x[np.argmax(s.q)]:.4f}")
