"""Kimura backward equation relaxes to (1 - e^(-g x)) / (1 - e^(-g))."""

import numpy as np

from moran_limits import solve_kimura

g = 20.0
for cells in (128, 256, 512, 1024):
    sol = solve_kimura(lambda x: np.asarray(x, dtype=float), g, 5.0, cells=cells)
    exact = (1 - np.exp(-g * sol.x)) / (1 - np.exp(-g))
    print(f"cells={cells:5d}  max error {np.abs(sol.f - exact).max():.2e}")
