"""Mixed-strategy populations: the ESS theta* = beta/(beta-alpha) dominates.

Also lists draws where the flow reading and the fixation comparison differ.
"""

import numpy as np

from moran_limits import MixedGame, dominates, dominates_by_fixation, mixed_fixation

alpha, beta = -20.0, 20.0
star = beta / (beta - alpha)
p0 = lambda x: 6 * x * (1 - x)
for th in (0.1, 0.3, 0.7, 0.9):
    pi = mixed_fixation(p0, MixedGame(star, th, alpha, beta))
    print(f"theta*={star:.2f} vs theta={th:.1f}: fixation of theta* strategists {pi:.4f}, dominates {dominates(th, star, alpha, beta)}")

rng = np.random.default_rng(0)
for _ in range(20):
    t1, t2 = rng.uniform(0, 1, 2)
    a, b = rng.uniform(-20, 20, 2)
    flow, fix = dominates(t1, t2, a, b), dominates_by_fixation(t1, t2, a, b)
    if flow != fix:
        print(f"disagreement: theta=({t1:.3f}, {t2:.3f}) alpha={a:.2f} beta={b:.2f} flow={flow} fixation={fix}")
