"""Composite Gauss-Legendre rules used for densities and fixation integrals."""

import numpy as np

_GL = {}


def _rule(order):
    if order not in _GL:
        _GL[order] = np.polynomial.legendre.leggauss(order)
    return _GL[order]


def gauss_panels(f, lo, hi, panels, order=16):
    """Integrate a vectorised ``f`` over [lo, hi] with ``panels`` equal Gauss-Legendre panels."""
    g, w = _rule(order)
    edges = np.linspace(lo, hi, int(panels) + 1)
    a, b = edges[:-1, None], edges[1:, None]
    x = (a + b) / 2 + (b - a) / 2 * g
    return float(np.sum((b - a) / 2 * w * f(x)))


def cell_averages(f, cells, order=8):
    """Averages of ``f`` over the uniform cells of (0, 1)."""
    g, w = _rule(order)
    h = 1.0 / cells
    centres = (np.arange(cells) + 0.5) * h
    x = centres[:, None] + h / 2 * g
    return (w * f(x)).sum(axis=1) / 2
