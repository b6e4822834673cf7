"""One-dimensional scan plus golden-section refinement."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


def golden_section_min(f: Callable[[float], float], a: float, b: float, rel_tol: float = 1e-9,
                       abs_tol: float = 1e-15, max_iter: int = 500) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on [a, b].

    Returns ``(x, f(x))`` where ``x`` is the best point evaluated; the bracket is
    shrunk until its width is below ``rel_tol*|x| + abs_tol``.
    """
    a, b = min(a, b), max(a, b)
    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = min((f(a), a), (f(b), b), (fc, c), (fd, d))
    for _ in range(max_iter):
        if b - a <= rel_tol * abs(0.5 * (a + b)) + abs_tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * (b - a)
            fc = f(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            best = min(best, (fd, d))
    return best[1], best[0]


def golden_section_max(f: Callable[[float], float], a: float, b: float, **kw) -> tuple[float, float]:
    x, v = golden_section_min(lambda t: -f(t), a, b, **kw)
    return x, -v


def scan_refine_min(f: Callable[[float], float], grid, **kw) -> tuple[float, float]:
    """Coarse scan over ``grid`` then golden-section between the neighbours of
    the best grid point.  ``f`` may return ``inf`` where it is undefined."""
    grid = np.asarray(grid, dtype=float)
    values = np.array([f(float(t)) for t in grid])
    if not np.any(np.isfinite(values)):
        raise ValueError("objective is not finite anywhere on the scan grid")
    i = int(np.nanargmin(np.where(np.isfinite(values), values, np.inf)))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    x, v = golden_section_min(f, lo, hi, **kw)
    if values[i] < v:
        return float(grid[i]), float(values[i])
    return x, v
