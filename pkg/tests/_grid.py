"""Exhaustive search over lattice points of the probability simplex."""
import numpy as np


def _coarse(n, step):
    """All points of the simplex whose coordinates are multiples of ``step``."""
    k = int(round(1 / step))
    pts = np.zeros((1, 0), dtype=int)
    for _ in range(n - 1):
        used = pts.sum(axis=1)
        reps = k - used + 1
        head = np.repeat(pts, reps, axis=0)
        tail = np.concatenate([np.arange(r) for r in reps])
        pts = np.column_stack([head, tail])
    pts = np.column_stack([pts, k - pts.sum(axis=1)])
    return pts * step


def _box(center, step, radius):
    n = len(center)
    r = int(round(radius / step))
    base = np.round(center / step).astype(int)
    offs = np.arange(-r, r + 1)
    grids = np.stack(np.meshgrid(*[base[i] + offs for i in range(n - 1)], indexing="ij"), -1)
    head = grids.reshape(-1, n - 1)
    k = int(round(1 / step))
    last = k - head.sum(axis=1)
    pts = np.column_stack([head, last])
    pts = pts[(pts >= 0).all(axis=1)]
    return pts * step


def grid_search(objective, n, levels=((0.02, None), (0.004, 0.04), (0.001, 0.008)),
                maximize=False, keep=10):
    """Best objective on the step-0.001 simplex lattice near the optimum.

    The first level enumerates the whole lattice of its step; each further
    level enumerates its finer lattice inside boxes of the given half-width
    around the ``keep`` best points of the previous level.
    """
    sign = -1.0 if maximize else 1.0
    cands = None
    for step, radius in levels:
        if radius is None:
            pts = _coarse(n, step)
        else:
            pts = np.unique(np.concatenate([_box(c, step, radius) for c in cands]).round(12), axis=0)
        vals = sign * objective(pts)
        order = np.argsort(vals, kind="stable")[:keep]
        cands = pts[order]
    return float(objective(cands[:1])[0]), cands[0]
