"""Independent brute-force implementations used to cross-check the library.

Everything here deliberately avoids the library's code paths: per-pixel
point-in-polygon instead of scanline fill, dense-tensor IPF instead of
per-record raking, angle sweeps instead of hull-edge enumeration, plain
scans instead of vectorized searches.
"""

from __future__ import annotations

import math
from statistics import median

import numpy as np


def point_in_polygon(px: float, py: float, poly: np.ndarray) -> bool:
    """Even-odd ray cast toward +x with the half-open edge rule."""
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 <= py < y2) or (y2 <= py < y1):
            t = (py - y1) / (y2 - y1)
            cx = x1 + t * (x2 - x1)
            if px < cx:
                inside = not inside
    return inside


def rasterize_by_point_test(poly: np.ndarray, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=np.uint8)
    for r in range(height):
        for c in range(width):
            if point_in_polygon(c + 0.5, r + 0.5, poly):
                mask[r, c] = 1
    return mask


def min_rect_area_sweep(points: np.ndarray, step_deg: float = 0.1) -> float:
    """Minimum bounding-rectangle area over a dense grid of orientations."""
    pts = np.asarray(points, dtype=np.float64)
    best = math.inf
    for k in range(int(round(180.0 / step_deg))):
        theta = math.radians(k * step_deg)
        u = np.array([math.cos(theta), math.sin(theta)])
        v = np.array([-u[1], u[0]])
        pu = pts @ u
        pv = pts @ v
        best = min(best, (pu.max() - pu.min()) * (pv.max() - pv.min()))
    return best


def ipf_dense(
    assignments: list[np.ndarray],
    n_bins: list[int],
    n_records: int,
    tolerance: float,
    max_iterations: int,
) -> np.ndarray:
    """Classic IPF on the dense joint contingency tensor.

    Records sharing a cell share a weight, so the tensor walk and the
    per-record walk compute the same sequence; the code path is entirely
    different (dense tensor updates vs per-record multiplications).
    """
    shape = tuple(n_bins)
    counts = np.zeros(shape)
    cells = np.stack(assignments, axis=1)
    for row in cells:
        counts[tuple(row)] += 1
    table = counts / n_records  # uniform starting weights aggregate to cell frequencies
    for _ in range(max_iterations):
        for axis in range(len(shape)):
            other = tuple(a for a in range(len(shape)) if a != axis)
            marg = table.sum(axis=other)
            occupied = counts.sum(axis=other) > 0
            target = 1.0 / occupied.sum()
            factor = np.ones(shape[axis])
            factor[occupied] = target / marg[occupied]
            table = table * factor.reshape([-1 if a == axis else 1 for a in range(len(shape))])
        worst = 0.0
        for axis in range(len(shape)):
            other = tuple(a for a in range(len(shape)) if a != axis)
            marg = table.sum(axis=other)
            occupied = counts.sum(axis=other) > 0
            target = 1.0 / occupied.sum()
            worst = max(worst, float(np.abs(marg[occupied] - target).sum()))
        if worst <= tolerance:
            break
    weights = np.array([table[tuple(row)] / counts[tuple(row)] for row in cells])
    return weights / weights.sum()


def ipf_per_record(
    assignments: list[np.ndarray],
    n_bins: list[int],
    n_records: int,
    tolerance: float,
    max_iterations: int,
) -> np.ndarray:
    """Plain-python per-record IPF loop (dicts, no numpy vectorization)."""
    w = [1.0 / n_records] * n_records
    for _ in range(max_iterations):
        for bins, k in zip(assignments, n_bins):
            mass = [0.0] * k
            for i, b in enumerate(bins):
                mass[b] += w[i]
            occupied = [m > 0 for m in mass]
            target = 1.0 / sum(occupied)
            for i, b in enumerate(bins):
                if occupied[b]:
                    w[i] *= target / mass[b]
        worst = 0.0
        for bins, k in zip(assignments, n_bins):
            mass = [0.0] * k
            for i, b in enumerate(bins):
                mass[b] += w[i]
            occupied = [m > 0 for m in mass]
            target = 1.0 / sum(occupied)
            worst = max(worst, sum(abs(m - target) for m, occ in zip(mass, occupied) if occ))
        if worst <= tolerance:
            break
    total = sum(w)
    return np.array([x / total for x in w])


def empirical_quantile(values, q: float) -> float:
    """Sort-based linear-interpolation quantile."""
    vals = sorted(values)
    pos = q * (len(vals) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    frac = pos - lo
    return vals[lo] * (1 - frac) + vals[hi] * frac


def first_windowed_crossing(steps, losses, target: float, window: int):
    """Linear scan over every trailing window; first median <= target."""
    for i in range(len(losses)):
        lo = max(0, i - window + 1)
        if median(losses[lo : i + 1]) <= target:
            return steps[i]
    return None


def ls_slope(x, y) -> float:
    """Textbook least-squares slope."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    return float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())


def bisect_required_scale(predict, target: float, lo: float, hi: float, iters: int = 200) -> float:
    """Bisection on a monotone-decreasing forward model."""
    for _ in range(iters):
        mid = math.sqrt(lo * hi)  # geometric midpoint suits power laws
        if predict(mid) > target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
