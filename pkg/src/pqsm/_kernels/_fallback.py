"""Pure NumPy/SciPy implementation of the per-point neighborhood statistics.

Same contract as the compiled kernel. Roughly 10-50x slower and, because it
materializes every (center, neighbor) pair of a chunk at once, it processes
centers in chunks to bound memory.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

_CHUNK = 20000


def local_stats(centers, center_vals, points, point_vals, radius):
    """Neighborhood statistics of `points` around each center.

    For center i with value row c_i, over the neighbors j of the closed ball
    ||p_j - x_i|| <= radius:

        out[i, 0] = neighbor count
        out[i, 1] = mean distance
        out[i, 2] = population variance of the distances
        out[i, 3 + ch] = mean of |point_vals[j, ch] - center_vals[i, ch]|

    Rows with no neighbors are all zero. Accumulation order is fixed by point
    index, so results are reproducible run to run.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    center_vals = np.ascontiguousarray(center_vals, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    point_vals = np.ascontiguousarray(point_vals, dtype=np.float64)
    if not np.isfinite(radius) or radius < 0:
        raise ValueError(f"radius must be finite and >= 0, got {radius}")

    n = centers.shape[0]
    n_channels = center_vals.shape[1]
    out = np.zeros((n, 3 + n_channels), dtype=np.float64)
    tree = cKDTree(points)

    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        _stats_chunk(
            tree, points, point_vals, centers[start:stop], center_vals[start:stop],
            radius, out[start:stop],
        )
    return out


def _stats_chunk(tree, points, point_vals, centers, center_vals, radius, out):
    lists = tree.query_ball_point(centers, radius, return_sorted=True)
    counts = np.fromiter((len(lst) for lst in lists), dtype=np.int64, count=len(lists))
    out[:, 0] = counts
    total = int(counts.sum())
    if total == 0:
        return

    flat = np.fromiter(
        (j for lst in lists for j in lst), dtype=np.intp, count=total
    )
    owner = np.repeat(np.arange(len(centers)), counts)
    denom = np.maximum(counts, 1).astype(np.float64)

    delta = points[flat] - centers[owner]
    dist = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    mean_dist = np.bincount(owner, weights=dist, minlength=len(centers)) / denom
    dev2 = (dist - mean_dist[owner]) ** 2
    out[:, 1] = mean_dist
    out[:, 2] = np.bincount(owner, weights=dev2, minlength=len(centers)) / denom
    for ch in range(point_vals.shape[1]):
        absdiff = np.abs(point_vals[flat, ch] - center_vals[owner, ch])
        out[:, 3 + ch] = np.bincount(owner, weights=absdiff, minlength=len(centers)) / denom
