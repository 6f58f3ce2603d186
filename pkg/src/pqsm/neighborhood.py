"""Exact spatial search over cloud positions.

The index wraps a kd-tree; all queries are exact (no approximation), so
results depend only on coordinates and the query parameters, never on build
order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import ConfigError

KNN_DEFAULT = 10


class SpatialIndex:
    """kd-tree over a fixed set of positions."""

    def __init__(self, positions):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {positions.shape}")
        self.positions = positions
        self.tree = cKDTree(positions)

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud.positions)


def ball_query(index: SpatialIndex, center, radius: float) -> np.ndarray:
    """Indices of all points with ||p - center|| <= radius (closed ball),
    in ascending index order. A point exactly on the boundary is included."""
    if not np.isfinite(radius) or radius < 0:
        raise ValueError(f"radius must be finite and >= 0, got {radius}")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    found = index.tree.query_ball_point(center, radius)
    return np.sort(np.asarray(found, dtype=np.int64))


def estimate_radius(reference: PointCloud, distorted: PointCloud, k: int = KNN_DEFAULT) -> float:
    """Support radius: the mean, over reference points, of the distance to
    the k-th nearest point of the distorted cloud.

    Neighbors are ranked 1..k by distance, so a distorted point coincident
    with the reference point counts as rank 1.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if distorted.n_points < k:
        raise ConfigError(
            f"radius estimation needs at least k={k} distorted points, "
            f"cloud has {distorted.n_points}"
        )
    tree = cKDTree(distorted.positions)
    dist, _ = tree.query(reference.positions, k=k)
    kth = dist[:, k - 1] if k > 1 else dist
    return float(kth.mean())


@dataclass(frozen=True)
class NeighborhoodContext:
    """Shared search state for scoring one cloud pair."""

    radius: float
    index_ref: SpatialIndex
    index_dist: SpatialIndex

    @classmethod
    def build(
        cls, reference: PointCloud, distorted: PointCloud, k: int = KNN_DEFAULT
    ) -> "NeighborhoodContext":
        radius = estimate_radius(reference, distorted, k)
        return cls(radius, build_index(reference), build_index(distorted))
