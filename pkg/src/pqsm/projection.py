"""Orthographic multi-view projection with z-buffering.

Six axis-aligned views are rendered in the fixed order +x, -x, +y, -y, +z,
-z. For the view along axis ``a`` the raster axes (u, v) are the remaining
two coordinate axes in increasing order (x < y < z), and rasters are indexed
``[u, v]`` with shape (W, H). The pixel grid spans the bounding-box face with
square pixels of side s = (longest bounding-box side) / resolution; points on
the far boundary fall into the last pixel.

Per-pixel occlusion keeps the point closest to the viewer; exact depth ties
resolve to the lower point index. Depth is measured from the cloud's extreme
plane facing the viewer plus a constant positive offset, so the nearest point
of the cloud sits exactly at the offset in every view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, bounding_box
from .errors import ConfigError

# (projection axis, sign of the viewing direction) for the six views
VIEW_DIRECTIONS = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))

_INPLANE_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


@dataclass(frozen=True)
class ProjectionConfig:
    """Rendering parameters for the view stack.

    `views` is fixed at 6 (axis-aligned orthographic directions); the flag
    exists so alternative view counts can be added without breaking callers.
    """

    views: int = 6
    resolution: int = 512
    depth_offset: float = 10.0

    def __post_init__(self):
        if self.views != 6:
            raise ConfigError(f"only 6 axis-aligned views are supported, got {self.views}")
        if int(self.resolution) != self.resolution or self.resolution < 16:
            raise ConfigError(f"resolution must be an integer >= 16, got {self.resolution}")
        if not np.isfinite(self.depth_offset) or self.depth_offset <= 0:
            raise ConfigError(f"depth_offset must be > 0, got {self.depth_offset}")


@dataclass
class ProjectedView:
    """One orthographic view.

    texture      (W, H, 3) uint8, black where no point projects
    depth        (W, H) float64, 0 where empty
    point_index  (W, H) int64 index of the visible point, -1 where empty
    """

    axis: int
    sign: int
    texture: np.ndarray
    depth: np.ndarray
    point_index: np.ndarray
    pixel_size: float
    n_points: int

    @property
    def occupied(self) -> np.ndarray:
        return self.point_index >= 0

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.point_index >= 0))

    @property
    def shape(self):
        return self.point_index.shape


def _grid_dim(extent: float, pixel_size: float) -> int:
    """Number of pixels covering `extent`; ceil with a one-ulp-scale guard so
    the longest side maps to exactly `resolution` pixels despite rounding."""
    if extent <= 0:
        return 1
    return max(1, int(np.ceil((extent / pixel_size) * (1.0 - 1e-12))))


def project(cloud: PointCloud, config: ProjectionConfig | None = None) -> list[ProjectedView]:
    """Render the six orthographic views of `cloud`."""
    if config is None:
        config = ProjectionConfig()
    pos = cloud.positions
    n = cloud.n_points
    box = bounding_box(cloud)
    side = box.max_side
    pixel_size = side / config.resolution if side > 0 else 1.0

    views = []
    order_tiebreak = np.arange(n)
    for axis, sign in VIEW_DIRECTIONS:
        ua, va = _INPLANE_AXES[axis]
        w = _grid_dim(float(box.side_lengths[ua]), pixel_size)
        h = _grid_dim(float(box.side_lengths[va]), pixel_size)

        iu = np.floor((pos[:, ua] - box.min_corner[ua]) / pixel_size).astype(np.int64)
        iv = np.floor((pos[:, va] - box.min_corner[va]) / pixel_size).astype(np.int64)
        np.clip(iu, 0, w - 1, out=iu)
        np.clip(iv, 0, h - 1, out=iv)

        if sign > 0:
            depth = config.depth_offset + (box.max_corner[axis] - pos[:, axis])
        else:
            depth = config.depth_offset + (pos[:, axis] - box.min_corner[axis])

        # winner per pixel: smallest depth, then smallest point index
        flat = iu * h + iv
        order = np.lexsort((order_tiebreak, depth, flat))
        sorted_flat = flat[order]
        first = np.ones(n, dtype=bool)
        first[1:] = sorted_flat[1:] != sorted_flat[:-1]
        winners = order[first]
        cells = sorted_flat[first]

        point_index = np.full(w * h, -1, dtype=np.int64)
        point_index[cells] = winners
        depth_map = np.zeros(w * h, dtype=np.float64)
        depth_map[cells] = depth[winners]
        texture = np.zeros((w * h, 3), dtype=np.uint8)
        texture[cells] = cloud.colors[winners]

        views.append(
            ProjectedView(
                axis=axis,
                sign=sign,
                texture=texture.reshape(w, h, 3),
                depth=depth_map.reshape(w, h),
                point_index=point_index.reshape(w, h),
                pixel_size=pixel_size,
                n_points=n,
            )
        )
    return views


def visible_points(views: list[ProjectedView]) -> dict[int, list[tuple[int, tuple[int, int]]]]:
    """Map each point index to the (view index, (u, v)) pixels where it won
    the z-buffer. Points occluded everywhere map to an empty list."""
    n = views[0].n_points
    mapping: dict[int, list[tuple[int, tuple[int, int]]]] = {i: [] for i in range(n)}
    for view_idx, view in enumerate(views):
        us, vs = np.nonzero(view.point_index >= 0)
        pids = view.point_index[us, vs]
        for u, v, p in zip(us.tolist(), vs.tolist(), pids.tolist()):
            mapping[p].append((view_idx, (u, v)))
    return mapping
