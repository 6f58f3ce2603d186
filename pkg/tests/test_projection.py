import math

import numpy as np
import pytest

from pqsm import ConfigError, PointCloud, ProjectionConfig, project, visible_points
from cloudgen import random_box_cloud


class TestProjectionConfig:
    def test_defaults(self):
        config = ProjectionConfig()
        assert config.views == 6
        assert config.resolution == 512
        assert config.depth_offset == 10.0

    def test_validation(self):
        with pytest.raises(ConfigError):
            ProjectionConfig(views=4)
        with pytest.raises(ConfigError):
            ProjectionConfig(resolution=8)
        with pytest.raises(ConfigError):
            ProjectionConfig(depth_offset=0.0)
        with pytest.raises(ConfigError):
            ProjectionConfig(depth_offset=-1.0)


class TestProject:
    def test_view_order_and_shapes(self, rng):
        positions = rng.random((200, 3)) * [4.0, 2.0, 1.0]
        cloud = PointCloud(positions, rng.integers(0, 256, (200, 3)))
        views = project(cloud, ProjectionConfig(resolution=64))
        assert [(v.axis, v.sign) for v in views] == [
            (0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1),
        ]
        # pixel size comes from the longest side; shorter axes need fewer pixels
        extents = positions.max(axis=0) - positions.min(axis=0)
        expected_pixel = extents.max() / 64
        for view in views:
            w, h = view.shape
            assert view.texture.shape == (w, h, 3)
            assert view.depth.shape == (w, h)
            assert view.pixel_size == pytest.approx(expected_pixel, rel=1e-12)
        assert views[2].shape == (64, math.ceil(extents[2] / expected_pixel))
        assert views[0].shape == (
            math.ceil(extents[1] / expected_pixel),
            math.ceil(extents[2] / expected_pixel),
        )

    def test_zbuffer_matches_brute_force(self, rng):
        cloud = random_box_cloud(rng, 2000, scale=3.0)
        config = ProjectionConfig(resolution=32)
        views = project(cloud, config)
        positions = cloud.positions
        mins = positions.min(axis=0)
        maxs = positions.max(axis=0)
        pixel = (maxs - mins).max() / 32
        inplane = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
        for view in views:
            ua, va = inplane[view.axis]
            w, h = view.shape
            expect = {}
            for idx in range(len(positions)):
                iu = min(max(int(math.floor((positions[idx, ua] - mins[ua]) / pixel)), 0), w - 1)
                iv = min(max(int(math.floor((positions[idx, va] - mins[va]) / pixel)), 0), h - 1)
                if view.sign > 0:
                    depth = 10.0 + (maxs[view.axis] - positions[idx, view.axis])
                else:
                    depth = 10.0 + (positions[idx, view.axis] - mins[view.axis])
                key = (iu, iv)
                if key not in expect or (depth, idx) < expect[key]:
                    expect[key] = (depth, idx)
            got = {
                (u, v): view.point_index[u, v]
                for u, v in zip(*np.nonzero(view.point_index >= 0))
            }
            assert got == {key: idx for key, (d, idx) in expect.items()}

    def test_depth_tie_resolves_to_lower_index(self):
        # three coincident points: index 1 added before 0 in depth order via
        # equal depths; winner must be the lowest index
        positions = [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5], [0.5, 0.5, 0.5], [2.0, 2.0, 2.0]]
        cloud = PointCloud(positions, [[10, 0, 0], [0, 10, 0], [0, 0, 10], [1, 1, 1]])
        views = project(cloud, ProjectionConfig(resolution=16))
        for view in views:
            occupied_ids = view.point_index[view.point_index >= 0]
            assert 0 in occupied_ids
            assert 1 not in occupied_ids and 2 not in occupied_ids

    def test_nearest_point_depth_equals_offset(self, rng):
        cloud = random_box_cloud(rng, 300, scale=2.0)
        views = project(cloud, ProjectionConfig(resolution=32, depth_offset=10.0))
        positions = cloud.positions
        mins = positions.min(axis=0)
        maxs = positions.max(axis=0)
        for view in views:
            extreme = maxs[view.axis] if view.sign > 0 else mins[view.axis]
            idx = int(np.argmax(positions[:, view.axis]) if view.sign > 0
                      else np.argmin(positions[:, view.axis]))
            occupied = view.point_index >= 0
            assert view.depth[occupied].min() == 10.0
            # the extreme point is never occluded along its own axis
            winners = view.point_index[occupied]
            assert idx in winners
            assert positions[idx, view.axis] == extreme

    def test_occupancy_bounds(self, rng):
        cloud = random_box_cloud(rng, 1500, scale=1.0)
        views = project(cloud, ProjectionConfig(resolution=16))
        total = sum(v.occupied_count for v in views)
        assert total <= 6 * cloud.n_points
        for view in views:
            w, h = view.shape
            assert view.occupied_count <= min(cloud.n_points, w * h)
            assert view.occupied_count >= 1

    def test_empty_pixels_are_marked(self, rng):
        cloud = random_box_cloud(rng, 10, scale=1.0)
        views = project(cloud, ProjectionConfig(resolution=64))
        for view in views:
            empty = view.point_index < 0
            assert (view.depth[empty] == 0).all()
            assert (view.texture[empty] == 0).all()

    def test_single_point_cloud(self):
        cloud = PointCloud([[1.0, 2.0, 3.0]], [[200, 100, 50]])
        views = project(cloud, ProjectionConfig(resolution=32))
        for view in views:
            assert view.shape == (1, 1)
            assert view.point_index[0, 0] == 0
            assert view.depth[0, 0] == 10.0
            assert tuple(view.texture[0, 0]) == (200, 100, 50)

    def test_planar_cloud(self, rng):
        # degenerate thickness: the axis-facing views collapse to a line/point
        # grid but projection must not fail
        n = 100
        positions = np.column_stack([rng.random(n), rng.random(n), np.zeros(n)])
        cloud = PointCloud(positions, rng.integers(0, 256, (n, 3)))
        views = project(cloud, ProjectionConfig(resolution=16))
        assert views[4].shape == (16, 16)
        assert views[0].shape[0] == 16 and views[0].shape[1] == 1

    def test_max_corner_point_lands_in_last_pixel(self):
        positions = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]
        cloud = PointCloud(positions, [[0, 0, 0], [255, 255, 255]])
        views = project(cloud, ProjectionConfig(resolution=16))
        for view in views:
            assert view.shape == (16, 16)
            assert view.point_index[15, 15] == 1
            assert view.point_index[0, 0] == 0


class TestVisiblePoints:
    def test_consistent_with_point_index(self, rng):
        cloud = random_box_cloud(rng, 400, scale=1.0)
        views = project(cloud, ProjectionConfig(resolution=24))
        mapping = visible_points(views)
        assert set(mapping) == set(range(cloud.n_points))
        for pid, entries in mapping.items():
            for view_idx, (u, v) in entries:
                assert views[view_idx].point_index[u, v] == pid
        total = sum(len(entries) for entries in mapping.values())
        assert total == sum(v.occupied_count for v in views)

    def test_isolated_point_visible_everywhere(self):
        cloud = PointCloud([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]], [[1, 1, 1]] * 2)
        mapping = visible_points(project(cloud, ProjectionConfig(resolution=16)))
        assert len(mapping[0]) == 6
        assert len(mapping[1]) == 6
