import numpy as np
import pytest

from pqsm import (
    ConfigError,
    DepthWeightParams,
    ExternalFileBackend,
    FlatBackend,
    PointCloud,
    ProjectionConfig,
    SaliencyField,
    SpectralResidualBackend,
    attach_saliency,
    bounding_box,
    build_saliency_field,
    depth_enhance,
    make_backend,
    project,
    saliency_2d,
    visible_points,
)
from pqsm.images import raster_to_image, write_pgm16
from cloudgen import random_box_cloud


def _grid_cloud(res=32, block=None):
    """One point per pixel of the +z view (plus two bbox anchor points)."""
    xs, ys = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")
    positions = np.column_stack(
        [xs.ravel() + 0.5, ys.ravel() + 0.5, np.zeros(res * res)]
    )
    colors = np.full((res * res, 3), 128)
    if block is not None:
        u0, v0, size = block
        inside = (
            (xs.ravel() >= u0) & (xs.ravel() < u0 + size)
            & (ys.ravel() >= v0) & (ys.ravel() < v0 + size)
        )
        colors[inside] = (255, 40, 40)
    positions = np.vstack([positions, [[0, 0, 0], [res, res, 0]]])
    colors = np.vstack([colors, [[128, 128, 128]] * 2])
    return PointCloud(positions, colors)


class TestSaliency2d:
    def test_flat_backend_ones_on_occupied(self, rng):
        cloud = random_box_cloud(rng, 50, scale=1.0)
        views = project(cloud, ProjectionConfig(resolution=16))
        for view in views:
            sal = saliency_2d(view, FlatBackend())
            occupied = view.point_index >= 0
            assert (sal[occupied] == 1.0).all()
            assert (sal[~occupied] == 0.0).all()

    def test_normalized_range(self, rng):
        cloud = random_box_cloud(rng, 800, scale=2.0)
        views = project(cloud, ProjectionConfig(resolution=32))
        for idx, view in enumerate(views):
            sal = saliency_2d(view, SpectralResidualBackend(), idx)
            occupied = view.point_index >= 0
            vals = sal[occupied]
            assert vals.min() == 0.0
            assert vals.max() == 1.0
            assert (sal[~occupied] == 0.0).all()

    def test_constant_backend_normalizes_to_one(self, rng):
        class ConstantBackend:
            def raster(self, view, view_index=0):
                return np.full(view.depth.shape, 0.37)

        cloud = random_box_cloud(rng, 200, scale=1.0)
        view = project(cloud, ProjectionConfig(resolution=16))[0]
        sal = saliency_2d(view, ConstantBackend())
        occupied = view.point_index >= 0
        assert (sal[occupied] == 1.0).all()
        assert (sal[~occupied] == 0.0).all()

    def test_bright_block_is_salient(self):
        cloud = _grid_cloud(res=48, block=(20, 20, 7))
        view = project(cloud, ProjectionConfig(resolution=48))[4]
        sal = saliency_2d(view, SpectralResidualBackend(), 4)
        block = sal[20:27, 20:27]
        background = np.delete(sal.ravel(), [u * 48 + v for u in range(20, 27) for v in range(20, 27)])
        assert block.mean() > 3 * background.mean()

    def test_deterministic(self, rng):
        cloud = random_box_cloud(rng, 500, scale=1.0)
        view = project(cloud, ProjectionConfig(resolution=32))[0]
        a = saliency_2d(view, SpectralResidualBackend(), 0)
        b = saliency_2d(view, SpectralResidualBackend(), 0)
        assert np.array_equal(a, b)


class TestDepthEnhance:
    def _view_with_depths(self, depths):
        depths = np.asarray(depths, dtype=np.float64).reshape(1, -1)
        from pqsm import ProjectedView

        n = depths.shape[1]
        return ProjectedView(
            axis=2,
            sign=1,
            texture=np.zeros((1, n, 3), dtype=np.uint8),
            depth=depths,
            point_index=np.arange(n, dtype=np.int64).reshape(1, n),
            pixel_size=1.0,
            n_points=n,
        )

    def test_weights_sum_to_one_with_flat_saliency(self, rng):
        for _ in range(10):
            depths = 10.0 + rng.random(20) * 5
            view = self._view_with_depths(depths)
            enhanced = depth_enhance(np.ones((1, 20)), view, DepthWeightParams(0.7))
            assert enhanced.sum() == pytest.approx(1.0, abs=1e-12)

    def test_equal_depths_halve_exactly(self):
        view = self._view_with_depths([10.0, 10.0])
        enhanced = depth_enhance(np.ones((1, 2)), view, DepthWeightParams(3.0))
        assert enhanced[0, 0] == 0.5
        assert enhanced[0, 1] == 0.5

    def test_depth_gap_of_sigma(self):
        # depths d and d + sigma: weights are sigmoid(1) and 1 - sigmoid(1)
        view = self._view_with_depths([10.0, 10.0 + 0.8])
        enhanced = depth_enhance(np.ones((1, 2)), view, DepthWeightParams(0.8))
        assert enhanced[0, 0] == pytest.approx(0.7310585786300049, abs=1e-5)
        assert enhanced[0, 1] == pytest.approx(0.2689414213699951, abs=1e-5)

    def test_common_depth_shift_bit_identical(self, rng):
        depths = np.array([10.0, 10.5, 12.25, 11.125, 10.0625])
        saliency = np.array([[0.1, 0.9, 0.4, 1.0, 0.3]])
        view_a = self._view_with_depths(depths)
        view_b = self._view_with_depths(depths + 100.0)
        params = DepthWeightParams(0.5)
        a = depth_enhance(saliency, view_a, params)
        b = depth_enhance(saliency, view_b, params)
        assert np.array_equal(a, b)

    def test_nearer_gets_more_weight(self):
        view = self._view_with_depths([10.0, 11.0, 12.0])
        enhanced = depth_enhance(np.ones((1, 3)), view, DepthWeightParams(1.0))
        assert enhanced[0, 0] > enhanced[0, 1] > enhanced[0, 2]

    def test_bad_sigma_rejected(self):
        view = self._view_with_depths([10.0])
        with pytest.raises(ConfigError):
            depth_enhance(np.ones((1, 1)), view, 0.0)


class TestDepthWeightParams:
    def test_sigma_from_bbox(self, rng):
        cloud = random_box_cloud(rng, 100, scale=7.0)
        params = DepthWeightParams.for_cloud(cloud)
        assert params.sigma_s == pytest.approx(bounding_box(cloud).max_side / 10, rel=1e-12)

    def test_degenerate_cloud_falls_back(self):
        cloud = PointCloud([[1.0, 1.0, 1.0]], [[5, 5, 5]])
        assert DepthWeightParams.for_cloud(cloud).sigma_s == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            DepthWeightParams(0.0)


class TestSaliencyField:
    def test_validation(self):
        with pytest.raises(ValueError):
            SaliencyField(np.array([0.1, -0.2]))
        with pytest.raises(ValueError):
            SaliencyField(np.array([0.1, np.nan]))
        field = SaliencyField(np.array([0.25, 0.5]))
        assert len(field) == 2

    def test_build_matches_manual_reprojection(self, rng):
        cloud = random_box_cloud(rng, 300, scale=2.0)
        config = ProjectionConfig(resolution=24)
        backend = FlatBackend()
        params = DepthWeightParams.for_cloud(cloud)
        views = project(cloud, config)
        field = build_saliency_field(cloud, config, backend, params, views=views)

        enhanced = [
            depth_enhance(saliency_2d(view, backend, i), view, params)
            for i, view in enumerate(views)
        ]
        mapping = visible_points(views)
        for pid, entries in mapping.items():
            if entries:
                expect = sum(enhanced[vi][u, v] for vi, (u, v) in entries) / len(entries)
                assert field.values[pid] == pytest.approx(expect, rel=1e-13, abs=1e-18)

    def test_occluded_point_inherits_nearest_value(self):
        # point 1 is coincident with point 0 and loses every z-buffer tie
        positions = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [3.0, 3.0, 3.0]]
        cloud = PointCloud(positions, [[10, 10, 10]] * 3)
        field = build_saliency_field(cloud, ProjectionConfig(resolution=16), FlatBackend())
        assert field.values[1] == field.values[0]

    def test_translation_invariance(self, rng):
        cloud = random_box_cloud(rng, 400, scale=1.5)
        moved = PointCloud(cloud.positions + np.array([13.0, -4.0, 2.5]), cloud.colors)
        config = ProjectionConfig(resolution=24)
        a = build_saliency_field(cloud, config, FlatBackend())
        b = build_saliency_field(moved, config, FlatBackend())
        np.testing.assert_allclose(a.values, b.values, rtol=1e-11, atol=1e-14)

    def test_deterministic(self, rng):
        cloud = random_box_cloud(rng, 500, scale=1.0)
        config = ProjectionConfig(resolution=32)
        a = build_saliency_field(cloud, config, SpectralResidualBackend())
        b = build_saliency_field(cloud, config, SpectralResidualBackend())
        assert np.array_equal(a.values, b.values)

    def test_values_nonnegative_bounded(self, rng):
        cloud = random_box_cloud(rng, 600, scale=3.0)
        field = build_saliency_field(cloud, ProjectionConfig(resolution=32))
        assert (field.values >= 0).all()
        assert (field.values <= 1.0).all()


class TestAttachSaliency:
    def test_round_trip(self, rng):
        cloud = random_box_cloud(rng, 50)
        field = build_saliency_field(cloud, ProjectionConfig(resolution=16), FlatBackend())
        attached = attach_saliency(cloud, field)
        assert np.array_equal(attached.saliency, field.values)

    def test_length_mismatch(self, rng):
        cloud = random_box_cloud(rng, 50)
        with pytest.raises(ValueError):
            attach_saliency(cloud, SaliencyField(np.ones(49)))


class TestBackends:
    def test_make_backend(self, tmp_path):
        assert isinstance(make_backend("spectral-residual"), SpectralResidualBackend)
        assert isinstance(make_backend("flat"), FlatBackend)
        backend = make_backend(f"file:{tmp_path}")
        assert isinstance(backend, ExternalFileBackend)
        with pytest.raises(ConfigError):
            make_backend("file:")
        with pytest.raises(ConfigError):
            make_backend("magic")

    def test_external_file_round_trip(self, rng, tmp_path):
        # 16-bit PGM quantizes to 1/65535, so the round trip is only exact to
        # the quantization floor, not to float precision
        cloud = random_box_cloud(rng, 400, scale=2.0)
        config = ProjectionConfig(resolution=24)
        views = project(cloud, config)
        backend = SpectralResidualBackend()
        for idx, view in enumerate(views):
            write_pgm16(tmp_path / f"{idx}.pgm", raster_to_image(saliency_2d(view, backend, idx)))

        direct = build_saliency_field(cloud, config, backend)
        reloaded = build_saliency_field(cloud, config, ExternalFileBackend(tmp_path))
        np.testing.assert_allclose(reloaded.values, direct.values, atol=2e-4)

    def test_external_file_missing(self, rng, tmp_path):
        cloud = random_box_cloud(rng, 30)
        with pytest.raises(FileNotFoundError):
            build_saliency_field(cloud, ProjectionConfig(resolution=16), ExternalFileBackend(tmp_path))

    def test_external_file_shape_mismatch(self, rng, tmp_path):
        cloud = random_box_cloud(rng, 30)
        for idx in range(6):
            write_pgm16(tmp_path / f"{idx}.pgm", np.zeros((4, 4)))
        with pytest.raises(ConfigError, match="shape"):
            build_saliency_field(cloud, ProjectionConfig(resolution=16), ExternalFileBackend(tmp_path))
