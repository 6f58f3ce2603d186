"""Depth-enhanced 3D saliency fields from multi-view projections.

Per view, a 2D saliency map is produced by a pluggable backend and min-max
normalized over the occupied pixels. Each occupied pixel is then re-weighted
by its depth: nearer pixels get exponentially more weight,

    enhanced[p] = exp(-d_p / sigma_s) / sum_q exp(-d_q / sigma_s) * s[p],

with the sum running over the occupied pixels of that view. A point's 3D
saliency is the mean of its enhanced values over the views where it is
visible; points visible nowhere inherit the value of their nearest visible
neighbor.

Backends: a compact frequency-domain model (default) that reads conspicuity
from the deviation of the log-amplitude spectrum from its local average, a
flat backend (uniform saliency over occupied pixels), and an external-file
backend that loads precomputed per-view rasters, e.g. maps exported from a
learned saliency model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .cloud import PointCloud, bounding_box
from .errors import ConfigError
from .images import image_to_raster, read_pgm
from .projection import ProjectedView, ProjectionConfig, project


@dataclass(frozen=True)
class SpectralResidualBackend:
    """Frequency-domain 2D saliency at a small working resolution.

    The texture is converted to grayscale, downscaled so its longest side is
    `working_side`, and transformed with a 2D FFT. The residual of the
    log-amplitude spectrum against its `average_kernel` box average is
    recombined with the original phase; the squared magnitude of the inverse
    transform, blurred with a Gaussian of `blur_sigma`, is upsampled back to
    the view resolution.
    """

    working_side: int = 64
    average_kernel: int = 3
    blur_sigma: float = 2.5

    kind = "spectral-residual"

    def raster(self, view: ProjectedView, view_index: int = 0) -> np.ndarray:
        gray = view.texture.astype(np.float64) @ np.array([0.299, 0.587, 0.114]) / 255.0
        w, h = gray.shape
        longest = max(w, h)
        if longest > self.working_side:
            scale = self.working_side / longest
            small_shape = (max(1, round(w * scale)), max(1, round(h * scale)))
            small = _resize_bilinear(gray, small_shape)
        else:
            small = gray

        spectrum = np.fft.fft2(small)
        log_amplitude = np.log(np.abs(spectrum) + 1e-12)
        residual = log_amplitude - ndimage.uniform_filter(
            log_amplitude, size=self.average_kernel, mode="nearest"
        )
        recombined = np.exp(residual) * np.exp(1j * np.angle(spectrum))
        sal = np.abs(np.fft.ifft2(recombined)) ** 2
        sal = ndimage.gaussian_filter(sal, sigma=self.blur_sigma, mode="nearest")
        if sal.shape != (w, h):
            sal = _resize_bilinear(sal, (w, h))
        return sal


@dataclass(frozen=True)
class FlatBackend:
    """Uniform saliency: 1 on occupied pixels, 0 elsewhere."""

    kind = "flat"

    def raster(self, view: ProjectedView, view_index: int = 0) -> np.ndarray:
        return (view.point_index >= 0).astype(np.float64)


@dataclass(frozen=True)
class ExternalFileBackend:
    """Per-view saliency rasters loaded from `directory`/<view index>.pgm.

    Images use the top-row-first convention of the view dump command, so maps
    written by ``pqsm saliency --dump-views`` (or by any external tool that
    follows it) can be fed back unchanged.
    """

    directory: str | Path

    kind = "external-file"

    def raster(self, view: ProjectedView, view_index: int = 0) -> np.ndarray:
        path = Path(self.directory) / f"{view_index}.pgm"
        if not path.exists():
            raise FileNotFoundError(f"saliency map not found: {path}")
        raster = image_to_raster(read_pgm(path))
        if raster.shape != view.point_index.shape:
            raise ConfigError(
                f"{path}: saliency map shape {raster.shape[::-1]} does not match "
                f"view shape {view.point_index.shape[::-1]} (height x width)"
            )
        return raster


def make_backend(spec: str):
    """Backend from a CLI-style spec: 'spectral-residual', 'flat', 'file:<dir>'."""
    if spec == "spectral-residual":
        return SpectralResidualBackend()
    if spec == "flat":
        return FlatBackend()
    if spec.startswith("file:"):
        directory = spec[len("file:"):]
        if not directory:
            raise ConfigError("file: backend needs a directory, e.g. file:views/")
        return ExternalFileBackend(directory)
    raise ConfigError(
        f"unknown saliency backend {spec!r} (expected spectral-residual, flat, or file:<dir>)"
    )


def _resize_bilinear(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resample to `shape`, aligning pixel centers."""
    w_out, h_out = shape
    w_in, h_in = img.shape
    if (w_in, h_in) == (w_out, h_out):
        return img.copy()

    def axis_coords(n_in, n_out):
        x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        lo = np.clip(np.floor(x).astype(np.int64), 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = np.clip(x - lo, 0.0, 1.0)
        return lo, hi, frac

    x0, x1, fx = axis_coords(w_in, w_out)
    y0, y1, fy = axis_coords(h_in, h_out)
    top = img[np.ix_(x0, y0)] * (1 - fy) + img[np.ix_(x0, y1)] * fy
    bottom = img[np.ix_(x1, y0)] * (1 - fy) + img[np.ix_(x1, y1)] * fy
    return top * (1 - fx[:, None]) + bottom * fx[:, None]


def saliency_2d(view: ProjectedView, backend=None, view_index: int = 0) -> np.ndarray:
    """Normalized 2D saliency for one view.

    The backend raster is min-max normalized over the occupied pixels so the
    occupied range is exactly [0, 1]; a constant raster maps to 1 everywhere
    occupied. Empty pixels are always 0.
    """
    if backend is None:
        backend = SpectralResidualBackend()
    occupied = view.point_index >= 0
    out = np.zeros(view.point_index.shape, dtype=np.float64)
    if not occupied.any():
        return out
    raw = backend.raster(view, view_index)
    if raw.shape != out.shape:
        raise ConfigError(
            f"backend returned shape {raw.shape}, view has shape {out.shape}"
        )
    vals = raw[occupied].astype(np.float64)
    if not np.isfinite(vals).all():
        raise ConfigError("backend returned non-finite saliency values")
    lo = vals.min()
    hi = vals.max()
    if hi > lo:
        out[occupied] = (vals - lo) / (hi - lo)
    else:
        out[occupied] = 1.0
    return out


@dataclass(frozen=True)
class DepthWeightParams:
    """Scale of the exponential depth weighting."""

    sigma_s: float

    def __post_init__(self):
        if not np.isfinite(self.sigma_s) or self.sigma_s <= 0:
            raise ConfigError(f"sigma_s must be a positive finite number, got {self.sigma_s}")

    @classmethod
    def for_cloud(cls, cloud: PointCloud) -> "DepthWeightParams":
        """sigma_s = (longest bounding-box side) / 10; 1.0 for a degenerate
        box, where all depths coincide and the scale is irrelevant."""
        side = bounding_box(cloud).max_side
        return cls(side / 10.0 if side > 0 else 1.0)


def depth_enhance(
    saliency_map: np.ndarray, view: ProjectedView, params: DepthWeightParams
) -> np.ndarray:
    """Depth-weighted saliency for one view (see module docstring).

    The exponentials are computed on depths shifted by the per-view minimum;
    the weight ratio is unchanged and the computation cannot underflow for
    deep scenes. Values of `saliency_map` outside the occupied mask are
    ignored. The result is no longer normalized to [0, 1].
    """
    sigma = params.sigma_s if isinstance(params, DepthWeightParams) else float(params)
    if not np.isfinite(sigma) or sigma <= 0:
        raise ConfigError(f"sigma_s must be a positive finite number, got {sigma}")
    occupied = view.point_index >= 0
    out = np.zeros(view.point_index.shape, dtype=np.float64)
    if not occupied.any():
        return out
    depths = view.depth[occupied]
    weights = np.exp(-(depths - depths.min()) / sigma)
    out[occupied] = (weights / weights.sum()) * saliency_map[occupied]
    return out


@dataclass(frozen=True)
class SaliencyField:
    """Per-point saliency values; finite, >= 0, one per point."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"saliency field must be 1-d, got shape {values.shape}")
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValueError("saliency field values must be finite and >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


def build_saliency_field(
    cloud: PointCloud,
    config: ProjectionConfig | None = None,
    backend=None,
    params: DepthWeightParams | None = None,
    views: list[ProjectedView] | None = None,
) -> SaliencyField:
    """Project the cloud, run the backend per view, depth-enhance, and average
    each point's enhanced saliency over the views where it is visible.

    Points visible in no view (fully occluded at the given resolution) take
    the value of the nearest visible point; exact distance ties resolve to the
    lowest point index. Pass `views` to reuse an existing projection.
    """
    if backend is None:
        backend = SpectralResidualBackend()
    if params is None:
        params = DepthWeightParams.for_cloud(cloud)
    if views is None:
        views = project(cloud, config)

    n = cloud.n_points
    sums = np.zeros(n, dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    for view_index, view in enumerate(views):
        sal = saliency_2d(view, backend, view_index)
        enhanced = depth_enhance(sal, view, params)
        pids = view.point_index[view.point_index >= 0]
        vals = enhanced[view.point_index >= 0]
        sums += np.bincount(pids, weights=vals, minlength=n)
        counts += np.bincount(pids, minlength=n)

    values = np.zeros(n, dtype=np.float64)
    seen = counts > 0
    values[seen] = sums[seen] / counts[seen]

    if not seen.all():
        if not seen.any():
            raise ConfigError("no point is visible in any view; cannot build a saliency field")
        values[~seen] = _nearest_fill(cloud.positions, seen, values)
    return SaliencyField(values)


def _nearest_fill(positions, seen, values):
    """Value of the nearest seen point for every unseen point (ties -> lowest
    point index, up to a 1-ulp-scale distance guard)."""
    from scipy.spatial import cKDTree

    donors = np.nonzero(seen)[0]
    tree = cKDTree(positions[donors])
    missing = positions[~seen]
    dist, nearest = tree.query(missing, k=1)
    filled = np.empty(len(missing), dtype=np.float64)
    for row, (pos, d) in enumerate(zip(missing, dist)):
        ties = tree.query_ball_point(pos, d * (1.0 + 1e-12) if d > 0 else 0.0)
        filled[row] = values[donors[min(ties)]] if ties else values[donors[nearest[row]]]
    return filled


def attach_saliency(cloud: PointCloud, field: SaliencyField) -> PointCloud:
    """Cloud with `field` as its saliency channel (lengths must match)."""
    if len(field) != cloud.n_points:
        raise ValueError(
            f"field has {len(field)} values for a cloud of {cloud.n_points} points"
        )
    return cloud.with_saliency(field.values)
