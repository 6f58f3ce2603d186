"""Local similarity descriptors and saliency-weighted pooling.

For every reference point x_i, neighborhoods are taken in both clouds as the
closed ball of a shared support radius r (the mean distance to the 10th
nearest distorted point). Over each neighborhood, four local statistics are
computed: mean and population variance of the distances to x_i, and the mean
absolute luminance and saliency differences against x_i's own values — the
distorted side is also centered on x_i, so the descriptors react to what the
distortion moved into or out of x_i's surroundings. Statistic pairs are
compared with the bounded ratio

    sim(a, b, t) = (2ab + t) / (a^2 + b^2 + t),

which is 1 exactly when a == b. Per point, F1 multiplies the geometry mean
and variance similarities, F2 is the luminance similarity, F3 the saliency
similarity; the enabled features multiply into SIM_i. The cloud-level score
is the saliency-weighted mean of SIM_i (SAW) or the plain mean (AVE).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernel_backend, local_stats
from .cloud import PointCloud
from .errors import ConfigError, PoolingError
from .neighborhood import KNN_DEFAULT, estimate_radius
from .projection import ProjectionConfig, project
from .saliency import (
    DepthWeightParams,
    SaliencyField,
    SpectralResidualBackend,
    build_saliency_field,
)

T1_DEFAULT = 1e-3
T2_DEFAULT = 1e-14
LUMA_WEIGHTS = (0.257, 0.504, 0.098)
LUMA_OFFSET = 16.0
FEATURES = ("F1", "F2", "F3")
POOLINGS = ("SAW", "AVE")


@dataclass(frozen=True)
class MetricConfig:
    """Stabilizers, enabled features, and pooling mode.

    `features` may be given in any order/case; it is normalized to the
    canonical ("F1", "F2", "F3") order.
    """

    t1: float = T1_DEFAULT
    t2: float = T2_DEFAULT
    features: tuple = FEATURES
    pooling: str = "SAW"

    def __post_init__(self):
        if not np.isfinite(self.t1) or self.t1 <= 0:
            raise ConfigError(f"t1 must be > 0, got {self.t1}")
        if not np.isfinite(self.t2) or self.t2 <= 0:
            raise ConfigError(f"t2 must be > 0, got {self.t2}")
        wanted = {str(f).upper() for f in self.features}
        unknown = wanted - set(FEATURES)
        if unknown:
            raise ConfigError(f"unknown features {sorted(unknown)}; valid: {FEATURES}")
        if not wanted:
            raise ConfigError("at least one feature must be enabled")
        object.__setattr__(self, "features", tuple(f for f in FEATURES if f in wanted))
        pooling = str(self.pooling).upper()
        if pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        object.__setattr__(self, "pooling", pooling)


def luminance(color):
    """Luminance of 8-bit RGB: 0.257 R + 0.504 G + 0.098 B + 16.

    Accepts a single (3,) color or an (n, 3) array; pure white maps to
    235.045 and pure black to 16.
    """
    arr = np.asarray(color, dtype=np.float64)
    return arr @ np.asarray(LUMA_WEIGHTS) + LUMA_OFFSET


def geometry_stats(center, neighbors):
    """Mean and population variance (divide by count, no sqrt) of the
    distances from `center` to each neighbor; (0.0, 0.0) for no neighbors."""
    neighbors = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    if neighbors.shape[0] == 0:
        return 0.0, 0.0
    dist = np.linalg.norm(neighbors - np.asarray(center, dtype=np.float64), axis=1)
    mean = dist.mean()
    return float(mean), float(((dist - mean) ** 2).mean())


def contrast_stat(center_value, neighbor_values):
    """Mean absolute difference of neighbor values against the center's own
    value; 0.0 for no neighbors."""
    neighbor_values = np.asarray(neighbor_values, dtype=np.float64)
    if neighbor_values.size == 0:
        return 0.0
    return float(np.abs(neighbor_values - float(center_value)).mean())


def similarity_term(a, b, t):
    """(2ab + t) / (a^2 + b^2 + t); 1 iff a == b, symmetric, in (0, 1] for
    non-negative inputs and t > 0."""
    return (2.0 * a * b + t) / (a * a + b * b + t)


def _feature_terms(stats_ref, stats_dist, config):
    """F1/F2/F3 and their product over enabled features.

    `stats_*` columns are [count, mean_dist, var_dist, mean_lum_diff,
    mean_sal_diff] as produced by the kernels; works on scalars rows or full
    (n, 5) arrays.
    """
    f1 = similarity_term(stats_ref[..., 1], stats_dist[..., 1], config.t1) * similarity_term(
        stats_ref[..., 2], stats_dist[..., 2], config.t1
    )
    f2 = similarity_term(stats_ref[..., 3], stats_dist[..., 3], config.t1)
    f3 = similarity_term(stats_ref[..., 4], stats_dist[..., 4], config.t2)
    sim = np.ones_like(f1)
    for name, values in (("F1", f1), ("F2", f2), ("F3", f3)):
        if name in config.features:
            sim = sim * values
    return f1, f2, f3, sim


def point_features(
    center_position,
    center_luminance,
    center_saliency,
    ref_positions,
    ref_luminances,
    ref_saliencies,
    dist_positions,
    dist_luminances,
    dist_saliencies,
    config: MetricConfig | None = None,
):
    """Descriptors for a single reference point given its two neighborhoods.

    The `ref_*` arrays hold x_i's neighbors in the reference cloud (x_i
    itself is normally among them) and the `dist_*` arrays its neighbors in
    the distorted cloud; both sides are centered on the reference point's own
    position/luminance/saliency. Returns a dict with the raw statistics and
    the similarity terms; `sim` is the product over enabled features.
    """
    if config is None:
        config = MetricConfig()
    mu_ref, var_ref = geometry_stats(center_position, ref_positions)
    mu_dist, var_dist = geometry_stats(center_position, dist_positions)
    lum_ref = contrast_stat(center_luminance, ref_luminances)
    lum_dist = contrast_stat(center_luminance, dist_luminances)
    sal_ref = contrast_stat(center_saliency, ref_saliencies)
    sal_dist = contrast_stat(center_saliency, dist_saliencies)
    stats_ref = np.array([len(np.atleast_1d(ref_luminances)), mu_ref, var_ref, lum_ref, sal_ref])
    stats_dist = np.array(
        [len(np.atleast_1d(dist_luminances)), mu_dist, var_dist, lum_dist, sal_dist]
    )
    f1, f2, f3, sim = _feature_terms(stats_ref, stats_dist, config)
    return {
        "f1": float(f1),
        "f2": float(f2),
        "f3": float(f3),
        "sim": float(sim),
        "mu_geo_ref": mu_ref,
        "var_geo_ref": var_ref,
        "mu_geo_dist": mu_dist,
        "var_geo_dist": var_dist,
        "mu_lum_ref": lum_ref,
        "mu_lum_dist": lum_dist,
        "mu_sal_ref": sal_ref,
        "mu_sal_dist": sal_dist,
    }


def pool(sim_values, ref_saliency=None, pooling: str = "SAW") -> float:
    """Pool per-point similarities into one score.

    AVE is the plain mean. SAW weights each point by its reference-cloud
    saliency: sum(sim * s) / sum(s). The two sums share the same accumulation
    pattern, so identical clouds pool to exactly 1.0.
    """
    sim_values = np.asarray(sim_values, dtype=np.float64)
    if sim_values.ndim != 1 or sim_values.size == 0:
        raise ValueError("sim_values must be a non-empty 1-d array")
    pooling = str(pooling).upper()
    if pooling == "AVE":
        return float(sim_values.mean())
    if pooling != "SAW":
        raise ConfigError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    if ref_saliency is None:
        raise PoolingError("SAW pooling needs reference saliency weights")
    weights = np.asarray(ref_saliency, dtype=np.float64)
    if weights.shape != sim_values.shape:
        raise ValueError(f"weights shape {weights.shape} != sim shape {sim_values.shape}")
    total = np.sum(weights)
    if not total > 0:
        raise PoolingError(
            "saliency weights sum to zero; SAW is undefined for this cloud - use AVE pooling"
        )
    return float(np.sum(sim_values * weights) / total)


@dataclass
class PointScores:
    """Per-point descriptor table for one scored pair (all arrays length n)."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    sim: np.ndarray
    neighbor_count_ref: np.ndarray
    neighbor_count_dist: np.ndarray
    mu_geo_ref: np.ndarray
    var_geo_ref: np.ndarray
    mu_lum_ref: np.ndarray
    mu_sal_ref: np.ndarray
    mu_geo_dist: np.ndarray
    var_geo_dist: np.ndarray
    mu_lum_dist: np.ndarray
    mu_sal_dist: np.ndarray

    def __len__(self):
        return self.sim.shape[0]


@dataclass
class ScoreReport:
    """Result of scoring one (reference, distorted) pair.

    `timings` holds wall-clock stage durations in seconds; it is diagnostic
    metadata and is excluded from the deterministic text/JSON renderings so
    identical inputs produce byte-identical output.
    """

    q: float
    point_scores: PointScores
    radius: float
    knn_k: int
    config: MetricConfig
    projection: ProjectionConfig
    saliency_backend: str
    saliency_source_ref: str
    saliency_source_dist: str
    sigma_s_ref: float | None
    sigma_s_dist: float | None
    n_ref: int
    n_dist: int
    kernel: str
    timings: dict = field(default_factory=dict)

    def summary_lines(self) -> list[str]:
        sigma_ref = "-" if self.sigma_s_ref is None else repr(self.sigma_s_ref)
        sigma_dist = "-" if self.sigma_s_dist is None else repr(self.sigma_s_dist)
        return [
            f"q: {self.q!r}",
            f"pooling: {self.config.pooling}",
            f"features: {','.join(self.config.features)}",
            f"t1: {self.config.t1!r}",
            f"t2: {self.config.t2!r}",
            f"radius: {self.radius!r}",
            f"knn_k: {self.knn_k}",
            f"views: {self.projection.views}",
            f"resolution: {self.projection.resolution}",
            f"depth_offset: {self.projection.depth_offset!r}",
            f"saliency_backend: {self.saliency_backend}",
            f"saliency_source_ref: {self.saliency_source_ref}",
            f"saliency_source_dist: {self.saliency_source_dist}",
            f"sigma_s_ref: {sigma_ref}",
            f"sigma_s_dist: {sigma_dist}",
            f"n_ref: {self.n_ref}",
            f"n_dist: {self.n_dist}",
            f"kernel: {self.kernel}",
        ]

    def to_text(self, include_points: bool = False) -> str:
        lines = self.summary_lines()
        if include_points:
            ps = self.point_scores
            lines.append("")
            lines.append(
                "index f1 f2 f3 sim count_ref count_dist "
                "mu_geo_ref var_geo_ref mu_lum_ref mu_sal_ref "
                "mu_geo_dist var_geo_dist mu_lum_dist mu_sal_dist"
            )
            for i in range(len(ps)):
                lines.append(
                    f"{i} {ps.f1[i]!r} {ps.f2[i]!r} {ps.f3[i]!r} {ps.sim[i]!r} "
                    f"{int(ps.neighbor_count_ref[i])} {int(ps.neighbor_count_dist[i])} "
                    f"{ps.mu_geo_ref[i]!r} {ps.var_geo_ref[i]!r} "
                    f"{ps.mu_lum_ref[i]!r} {ps.mu_sal_ref[i]!r} "
                    f"{ps.mu_geo_dist[i]!r} {ps.var_geo_dist[i]!r} "
                    f"{ps.mu_lum_dist[i]!r} {ps.mu_sal_dist[i]!r}"
                )
        return "\n".join(lines) + "\n"

    def to_json_dict(self, include_points: bool = False) -> dict:
        doc = {
            "q": self.q,
            "radius": self.radius,
            "knn_k": self.knn_k,
            "t1": self.config.t1,
            "t2": self.config.t2,
            "features": list(self.config.features),
            "pooling": self.config.pooling,
            "views": self.projection.views,
            "resolution": self.projection.resolution,
            "depth_offset": self.projection.depth_offset,
            "saliency_backend": self.saliency_backend,
            "saliency_source_ref": self.saliency_source_ref,
            "saliency_source_dist": self.saliency_source_dist,
            "sigma_s_ref": self.sigma_s_ref,
            "sigma_s_dist": self.sigma_s_dist,
            "n_ref": self.n_ref,
            "n_dist": self.n_dist,
            "kernel": self.kernel,
        }
        if include_points:
            ps = self.point_scores
            doc["points"] = {
                "f1": ps.f1.tolist(),
                "f2": ps.f2.tolist(),
                "f3": ps.f3.tolist(),
                "sim": ps.sim.tolist(),
                "count_ref": ps.neighbor_count_ref.tolist(),
                "count_dist": ps.neighbor_count_dist.tolist(),
            }
        return doc


def _resolve_saliency(cloud, provided, needed, config, backend):
    """Saliency values for one cloud: explicit argument > channel attached to
    the cloud > computed from scratch; skipped entirely when not needed."""
    if not needed:
        return None, "skipped", None
    if provided is not None:
        values = provided.values if isinstance(provided, SaliencyField) else None
        if values is None:
            values = SaliencyField(np.asarray(provided, dtype=np.float64)).values
        if values.shape != (cloud.n_points,):
            raise ValueError(
                f"saliency override has {values.shape[0]} values for "
                f"{cloud.n_points} points"
            )
        return values, "provided", None
    if cloud.saliency is not None:
        return cloud.saliency, "attached", None
    params = DepthWeightParams.for_cloud(cloud)
    field_ = build_saliency_field(cloud, config, backend, params)
    return field_.values, "computed", params.sigma_s


def compute_pqsm(
    reference: PointCloud,
    distorted: PointCloud,
    projection_config: ProjectionConfig | None = None,
    saliency_backend=None,
    config: MetricConfig | None = None,
    knn_k: int = KNN_DEFAULT,
    ref_saliency=None,
    dist_saliency=None,
) -> ScoreReport:
    """Score `distorted` against `reference`; higher q means more similar.

    Saliency fields are built per cloud only when used (F3 enabled, or SAW
    pooling, which needs the reference field); `ref_saliency`/`dist_saliency`
    override the computed fields, and a saliency channel attached to a cloud
    is used before computing from scratch.
    """
    if projection_config is None:
        projection_config = ProjectionConfig()
    if config is None:
        config = MetricConfig()
    if saliency_backend is None:
        saliency_backend = SpectralResidualBackend()

    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    f3_on = "F3" in config.features
    need_ref_sal = f3_on or config.pooling == "SAW"
    sal_ref, source_ref, sigma_ref = _resolve_saliency(
        reference, ref_saliency, need_ref_sal, projection_config, saliency_backend
    )
    sal_dist, source_dist, sigma_dist = _resolve_saliency(
        distorted, dist_saliency, f3_on, projection_config, saliency_backend
    )
    timings["saliency"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    radius = estimate_radius(reference, distorted, k=knn_k)
    timings["radius"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    lum_ref = luminance(reference.colors)
    lum_dist = luminance(distorted.colors)
    zeros_ref = np.zeros(reference.n_points)
    vals_ref = np.column_stack([lum_ref, sal_ref if sal_ref is not None else zeros_ref])
    vals_dist = np.column_stack(
        [lum_dist, sal_dist if sal_dist is not None else np.zeros(distorted.n_points)]
    )
    stats_ref = local_stats(
        reference.positions, vals_ref, reference.positions, vals_ref, radius
    )
    stats_dist = local_stats(
        reference.positions, vals_ref, distorted.positions, vals_dist, radius
    )
    timings["stats"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    f1, f2, f3, sim = _feature_terms(stats_ref, stats_dist, config)
    q = pool(sim, sal_ref if config.pooling == "SAW" else None, config.pooling)
    timings["pooling"] = time.perf_counter() - t0

    scores = PointScores(
        f1=f1,
        f2=f2,
        f3=f3,
        sim=sim,
        neighbor_count_ref=stats_ref[:, 0].astype(np.int64),
        neighbor_count_dist=stats_dist[:, 0].astype(np.int64),
        mu_geo_ref=stats_ref[:, 1],
        var_geo_ref=stats_ref[:, 2],
        mu_lum_ref=stats_ref[:, 3],
        mu_sal_ref=stats_ref[:, 4],
        mu_geo_dist=stats_dist[:, 1],
        var_geo_dist=stats_dist[:, 2],
        mu_lum_dist=stats_dist[:, 3],
        mu_sal_dist=stats_dist[:, 4],
    )
    return ScoreReport(
        q=q,
        point_scores=scores,
        radius=radius,
        knn_k=knn_k,
        config=config,
        projection=projection_config,
        saliency_backend=getattr(saliency_backend, "kind", type(saliency_backend).__name__),
        saliency_source_ref=source_ref,
        saliency_source_dist=source_dist,
        sigma_s_ref=sigma_ref,
        sigma_s_dist=sigma_dist,
        n_ref=reference.n_points,
        n_dist=distorted.n_points,
        kernel=kernel_backend(),
        timings=timings,
    )
