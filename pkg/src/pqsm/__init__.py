"""Saliency-weighted full-reference point cloud quality assessment.

The score of a distorted cloud against its reference combines local geometry,
color, and 3D-saliency similarity descriptors, pooled with saliency weights
derived from depth-enhanced multi-view projections. See ``compute_pqsm`` for
the end-to-end pipeline and the ``pqsm`` CLI for file-level workflows.
"""

from ._kernels import kernel_backend
from .cloud import BoundingBox, PointCloud, bounding_box, load_ply, save_ply
from .distortion import DistortionSpec
from .distortion import apply as apply_distortion
from .errors import (
    ColorlessCloudError,
    ConfigError,
    CorrelationError,
    FitError,
    ParseError,
    PlyParseError,
    PoolingError,
    PqsmError,
    TruncatedPlyError,
)
from .evaluation import (
    LogisticParams,
    fit_logistic,
    format_report,
    plcc,
    read_pairs_csv,
    rmse,
    srocc,
)
from .metric import (
    FEATURES,
    LUMA_OFFSET,
    LUMA_WEIGHTS,
    T1_DEFAULT,
    T2_DEFAULT,
    MetricConfig,
    PointScores,
    ScoreReport,
    compute_pqsm,
    contrast_stat,
    geometry_stats,
    luminance,
    point_features,
    pool,
    similarity_term,
)
from .neighborhood import (
    KNN_DEFAULT,
    NeighborhoodContext,
    SpatialIndex,
    ball_query,
    build_index,
    estimate_radius,
)
from .projection import VIEW_DIRECTIONS, ProjectedView, ProjectionConfig, project, visible_points
from .saliency import (
    DepthWeightParams,
    ExternalFileBackend,
    FlatBackend,
    SaliencyField,
    SpectralResidualBackend,
    attach_saliency,
    build_saliency_field,
    depth_enhance,
    make_backend,
    saliency_2d,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ColorlessCloudError",
    "ConfigError",
    "CorrelationError",
    "DepthWeightParams",
    "DistortionSpec",
    "ExternalFileBackend",
    "FEATURES",
    "FitError",
    "FlatBackend",
    "KNN_DEFAULT",
    "LUMA_OFFSET",
    "LUMA_WEIGHTS",
    "LogisticParams",
    "MetricConfig",
    "NeighborhoodContext",
    "ParseError",
    "PlyParseError",
    "PointCloud",
    "PointScores",
    "PoolingError",
    "PqsmError",
    "ProjectedView",
    "ProjectionConfig",
    "SaliencyField",
    "ScoreReport",
    "SpatialIndex",
    "SpectralResidualBackend",
    "T1_DEFAULT",
    "T2_DEFAULT",
    "TruncatedPlyError",
    "VIEW_DIRECTIONS",
    "apply_distortion",
    "attach_saliency",
    "ball_query",
    "bounding_box",
    "build_index",
    "build_saliency_field",
    "compute_pqsm",
    "contrast_stat",
    "depth_enhance",
    "estimate_radius",
    "fit_logistic",
    "geometry_stats",
    "kernel_backend",
    "load_ply",
    "luminance",
    "make_backend",
    "plcc",
    "point_features",
    "pool",
    "project",
    "format_report",
    "read_pairs_csv",
    "rmse",
    "save_ply",
    "saliency_2d",
    "similarity_term",
    "srocc",
    "visible_points",
]
