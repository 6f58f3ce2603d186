"""Synthetic distortion generator for graded validation runs.

Three controlled degradations: Gaussian position noise (level = sigma as a
fraction of the longest bounding-box side, so levels transfer across cloud
scales), Gaussian color noise (level = sigma in 8-bit channel units, rounded
and clamped), and uniform random downsampling (level = keep fraction, input
order preserved). Noise is drawn from a seeded PCG64 generator, so equal
(cloud, spec) inputs give bit-identical outputs on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, bounding_box
from .errors import ConfigError

KINDS = ("gaussian-geometry", "gaussian-color", "downsample")


@dataclass(frozen=True)
class DistortionSpec:
    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distortion kind {self.kind!r}; valid: {KINDS}")
        if not np.isfinite(self.level) or self.level <= 0:
            raise ConfigError(f"level must be > 0, got {self.level}")
        if self.kind == "downsample" and self.level > 1:
            raise ConfigError(f"downsample keep-fraction must be in (0, 1], got {self.level}")
        if int(self.seed) != self.seed:
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")


def apply(cloud: PointCloud, spec: DistortionSpec) -> PointCloud:
    """Distorted copy of `cloud`.

    Geometry noise leaves colors bit-identical and vice versa; downsampling
    keeps ceil(level * n) points as an order-preserving subset. An attached
    saliency channel is carried through (subset for downsampling) - rescore
    to refresh it if the distortion is supposed to change saliency.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian-geometry":
        sigma = spec.level * bounding_box(cloud).max_side
        positions = cloud.positions + rng.normal(0.0, sigma, size=cloud.positions.shape)
        return PointCloud(positions, cloud.colors, cloud.saliency)

    if spec.kind == "gaussian-color":
        noisy = cloud.colors.astype(np.float64) + rng.normal(
            0.0, spec.level, size=cloud.colors.shape
        )
        colors = np.clip(np.round(noisy), 0, 255).astype(np.uint8)
        return PointCloud(cloud.positions, colors, cloud.saliency)

    keep = int(np.ceil(spec.level * cloud.n_points))
    if keep < 10:
        raise ConfigError(
            f"downsample would keep {keep} points; at least 10 are needed for "
            "radius estimation downstream"
        )
    chosen = np.sort(rng.choice(cloud.n_points, size=keep, replace=False))
    saliency = None if cloud.saliency is None else cloud.saliency[chosen]
    return PointCloud(cloud.positions[chosen], cloud.colors[chosen], saliency)
