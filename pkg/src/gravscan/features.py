"""Feature maps and the mass field they induce.

Each feature map holds the per-pixel activation strength of one visual
property (edges, motion, or an externally supplied map such as face
probability). Masses are the weighted sum of feature activations,
attenuated by the inhibition-of-return field.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .types import Frame, RetinaGrid, ValidationError, freeze

if TYPE_CHECKING:
    from .dynamics import IORField

FEATURE_KINDS = ("brightness_gradient", "temporal_difference", "external")


@dataclass(frozen=True)
class FeatureMap:
    """Nonnegative per-pixel activation of one visual feature."""

    grid: RetinaGrid
    values: np.ndarray
    kind: str = "external"

    def __post_init__(self):
        object.__setattr__(self, "values", freeze(self.values))
        if self.kind not in FEATURE_KINDS:
            raise ValidationError(f"feature kind must be one of {FEATURE_KINDS}, got {self.kind!r}")
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"feature shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature values must be finite")
        if np.any(self.values < 0):
            raise ValidationError("feature values must be nonnegative")


@dataclass(frozen=True)
class MassField:
    """Per-pixel gravitational mass density."""

    grid: RetinaGrid
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", freeze(self.mu))
        if self.mu.shape != self.grid.shape:
            raise ValidationError(f"mass shape {self.mu.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.mu)):
            raise ValidationError("mass values must be finite")
        if np.any(self.mu < 0):
            raise ValidationError("mass values must be nonnegative")


def brightness_gradient(frame: Frame) -> FeatureMap:
    """Magnitude of the spatial brightness gradient, in normalized units.

    Central differences in the interior, one-sided at the borders; pixel
    spacing is 1/diagonal, so a unit brightness step across one pixel has
    magnitude on the order of the diagonal length in pixels.
    """
    spacing = frame.grid.pixel_size
    gy, gx = np.gradient(frame.brightness, spacing)
    return FeatureMap(grid=frame.grid, values=np.hypot(gx, gy), kind="brightness_gradient")


def temporal_difference(curr: Frame, prev: Frame) -> FeatureMap:
    """Motion proxy: absolute brightness change per second between two frames."""
    if curr.grid != prev.grid:
        raise ValidationError(f"frame grids differ: {curr.grid} vs {prev.grid}")
    if curr.timestamp <= prev.timestamp:
        raise ValidationError(
            f"current frame must be later than previous ({curr.timestamp} <= {prev.timestamp})"
        )
    rate = np.abs(curr.brightness - prev.brightness) / (curr.timestamp - prev.timestamp)
    return FeatureMap(grid=curr.grid, values=rate, kind="temporal_difference")


def build_mass(features: Iterable[tuple[FeatureMap, float]], ior: "IORField | None" = None) -> MassField:
    """Combine weighted features into the mass field, attenuated by inhibition.

    mu(x) = (sum_i alpha_i * f_i(x)) * (1 - I(x)).
    """
    features = list(features)
    if not features:
        raise ValidationError("at least one feature map is required")
    grid = features[0][0].grid
    total = np.zeros(grid.shape, dtype=np.float64)
    for fmap, alpha in features:
        if fmap.grid != grid:
            raise ValidationError("all feature maps must share one grid")
        if not alpha > 0:
            raise ValidationError(f"feature weight alpha must be > 0, got {alpha}")
        total += alpha * fmap.values
    if ior is not None:
        if ior.grid != grid:
            raise ValidationError("inhibition grid does not match feature grid")
        total *= 1.0 - ior.values
        # inhibition can overshoot 1 by rounding; clamp the tiny negatives
        np.maximum(total, 0.0, out=total)
    return MassField(grid=grid, mu=total)
