"""Core domain types shared by the simulator, the metrics and the services.

All spatial quantities use diagonal-normalized coordinates: a pixel at
column i, row j of a width x height image sits at (i / D, j / D) with
D = sqrt(width^2 + height^2), so the image diagonal always has length 1
and model parameters are resolution independent.

Every type is an immutable value after construction; wrapped numpy arrays
are marked read-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PROVENANCES = ("human", "synthetic")


class ValidationError(ValueError):
    """Raised when an input violates a structural invariant."""


class MetricUndefinedError(ValueError):
    """Raised when a metric has no defined value for the given input."""


def freeze(values, dtype=np.float64) -> np.ndarray:
    """Return a read-only float array copy of ``values``."""
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RetinaGrid:
    """Pixel grid of the retina with diagonal-normalized coordinates."""

    width: int
    height: int

    def __post_init__(self):
        if not (isinstance(self.width, (int, np.integer)) and isinstance(self.height, (int, np.integer))):
            raise ValidationError(f"grid dimensions must be integers, got {self.width!r} x {self.height!r}")
        if self.width < 2 or self.height < 2:
            raise ValidationError(f"grid must be at least 2x2, got {self.width} x {self.height}")

    @property
    def diag_px(self) -> float:
        """Diagonal length in pixels; the unit of the normalized system."""
        return math.hypot(self.width, self.height)

    @property
    def norm_width(self) -> float:
        return self.width / self.diag_px

    @property
    def norm_height(self) -> float:
        return self.height / self.diag_px

    @property
    def pixel_size(self) -> float:
        """Extent of one pixel in normalized units."""
        return 1.0 / self.diag_px

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (rows, cols) of per-pixel maps on this grid."""
        return (self.height, self.width)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized coordinates (xs of the columns, ys of the rows)."""
        d = self.diag_px
        return np.arange(self.width) / d, np.arange(self.height) / d

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.norm_width and 0.0 <= y <= self.norm_height

    def pixel_of(self, x: float, y: float) -> tuple[int, int]:
        """Nearest pixel (row, col) of a normalized point, clipped to the grid."""
        d = self.diag_px
        col = min(max(int(math.floor(x * d + 0.5)), 0), self.width - 1)
        row = min(max(int(math.floor(y * d + 0.5)), 0), self.height - 1)
        return row, col

    def center(self) -> tuple[float, float]:
        return self.width / (2.0 * self.diag_px), self.height / (2.0 * self.diag_px)


@dataclass(frozen=True)
class Fixation:
    """One gaze dwell: normalized position, onset time and duration (seconds)."""

    x: float
    y: float
    t: float
    d: float

    def __post_init__(self):
        for name in ("x", "y", "t", "d"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v)):
                raise ValidationError(f"fixation field {name} must be finite, got {v!r}")
        if self.t < 0:
            raise ValidationError(f"fixation onset must be >= 0, got {self.t}")
        if self.d <= 0:
            raise ValidationError(f"fixation duration must be > 0, got {self.d}")


@dataclass(frozen=True)
class Scanpath:
    """Ordered sequence of fixations over one stimulus."""

    grid: RetinaGrid
    fixations: tuple[Fixation, ...]
    provenance: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        prev: Fixation | None = None
        for k, f in enumerate(self.fixations):
            if not self.grid.contains(f.x, f.y):
                raise ValidationError(f"fixation {k} at ({f.x}, {f.y}) outside grid bounds")
            if prev is not None:
                if f.t <= prev.t:
                    raise ValidationError(f"fixation onsets must be strictly increasing ({prev.t} -> {f.t})")
                if f.t < prev.t + prev.d - 1e-12:
                    raise ValidationError(
                        f"fixation {k} starts at {f.t} before the previous one ends at {prev.t + prev.d}"
                    )
            prev = f

    def __len__(self) -> int:
        return len(self.fixations)

    def positions(self) -> np.ndarray:
        """Fixation positions as an (n, 2) array of normalized (x, y)."""
        return np.array([(f.x, f.y) for f in self.fixations], dtype=np.float64).reshape(-1, 2)

    def durations(self) -> np.ndarray:
        return np.array([f.d for f in self.fixations], dtype=np.float64)


@dataclass(frozen=True)
class SaliencyMap:
    """Nonnegative per-pixel map, predicted or accumulated from scanpaths."""

    grid: RetinaGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", freeze(self.values))
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"saliency shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("saliency values must be finite")
        if np.any(self.values < 0):
            raise ValidationError("saliency values must be nonnegative")


@dataclass(frozen=True)
class Frame:
    """Grayscale stimulus frame with brightness in [0, 1]."""

    grid: RetinaGrid
    brightness: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "brightness", freeze(self.brightness))
        if self.brightness.shape != self.grid.shape:
            raise ValidationError(f"frame shape {self.brightness.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.brightness)):
            raise ValidationError("brightness must be finite")
        if np.any(self.brightness < 0) or np.any(self.brightness > 1):
            raise ValidationError("brightness must lie in [0, 1]")
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValidationError(f"timestamp must be a finite nonnegative number, got {self.timestamp}")


@dataclass(frozen=True)
class FrameSequence:
    """Frames of one stimulus at a fixed rate; a single frame models a static image."""

    frames: tuple[Frame, ...]
    fps: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValidationError("frame sequence must contain at least one frame")
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps}")
        grid = self.frames[0].grid
        prev_t = None
        for f in self.frames:
            if f.grid != grid:
                raise ValidationError("all frames must share one grid")
            if prev_t is not None and f.timestamp <= prev_t:
                raise ValidationError("frame timestamps must be strictly increasing")
            prev_t = f.timestamp

    @property
    def grid(self) -> RetinaGrid:
        return self.frames[0].grid

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_image(cls, frame: Frame, fps: float = 25.0) -> "FrameSequence":
        return cls(frames=(frame,), fps=fps)

    def frame_at(self, t: float) -> int:
        """Index of the frame shown at time t (sample and hold)."""
        idx = 0
        for k, f in enumerate(self.frames):
            if f.timestamp <= t:
                idx = k
            else:
                break
        return idx


@dataclass(frozen=True)
class Trajectory:
    """Dense focus-of-attention samples; velocities optional."""

    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", freeze(self.t))
        object.__setattr__(self, "pos", freeze(self.pos))
        if self.vel is not None:
            object.__setattr__(self, "vel", freeze(self.vel))
        if self.t.ndim != 1 or self.pos.shape != (self.t.size, 2):
            raise ValidationError(f"trajectory shapes inconsistent: t {self.t.shape}, pos {self.pos.shape}")
        if self.vel is not None and self.vel.shape != self.pos.shape:
            raise ValidationError("velocity shape must match position shape")
        if self.t.size and (not np.all(np.isfinite(self.t)) or not np.all(np.isfinite(self.pos))):
            raise ValidationError("trajectory samples must be finite")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class Histogram:
    """Counts over strictly increasing bin edges."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bin_edges", freeze(self.bin_edges))
        object.__setattr__(self, "counts", freeze(self.counts, dtype=np.int64))
        if self.bin_edges.ndim != 1 or self.counts.ndim != 1:
            raise ValidationError("histogram edges and counts must be 1-D")
        if self.counts.size != self.bin_edges.size - 1:
            raise ValidationError(
                f"histogram needs len(counts) == len(edges) - 1, got {self.counts.size} and {self.bin_edges.size}"
            )
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValidationError("histogram bin edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise ValidationError("histogram counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())
