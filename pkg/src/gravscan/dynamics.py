"""Gravitational attention dynamics.

The focus of attention is a unit mass attracted by the feature-induced
mass field. With E the attraction evaluated by :func:`eval_field`, the
trajectory solves

    da/dt = v,    dv/dt = -damping * v + E(a, t),

i.e. the damped Newtonian equation of the model. Integration uses the
explicit midpoint rule at a fixed step; masses are rebuilt at frame
boundaries and the inhibition-of-return field advances every step with
its exact per-step exponential update.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .features import FeatureMap, MassField, brightness_gradient, build_mass, temporal_difference
from .types import Fixation, FrameSequence, RetinaGrid, Scanpath, Trajectory, ValidationError, freeze

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class IORField:
    """Inhibition-of-return field I(x) in [0, 1] with its dynamics parameters.

    beta is the per-second relaxation rate toward the Gaussian footprint
    g(x - a) = exp(-|x - a|^2 / (2 sigma^2)) of the current focus a.
    """

    grid: RetinaGrid
    values: np.ndarray
    beta: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "values", freeze(self.values))
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"IOR shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("IOR values must be finite")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValidationError("IOR values must lie in [0, 1]")
        if not self.beta > 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def zeros(cls, grid: RetinaGrid, beta: float, sigma: float) -> "IORField":
        return cls(grid=grid, values=np.zeros(grid.shape), beta=beta, sigma=sigma)


def _focus_footprint(grid: RetinaGrid, a, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Row/column factors of the separable Gaussian g(x - a)."""
    xs, ys = grid.axes()
    inv = 1.0 / (2.0 * sigma * sigma)
    return np.exp(-((ys - a[1]) ** 2) * inv), np.exp(-((xs - a[0]) ** 2) * inv)


def step_ior(ior: IORField, a, dt: float) -> IORField:
    """Advance dI/dt = beta (g(x - a) - I) by dt with a frozen.

    Uses the exact solution I <- g + (I - g) exp(-beta dt), which is
    unconditionally stable and keeps I in [0, 1].
    """
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    gr, gc = _focus_footprint(ior.grid, a, ior.sigma)
    g = np.outer(gr, gc)
    decay = math.exp(-ior.beta * dt)
    values = g + (ior.values - g) * decay
    np.clip(values, 0.0, 1.0, out=values)
    return replace(ior, values=values)


def eval_field(mass: MassField, a, epsilon: float) -> np.ndarray:
    """Gravitational attraction at point a, softened at scale epsilon.

    Exact discretization of the model field over the pixel grid:

        E(a) = -(1 / 2 pi) * sum_x (a - x) mu(x) dA / (|a - x|^2 + eps^2)

    with dA = 1 / (width * height). The vector points toward the masses.
    """
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    grid = mass.grid
    xs, ys = grid.axes()
    dx = a[0] - xs[None, :]
    dy = a[1] - ys[:, None]
    r2 = dx * dx + dy * dy + epsilon * epsilon
    w = mass.mu / (r2 * (TWO_PI * grid.width * grid.height))
    return np.array([-np.sum(dx * w), -np.sum(dy * w)])


def softened_potential(mass: MassField, a, epsilon: float) -> float:
    """Potential U with E = -grad U; used by the energy-dissipation checks."""
    grid = mass.grid
    xs, ys = grid.axes()
    dx = a[0] - xs[None, :]
    dy = a[1] - ys[:, None]
    r2 = dx * dx + dy * dy + epsilon * epsilon
    return float(np.sum(mass.mu * np.log(r2)) / (2.0 * TWO_PI * grid.width * grid.height))


@dataclass(frozen=True)
class SimParams:
    """Parameters of one simulation run.

    Defaults are the documented model defaults: feature weight 1 for the
    brightness gradient, damping 5 /s, IOR rate 0.5 /s with footprint
    sigma 0.05, softening of one pixel (epsilon=None), and a 1 ms step.
    """

    alpha_gradient: float = 1.0
    alpha_motion: float = 1.0
    damping: float = 5.0
    beta: float = 0.5
    sigma: float = 0.05
    epsilon: float | None = None
    dt: float = 1e-3
    duration: float = 5.0
    fps: float = 25.0
    vel_threshold: float = 0.05
    min_fix_duration: float = 0.1
    seed: int = 0

    def __post_init__(self):
        positive = {
            "alpha_gradient": self.alpha_gradient,
            "alpha_motion": self.alpha_motion,
            "damping": self.damping,
            "sigma": self.sigma,
            "dt": self.dt,
            "duration": self.duration,
            "fps": self.fps,
            "vel_threshold": self.vel_threshold,
        }
        if self.epsilon is not None:
            positive["epsilon"] = self.epsilon
        for name, v in positive.items():
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v!r}")
        # beta = 0 switches inhibition off entirely
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta >= 0):
            raise ValidationError(f"beta must be >= 0 and finite, got {self.beta!r}")
        if self.min_fix_duration < 0:
            raise ValidationError(f"min_fix_duration must be >= 0, got {self.min_fix_duration}")
        if self.dt > 1.0 / self.fps + 1e-12:
            raise ValidationError(f"dt ({self.dt}) must not exceed the frame interval 1/fps ({1.0 / self.fps})")

    def resolve_epsilon(self, grid: RetinaGrid) -> float:
        return self.epsilon if self.epsilon is not None else grid.pixel_size


class _FrameMasses:
    """Raw (pre-inhibition) mass of each frame, restricted to its support.

    eval_field sums over the whole grid; here zero-mass pixels are dropped
    before the per-step summation, which changes nothing but the order of
    floating-point addition and makes the inner loop tractable.
    """

    def __init__(self, stimulus: FrameSequence, external, params: SimParams):
        self.stimulus = stimulus
        self.params = params
        self.external = list(external)
        for seq, alpha in self.external:
            if len(seq) not in (1, len(stimulus)):
                raise ValidationError(
                    f"external feature sequences must have 1 or {len(stimulus)} maps, got {len(seq)}"
                )
            if not alpha > 0:
                raise ValidationError(f"external feature alpha must be > 0, got {alpha}")
        self._cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}

    def at(self, index: int):
        """(flat support indices, x coords, y coords, weighted raw mass) of frame ``index``."""
        if index not in self._cache:
            frame = self.stimulus.frames[index]
            feats: list[tuple[FeatureMap, float]] = [(brightness_gradient(frame), self.params.alpha_gradient)]
            if index > 0:
                feats.append(
                    (temporal_difference(frame, self.stimulus.frames[index - 1]), self.params.alpha_motion)
                )
            for seq, alpha in self.external:
                fmap = seq[0] if len(seq) == 1 else seq[index]
                if fmap.grid != frame.grid:
                    raise ValidationError("external feature grid does not match stimulus grid")
                feats.append((fmap, alpha))
            raw = build_mass(feats).mu
            flat = raw.ravel()
            support = np.flatnonzero(flat)
            grid = frame.grid
            xs, ys = grid.axes()
            cols = support % grid.width
            rows = support // grid.width
            scale = 1.0 / (TWO_PI * grid.width * grid.height)
            self._cache[index] = (support, xs[cols], ys[rows], flat[support] * scale)
        return self._cache[index]


def integrate(
    stimulus: FrameSequence,
    external_features=(),
    params: SimParams = SimParams(),
    *,
    field_override: Callable[[np.ndarray, float], np.ndarray] | None = None,
    a0: tuple[float, float] | None = None,
    v0: tuple[float, float] = (0.0, 0.0),
) -> tuple[Trajectory, Scanpath]:
    """Integrate the attention equation over the stimulus.

    Returns the dense trajectory sampled at the integration step together
    with the fixations extracted from it. ``field_override`` is a test
    hook replacing the gravitational attraction with an analytic field
    ``f(a, t)``; it bypasses mass construction and inhibition entirely.
    """
    grid = stimulus.grid
    eps2 = params.resolve_epsilon(grid) ** 2
    dt = params.dt
    n_steps = int(round(params.duration / dt))
    if n_steps < 1:
        raise ValidationError(f"duration {params.duration} shorter than one step {dt}")

    x_max, y_max = grid.norm_width, grid.norm_height
    ax, ay = a0 if a0 is not None else grid.center()
    vx, vy = v0
    if not grid.contains(ax, ay):
        raise ValidationError(f"initial position ({ax}, {ay}) outside grid bounds")

    masses = None if field_override is not None else _FrameMasses(stimulus, external_features, params)
    ior = None if field_override is not None else np.zeros(grid.shape)
    ior_decay = math.exp(-params.beta * dt)
    lam = params.damping

    times = np.arange(n_steps + 1) * dt
    pos = np.empty((n_steps + 1, 2))
    vel = np.empty((n_steps + 1, 2))
    pos[0] = (ax, ay)
    vel[0] = (vx, vy)

    frame_index = -1
    support_x = support_y = raw_s = flat_support = mu_s = None

    for k in range(n_steps):
        t = times[k]
        if field_override is None:
            idx = stimulus.frame_at(t)
            if idx != frame_index:
                frame_index = idx
                flat_support, support_x, support_y, raw_s = masses.at(idx)
            # freeze the inhibited mass for the whole step
            mu_s = raw_s * (1.0 - ior.ravel()[flat_support])

            def attraction(px, py):
                dx = px - support_x
                dy = py - support_y
                w = mu_s / (dx * dx + dy * dy + eps2)
                return -np.dot(dx, w), -np.dot(dy, w)

        else:

            def attraction(px, py, _t=t):
                return tuple(field_override(np.array([px, py]), _t))

        # explicit midpoint step for (a, v)
        ex1, ey1 = attraction(ax, ay)
        k1_ax, k1_ay = vx, vy
        k1_vx, k1_vy = -lam * vx + ex1, -lam * vy + ey1

        mx, my = ax + 0.5 * dt * k1_ax, ay + 0.5 * dt * k1_ay
        mvx, mvy = vx + 0.5 * dt * k1_vx, vy + 0.5 * dt * k1_vy
        ex2, ey2 = attraction(mx, my)
        ax += dt * mvx
        ay += dt * mvy
        vx += dt * (-lam * mvx + ex2)
        vy += dt * (-lam * mvy + ey2)

        if not (math.isfinite(ax) and math.isfinite(ay) and math.isfinite(vx) and math.isfinite(vy)):
            raise ValidationError(
                f"integration diverged at t={t + dt:.6f}: a=({ax}, {ay}), v=({vx}, {vy})"
            )

        # keep the focus on the retina; kill the normal velocity component
        if ax < 0.0:
            ax, vx = 0.0, 0.0
        elif ax > x_max:
            ax, vx = x_max, 0.0
        if ay < 0.0:
            ay, vy = 0.0, 0.0
        elif ay > y_max:
            ay, vy = y_max, 0.0

        if field_override is None:
            # relax the inhibition toward the footprint of the position
            # held during this step
            gr, gc = _focus_footprint(grid, pos[k], params.sigma)
            g = np.outer(gr, gc)
            ior *= ior_decay
            ior += g * (1.0 - ior_decay)

        pos[k + 1] = (ax, ay)
        vel[k + 1] = (vx, vy)

    trajectory = Trajectory(t=times, pos=pos, vel=vel)
    scanpath = extract_fixations(
        trajectory, params.vel_threshold, params.min_fix_duration, grid=grid, provenance="synthetic"
    )
    return trajectory, scanpath


def extract_fixations(
    trajectory: Trajectory,
    vel_threshold: float,
    min_duration: float,
    *,
    grid: RetinaGrid,
    provenance: str = "synthetic",
) -> Scanpath:
    """Velocity-threshold (I-VT) fixation identification on dense samples.

    Maximal runs of consecutive segments slower than ``vel_threshold``
    that span at least ``min_duration`` become fixations at the run
    centroid, with onset at the run start and the span as duration.
    """
    if len(trajectory) < 2:
        raise ValidationError("need at least 2 trajectory samples to extract fixations")
    t, p = trajectory.t, trajectory.pos
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
        raise ValidationError("trajectory samples must be uniformly spaced")
    speeds = np.hypot(*np.diff(p, axis=0).T) / steps
    below = speeds < vel_threshold

    fixations = []
    n = below.size
    start = None
    for k in range(n + 1):
        if k < n and below[k]:
            if start is None:
                start = k
            continue
        if start is not None:
            end = k  # segments start..k-1, samples start..k
            span = t[end] - t[start]
            if span >= min_duration - 1e-12:
                cx, cy = p[start : end + 1].mean(axis=0)
                fixations.append(Fixation(x=float(cx), y=float(cy), t=float(t[start]), d=float(span)))
            start = None
    return Scanpath(grid=grid, fixations=tuple(fixations), provenance=provenance)


def resample_trajectory(trajectory: Trajectory, fps: float) -> Trajectory:
    """Sample-and-hold downsample of a dense trajectory to one sample per 1/fps."""
    if not fps > 0:
        raise ValidationError(f"fps must be > 0, got {fps}")
    if len(trajectory) == 0:
        return trajectory
    t_end = float(trajectory.t[-1])
    times = np.arange(0.0, t_end + 0.5 / fps, 1.0 / fps)
    idx = np.searchsorted(trajectory.t, times, side="right") - 1
    idx = np.clip(idx, 0, len(trajectory) - 1)
    return Trajectory(t=times, pos=trajectory.pos[idx])
