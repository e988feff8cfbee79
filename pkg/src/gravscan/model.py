"""Scanpath generators with a scikit-learn style estimator surface.

Both generators are parameterized, stateless predictors: ``fit`` only
validates the configuration, ``predict`` maps one stimulus to a scanpath.
``get_params``/``set_params`` come from ``BaseEstimator`` so the models
compose with the usual tooling (cloning, grid search over parameters).
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator

from .dynamics import SimParams, integrate
from .types import (
    Fixation,
    Frame,
    FrameSequence,
    RetinaGrid,
    SaliencyMap,
    Scanpath,
    Trajectory,
    ValidationError,
)


class GravitationalScanpathModel(BaseEstimator):
    """Simulate a scanpath by integrating damped gravitational attention.

    Feature masses (brightness gradient, frame-difference motion, optional
    external maps) attract the focus of attention; an inhibition-of-return
    field suppresses already-visited masses so the trajectory keeps
    exploring.

    Parameters
    ----------
    alpha_gradient, alpha_motion : float
        Weights of the built-in feature masses.
    damping : float
        Velocity damping of the attention equation (the model's lambda),
        in 1/s; it suppresses the oscillations a pure gravitational system
        would produce.
    beta : float
        Inhibition relaxation rate in 1/s.
    sigma : float
        Inhibition footprint radius, in diagonal-normalized units.
    epsilon : float or None
        Softening length of the field kernel; None means one pixel.
    dt : float
        Integration step in seconds.
    duration : float
        Simulated viewing time in seconds (used for static images; frame
        sequences are simulated over their own length).
    fps : float
        Sampling rate of the replay trajectory emitted alongside results.
    vel_threshold, min_fix_duration : float
        I-VT parameters used to segment fixations from the trajectory
        (normalized units/s and seconds).
    seed : int
        Recorded for provenance; the dynamics themselves are
        deterministic.
    """

    def __init__(
        self,
        alpha_gradient: float = 1.0,
        alpha_motion: float = 1.0,
        damping: float = 5.0,
        beta: float = 0.5,
        sigma: float = 0.05,
        epsilon: float | None = None,
        dt: float = 1e-3,
        duration: float = 5.0,
        fps: float = 25.0,
        vel_threshold: float = 0.05,
        min_fix_duration: float = 0.1,
        seed: int = 0,
    ):
        self.alpha_gradient = alpha_gradient
        self.alpha_motion = alpha_motion
        self.damping = damping
        self.beta = beta
        self.sigma = sigma
        self.epsilon = epsilon
        self.dt = dt
        self.duration = duration
        self.fps = fps
        self.vel_threshold = vel_threshold
        self.min_fix_duration = min_fix_duration
        self.seed = seed

    def _sim_params(self, duration: float | None = None) -> SimParams:
        return SimParams(
            alpha_gradient=self.alpha_gradient,
            alpha_motion=self.alpha_motion,
            damping=self.damping,
            beta=self.beta,
            sigma=self.sigma,
            epsilon=self.epsilon,
            dt=self.dt,
            duration=self.duration if duration is None else duration,
            fps=self.fps,
            vel_threshold=self.vel_threshold,
            min_fix_duration=self.min_fix_duration,
            seed=self.seed,
        )

    def fit(self, X=None, y=None) -> "GravitationalScanpathModel":
        """Validate the configuration; the model has no trainable state."""
        self._sim_params()
        return self

    def simulate(self, stimulus: Frame | FrameSequence, external_features=()) -> tuple[Trajectory, Scanpath]:
        """Run the dynamics over one stimulus; returns the dense trajectory and its scanpath."""
        if isinstance(stimulus, Frame):
            stimulus = FrameSequence.from_image(stimulus, fps=self.fps)
            duration = None
        else:
            # simulate videos over their own span (last frame held one interval)
            duration = stimulus.frames[-1].timestamp + 1.0 / stimulus.fps
        params = self._sim_params(duration)
        return integrate(stimulus, external_features, params)

    def predict(self, stimulus: Frame | FrameSequence) -> Scanpath:
        return self.simulate(stimulus)[1]


class WinnerTakeAll(BaseEstimator):
    """Fixation generation by repeated select-and-inhibit on a saliency map.

    Each round fixates the current maximum (ties resolved to the smallest
    row-major index) and zeroes a disk of ``inhibit_radius`` around it.
    Durations split the viewing time uniformly.
    """

    def __init__(self, n_fixations: int = 10, inhibit_radius: float = 0.1, duration: float = 5.0):
        self.n_fixations = n_fixations
        self.inhibit_radius = inhibit_radius
        self.duration = duration

    def fit(self, X=None, y=None) -> "WinnerTakeAll":
        if self.n_fixations < 0:
            raise ValidationError(f"n_fixations must be >= 0, got {self.n_fixations}")
        if not self.inhibit_radius > 0:
            raise ValidationError(f"inhibit_radius must be > 0, got {self.inhibit_radius}")
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        return self

    def predict(self, saliency: SaliencyMap) -> Scanpath:
        self.fit()
        return wta_scanpath(saliency, self.n_fixations, self.inhibit_radius, duration=self.duration)


def wta_scanpath(saliency: SaliencyMap, n_fix: int, inhibit_radius: float, duration: float = 5.0) -> Scanpath:
    """Winner-take-all scanpath: fixate the argmax, inhibit a disk, repeat."""
    if n_fix < 0:
        raise ValidationError(f"n_fix must be >= 0, got {n_fix}")
    if not inhibit_radius > 0:
        raise ValidationError(f"inhibit_radius must be > 0, got {inhibit_radius}")
    grid = saliency.grid
    if n_fix == 0:
        return Scanpath(grid=grid, fixations=(), provenance="synthetic")
    work = saliency.values.copy()
    xs, ys = grid.axes()
    d = duration / n_fix
    fixations = []
    for k in range(n_fix):
        flat = int(np.argmax(work))  # first occurrence = smallest row-major index
        row, col = divmod(flat, grid.width)
        x, y = xs[col], ys[row]
        fixations.append(Fixation(x=float(x), y=float(y), t=k * d, d=d))
        mask = (xs[None, :] - x) ** 2 + (ys[:, None] - y) ** 2 <= inhibit_radius ** 2
        work[mask] = 0.0
    return Scanpath(grid=grid, fixations=tuple(fixations), provenance="synthetic")


def scanpath_to_saliency(paths: Iterable[Scanpath], sigma_blob: float, grid: RetinaGrid) -> SaliencyMap:
    """Saliency as a by-product: duration-weighted Gaussian blob per fixation.

    The sum over all fixations of all scanpaths is max-normalized to 1;
    with no fixations at all the map is identically zero.
    """
    if not sigma_blob > 0:
        raise ValidationError(f"sigma_blob must be > 0, got {sigma_blob}")
    paths = list(paths)
    if not paths:
        raise ValidationError("at least one scanpath is required")
    xs, ys = grid.axes()
    acc = np.zeros(grid.shape)
    inv = 1.0 / (2.0 * sigma_blob * sigma_blob)
    for path in paths:
        if path.grid != grid:
            raise ValidationError("all scanpaths must live on the target grid")
        for f in path.fixations:
            acc += f.d * np.exp(-((xs[None, :] - f.x) ** 2 + (ys[:, None] - f.y) ** 2) * inv)
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return SaliencyMap(grid=grid, values=acc)
