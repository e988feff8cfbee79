import math

import numpy as np
import pytest

from gravscan import Fixation, Frame, FrameSequence, Histogram, RetinaGrid, Scanpath, ValidationError


def test_grid_diagonal_is_unit_length():
    for w, h in [(2, 2), (64, 64), (640, 480), (1920, 1080), (3, 977)]:
        grid = RetinaGrid(w, h)
        corner_dist = math.hypot(grid.norm_width, grid.norm_height)
        assert abs(corner_dist - 1.0) <= 1e-12


def test_grid_rejects_degenerate_dimensions():
    for w, h in [(1, 5), (5, 1), (0, 4), (-2, 4)]:
        with pytest.raises(ValidationError):
            RetinaGrid(w, h)


def test_pixel_mapping_round_trip():
    grid = RetinaGrid(64, 48)
    x, y = 10 / grid.diag_px, 20 / grid.diag_px
    assert grid.pixel_of(x, y) == (20, 10)
    # clipping at the far edge
    assert grid.pixel_of(grid.norm_width, grid.norm_height) == (47, 63)


def test_fixation_validation():
    Fixation(x=0.1, y=0.1, t=0.0, d=0.2)
    with pytest.raises(ValidationError):
        Fixation(x=0.1, y=0.1, t=-0.1, d=0.2)
    with pytest.raises(ValidationError):
        Fixation(x=0.1, y=0.1, t=0.0, d=0.0)
    with pytest.raises(ValidationError):
        Fixation(x=float("nan"), y=0.1, t=0.0, d=0.2)


def test_scanpath_ordering_invariants():
    grid = RetinaGrid(100, 100)
    good = Scanpath(
        grid=grid,
        fixations=(Fixation(0.1, 0.1, 0.0, 0.2), Fixation(0.3, 0.2, 0.25, 0.3)),
        provenance="human",
    )
    assert len(good) == 2

    with pytest.raises(ValidationError):  # onsets out of order
        Scanpath(grid=grid, fixations=(Fixation(0.1, 0.1, 0.5, 0.1), Fixation(0.2, 0.2, 0.3, 0.1)))
    with pytest.raises(ValidationError):  # overlapping dwell
        Scanpath(grid=grid, fixations=(Fixation(0.1, 0.1, 0.0, 0.5), Fixation(0.2, 0.2, 0.3, 0.1)))
    with pytest.raises(ValidationError):  # out of bounds
        Scanpath(grid=grid, fixations=(Fixation(0.9, 0.1, 0.0, 0.1),))
    with pytest.raises(ValidationError):
        Scanpath(grid=grid, fixations=(), provenance="robot")


def test_empty_scanpath_is_valid():
    path = Scanpath(grid=RetinaGrid(10, 10), fixations=())
    assert len(path) == 0
    assert path.positions().shape == (0, 2)


def test_frame_bounds_and_immutability():
    grid = RetinaGrid(4, 4)
    frame = Frame(grid=grid, brightness=np.zeros((4, 4)))
    with pytest.raises(ValueError):
        frame.brightness[0, 0] = 1.0
    with pytest.raises(ValidationError):
        Frame(grid=grid, brightness=np.full((4, 4), 1.5))
    with pytest.raises(ValidationError):
        Frame(grid=grid, brightness=np.zeros((3, 4)))


def test_frame_sequence_invariants():
    grid = RetinaGrid(4, 4)
    f0 = Frame(grid=grid, brightness=np.zeros((4, 4)), timestamp=0.0)
    f1 = Frame(grid=grid, brightness=np.ones((4, 4)), timestamp=0.04)
    seq = FrameSequence(frames=(f0, f1), fps=25.0)
    assert seq.grid == grid
    assert seq.frame_at(0.0) == 0
    assert seq.frame_at(0.039) == 0
    assert seq.frame_at(0.05) == 1

    with pytest.raises(ValidationError):
        FrameSequence(frames=(f1, f0), fps=25.0)
    with pytest.raises(ValidationError):
        FrameSequence(frames=(), fps=25.0)


def test_histogram_shape_checks():
    Histogram(bin_edges=[0.0, 0.5, 1.0], counts=[1, 2])
    with pytest.raises(ValidationError):
        Histogram(bin_edges=[0.0, 0.5, 1.0], counts=[1, 2, 3])
    with pytest.raises(ValidationError):
        Histogram(bin_edges=[0.0, 0.5, 0.5], counts=[1, 2])
    with pytest.raises(ValidationError):
        Histogram(bin_edges=[0.0, 0.5, 1.0], counts=[1, -2])
