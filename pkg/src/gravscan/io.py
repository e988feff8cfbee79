"""File formats: binary PGM/PPM images, scanpath JSON, stimulus manifests.

Scanpath JSON schema (coordinates diagonal-normalized)::

    {"width": int, "height": int, "provenance": "human"|"synthetic",
     "fixations": [{"x": f, "y": f, "t": f, "d": f}, ...],
     "trajectory": [{"x": f, "y": f, "t": f}, ...]}   # optional replay samples

Writers emit a canonical byte form (fixed key order, compact separators,
shortest round-trip float repr), so write(read(p)) reproduces canonical
files bit for bit.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .types import (
    Fixation,
    Frame,
    FrameSequence,
    PROVENANCES,
    RetinaGrid,
    SaliencyMap,
    Scanpath,
    Trajectory,
    ValidationError,
)

MARKER_RADIUS_FRAC = 0.02  # replay marker radius as a fraction of the image diagonal


# ---------------------------------------------------------------------------
# PGM / PPM
# ---------------------------------------------------------------------------

def _read_pnm_header(data: bytes, magic: bytes, path) -> tuple[list[int], int]:
    """Parse a binary PNM header; returns ([width, height, maxval], payload offset)."""
    if not data.startswith(magic):
        raise ValidationError(f"{path}: expected {magic.decode()} magic number")
    fields: list[int] = []
    i = len(magic)
    n = len(data)
    while len(fields) < 3:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ValidationError(f"{path}: truncated header")
        try:
            fields.append(int(data[start:i]))
        except ValueError as exc:
            raise ValidationError(f"{path}: bad header token {data[start:i]!r}") from exc
    if i >= n or not data[i : i + 1].isspace():
        raise ValidationError(f"{path}: missing whitespace after maxval")
    return fields, i + 1


def read_pgm(path, timestamp: float = 0.0) -> Frame:
    """Read a binary (P5) grayscale image, scaling brightness to [0, 1]."""
    data = Path(path).read_bytes()
    (width, height, maxval), offset = _read_pnm_header(data, b"P5", path)
    if width <= 0 or height <= 0:
        raise ValidationError(f"{path}: zero or negative image dimension {width}x{height}")
    if not (0 < maxval <= 65535):
        raise ValidationError(f"{path}: maxval {maxval} out of range (1..65535)")
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height
    raw = np.frombuffer(data, dtype=dtype, count=-1, offset=offset)
    if raw.size < count:
        raise ValidationError(f"{path}: truncated payload ({raw.size} of {count} pixels)")
    pixels = raw[:count].astype(np.float64).reshape(height, width) / maxval
    return Frame(grid=RetinaGrid(width, height), brightness=pixels, timestamp=timestamp)


def write_pgm(path, frame: Frame, maxval: int = 255) -> None:
    """Write a Frame as a binary (P5) grayscale image."""
    if not (0 < maxval <= 65535):
        raise ValidationError(f"maxval {maxval} out of range (1..65535)")
    levels = np.rint(frame.brightness * maxval)
    data = levels.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    header = f"P5\n{frame.grid.width} {frame.grid.height}\n{maxval}\n".encode()
    Path(path).write_bytes(header + data)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as a binary (P6) color image."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValidationError(f"expected (H, W, 3) array, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes())


def read_saliency_pgm(path) -> SaliencyMap:
    """Read a PGM as a saliency map (values in [0, 1])."""
    frame = read_pgm(path)
    return SaliencyMap(grid=frame.grid, values=frame.brightness)


def render_frame(frame: Frame, focus: tuple[float, float], out_path) -> None:
    """Write the frame as a P6 image with a filled red circle at the focus.

    The marker radius is 2% of the image diagonal; the disk is clipped to
    the image bounds.
    """
    grid = frame.grid
    x, y = focus
    if not grid.contains(x, y):
        raise ValidationError(f"focus ({x}, {y}) outside grid bounds")
    gray = np.rint(frame.brightness * 255).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)

    d = grid.diag_px
    cx, cy = x * d, y * d
    radius = MARKER_RADIUS_FRAC * d
    col_lo = max(int(math.floor(cx - radius)), 0)
    col_hi = min(int(math.ceil(cx + radius)), grid.width - 1)
    row_lo = max(int(math.floor(cy - radius)), 0)
    row_hi = min(int(math.ceil(cy + radius)), grid.height - 1)
    cols = np.arange(col_lo, col_hi + 1)
    rows = np.arange(row_lo, row_hi + 1)
    mask = (cols[None, :] - cx) ** 2 + (rows[:, None] - cy) ** 2 <= radius ** 2
    patch = rgb[row_lo : row_hi + 1, col_lo : col_hi + 1]
    patch[mask] = (255, 0, 0)
    write_ppm(out_path, rgb)


# ---------------------------------------------------------------------------
# Scanpath JSON
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_scanpath(path, scanpath: Scanpath, trajectory: Trajectory | None = None) -> None:
    """Write a scanpath (and optional replay trajectory) in canonical JSON form."""
    parts = [
        f'{{"width":{scanpath.grid.width},"height":{scanpath.grid.height},'
        f'"provenance":"{scanpath.provenance}","fixations":['
    ]
    parts.append(
        ",".join(
            f'{{"x":{_fmt(f.x)},"y":{_fmt(f.y)},"t":{_fmt(f.t)},"d":{_fmt(f.d)}}}' for f in scanpath.fixations
        )
    )
    parts.append("]")
    if trajectory is not None:
        parts.append(',"trajectory":[')
        parts.append(
            ",".join(
                f'{{"x":{_fmt(x)},"y":{_fmt(y)},"t":{_fmt(t)}}}'
                for (x, y), t in zip(trajectory.pos, trajectory.t)
            )
        )
        parts.append("]")
    parts.append("}\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


def _parse_scanpath_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: scanpath document must be a JSON object")
    for key in ("width", "height", "provenance", "fixations"):
        if key not in doc:
            raise ValidationError(f"{path}: missing required key {key!r}")
    return doc


def read_scanpath(path) -> Scanpath:
    """Read and validate a scanpath JSON file."""
    doc = _parse_scanpath_json(path)
    grid = RetinaGrid(int(doc["width"]), int(doc["height"]))
    if doc["provenance"] not in PROVENANCES:
        raise ValidationError(f"{path}: provenance must be one of {PROVENANCES}")
    fixations = []
    for k, rec in enumerate(doc["fixations"]):
        try:
            fixations.append(Fixation(x=float(rec["x"]), y=float(rec["y"]), t=float(rec["t"]), d=float(rec["d"])))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad fixation record {k}: {rec!r}") from exc
    try:
        return Scanpath(grid=grid, fixations=tuple(fixations), provenance=doc["provenance"])
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def read_trajectory(path) -> Trajectory | None:
    """Read the optional dense trajectory from a scanpath JSON file."""
    doc = _parse_scanpath_json(path)
    if "trajectory" not in doc or doc["trajectory"] is None:
        return None
    samples = doc["trajectory"]
    try:
        t = np.array([s["t"] for s in samples], dtype=np.float64)
        pos = np.array([(s["x"], s["y"]) for s in samples], dtype=np.float64).reshape(-1, 2)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: bad trajectory samples") from exc
    return Trajectory(t=t, pos=pos)


def read_fixation_table(path, width: int, height: int, *, pixels_per_unit: float | None = None,
                        provenance: str = "human") -> Scanpath:
    """Generic loader for whitespace/comma-separated fixation tables.

    Each row is ``x y t d``. Coordinates are assumed to be in pixels;
    ``pixels_per_unit`` overrides that when the dataset uses other units
    (e.g. pass pixels-per-degree for data in degrees of visual angle).
    Output coordinates are diagonal-normalized.
    """
    grid = RetinaGrid(width, height)
    scale = pixels_per_unit if pixels_per_unit is not None else 1.0
    fixations = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.replace(",", " ").split()
        if len(cells) != 4:
            raise ValidationError(f"{path}:{lineno}: expected 4 columns (x y t d), got {len(cells)}")
        try:
            x, y, t, d = (float(c) for c in cells)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: non-numeric cell") from exc
        fixations.append(Fixation(x=x * scale / grid.diag_px, y=y * scale / grid.diag_px, t=t, d=d))
    return Scanpath(grid=grid, fixations=tuple(fixations), provenance=provenance)


# ---------------------------------------------------------------------------
# Stimulus manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StimulusEntry:
    """One manifest row; paths are resolved relative to the manifest file."""

    id: str
    image: Path
    scanpath: Path
    truth: str
    frames_dir: Path | None = None
    fps: float | None = None
    feature_maps: tuple[tuple[Path, float], ...] = ()


@dataclass(frozen=True)
class Manifest:
    stimuli: tuple[StimulusEntry, ...]

    def by_id(self) -> dict[str, StimulusEntry]:
        return {s.id: s for s in self.stimuli}


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "stimuli" not in doc:
        raise ValidationError(f"{path}: manifest must be an object with a 'stimuli' list")
    base = path.parent
    entries = []
    seen = set()
    for k, rec in enumerate(doc["stimuli"]):
        try:
            sid = str(rec["id"])
            truth = rec["truth"]
            image = base / rec["image"]
            scanpath = base / rec["scanpath"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: stimulus {k} missing required field") from exc
        if truth not in PROVENANCES:
            raise ValidationError(f"{path}: stimulus {sid!r} truth must be one of {PROVENANCES}")
        if sid in seen:
            raise ValidationError(f"{path}: duplicate stimulus id {sid!r}")
        seen.add(sid)
        fmaps = tuple(
            (base / m["path"], float(m["alpha"])) for m in rec.get("feature_maps", ())
        )
        entries.append(
            StimulusEntry(
                id=sid,
                image=image,
                scanpath=scanpath,
                truth=truth,
                frames_dir=(base / rec["frames_dir"]) if rec.get("frames_dir") else None,
                fps=float(rec["fps"]) if rec.get("fps") else None,
                feature_maps=fmaps,
            )
        )
    return Manifest(stimuli=tuple(entries))


def load_frame_sequence(frames_dir, fps: float) -> FrameSequence:
    """Load numbered PGM frames from a directory (sorted by filename)."""
    frames_dir = Path(frames_dir)
    paths = sorted(p for p in frames_dir.iterdir() if p.suffix.lower() == ".pgm")
    if not paths:
        raise ValidationError(f"{frames_dir}: no .pgm frames found")
    frames = tuple(read_pgm(p, timestamp=k / fps) for k, p in enumerate(paths))
    return FrameSequence(frames=frames, fps=fps)
