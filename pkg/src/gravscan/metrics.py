"""Evaluation measures for saliency maps, scanpaths and saccade dynamics.

Saliency: AUC (Judd variant, ties scored half) and NSS. Scanpaths:
string-edit distance over a labeled region grid (with adjacent
transpositions at cost 1) and a scaled time-delay embedding similarity.
Dynamics: KL divergence between saccade-amplitude histograms, reference
(human) side first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .types import (
    Fixation,
    Histogram,
    MetricUndefinedError,
    RetinaGrid,
    SaliencyMap,
    Scanpath,
    ValidationError,
)

MAX_REGIONS = 65536
STDE_SCALE = 0.5  # similarity length scale: half the image diagonal

DEFAULT_QUANTIZER_ROWS = 5
DEFAULT_QUANTIZER_COLS = 5
DEFAULT_K_MAX = 3
DEFAULT_AMPLITUDE_BINS = 50
DEFAULT_SMOOTHING_EPS = 1e-9


# ---------------------------------------------------------------------------
# Region quantization and string edit distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridQuantizer:
    """Partition of the retina into rows x cols uniquely labeled regions."""

    rows: int
    cols: int
    grid: RetinaGrid

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"quantizer needs at least one region per axis, got {self.rows}x{self.cols}")
        if self.rows * self.cols > MAX_REGIONS:
            raise ValidationError(f"quantizer alphabet {self.rows * self.cols} exceeds {MAX_REGIONS}")

    def label(self, x: float, y: float) -> int:
        """Region label of a normalized point; total and unique over the grid."""
        if not self.grid.contains(x, y):
            raise ValidationError(f"point ({x}, {y}) outside grid bounds")
        r = min(int(y / self.grid.norm_height * self.rows), self.rows - 1)
        c = min(int(x / self.grid.norm_width * self.cols), self.cols - 1)
        return r * self.cols + c

    def encode(self, path: Scanpath, collapse: bool = True) -> tuple[int, ...]:
        """Region-label string of a scanpath, consecutive duplicates collapsed."""
        labels = [self.label(f.x, f.y) for f in path.fixations]
        if not collapse:
            return tuple(labels)
        out = []
        for lab in labels:
            if not out or out[-1] != lab:
                out.append(lab)
        return tuple(out)


def osa_distance(a, b) -> int:
    """Optimal string alignment distance.

    Unit-cost insertions, deletions, substitutions and transpositions of
    adjacent symbols (each substring edited at most once).
    """
    a, b = tuple(a), tuple(b)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return n + m
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                best = min(best, d[i - 2, j - 2] + 1)
            d[i, j] = best
    return int(d[n, m])


def string_edit(a: Scanpath, b: Scanpath, quantizer: GridQuantizer) -> int:
    """String-edit distance between two scanpaths over the labeled regions."""
    return osa_distance(quantizer.encode(a), quantizer.encode(b))


# ---------------------------------------------------------------------------
# Saliency metrics
# ---------------------------------------------------------------------------

def _fixated_pixels(saliency: SaliencyMap, fixations) -> list[tuple[int, int]]:
    pixels = []
    for f in fixations:
        if not saliency.grid.contains(f.x, f.y):
            raise ValidationError(f"fixation ({f.x}, {f.y}) outside the saliency grid")
        pixels.append(saliency.grid.pixel_of(f.x, f.y))
    return pixels


def auc_judd(saliency: SaliencyMap, fixations) -> float:
    """ROC area with fixated pixels as positives, all others as negatives.

    Thresholds sweep the saliency values at fixated pixels; ties between
    positive and negative values count half, which makes the score a rank
    statistic (invariant under strictly monotone rescaling of the map).
    """
    fixations = list(fixations)
    if not fixations:
        raise MetricUndefinedError("AUC needs at least one fixation")
    pixels = _fixated_pixels(saliency, fixations)
    pos_mask = np.zeros(saliency.grid.shape, dtype=bool)
    rows, cols = zip(*pixels)
    pos_mask[rows, cols] = True
    n_pos = int(pos_mask.sum())
    n_neg = pos_mask.size - n_pos
    if n_neg == 0:
        raise MetricUndefinedError("AUC undefined when every pixel is fixated")
    ranks = rankdata(saliency.values.ravel(), method="average")
    rank_sum = float(ranks[pos_mask.ravel()].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def nss(saliency: SaliencyMap, fixations) -> float:
    """Mean saliency z-score at the fixated pixels (population statistics)."""
    fixations = list(fixations)
    if not fixations:
        raise MetricUndefinedError("NSS needs at least one fixation")
    values = saliency.values
    std = float(values.std())
    if std == 0.0:
        raise MetricUndefinedError("NSS undefined on a constant saliency map")
    mean = float(values.mean())
    pixels = _fixated_pixels(saliency, fixations)
    return float(np.mean([(values[r, c] - mean) / std for r, c in pixels]))


# ---------------------------------------------------------------------------
# Trajectory similarity and saccade statistics
# ---------------------------------------------------------------------------

def stde(reference: Scanpath, hypothesis: Scanpath, k_max: int = DEFAULT_K_MAX) -> float:
    """Scaled time-delay embedding similarity, in (0, 1].

    For each window length k up to ``k_max`` (capped by both path
    lengths), every hypothesis window is matched to its closest reference
    window by mean pointwise distance; similarities exp(-dist / 0.5)
    are averaged over windows, then over k.
    """
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    if len(reference) == 0 or len(hypothesis) == 0:
        raise MetricUndefinedError("STDE needs nonempty scanpaths")
    ref = reference.positions()
    hyp = hypothesis.positions()
    scores = []
    for k in range(1, min(k_max, len(ref), len(hyp)) + 1):
        ref_windows = np.stack([ref[i : i + k] for i in range(len(ref) - k + 1)])
        sims = []
        for i in range(len(hyp) - k + 1):
            window = hyp[i : i + k]
            dists = np.linalg.norm(ref_windows - window[None, :, :], axis=2).mean(axis=1)
            sims.append(math.exp(-float(dists.min()) / STDE_SCALE))
        scores.append(float(np.mean(sims)))
    return float(np.mean(scores))


def saccade_amplitudes(path: Scanpath) -> np.ndarray:
    """Euclidean jumps between consecutive fixations, in normalized units."""
    if len(path) < 2:
        return np.empty(0)
    return np.linalg.norm(np.diff(path.positions(), axis=0), axis=1)


def amplitude_histogram(amplitudes, bins: int = DEFAULT_AMPLITUDE_BINS) -> Histogram:
    """Histogram of saccade amplitudes over [0, 1] with uniform bins."""
    if bins < 1:
        raise ValidationError(f"need at least one bin, got {bins}")
    counts, edges = np.histogram(np.asarray(amplitudes, dtype=np.float64), bins=bins, range=(0.0, 1.0))
    return Histogram(bin_edges=edges, counts=counts)


def kl_divergence(p: Histogram, q: Histogram, smoothing_eps: float = DEFAULT_SMOOTHING_EPS) -> float:
    """KL(p || q) in nats between two equally-binned histograms.

    Counts are smoothed additively by ``smoothing_eps`` and normalized.
    By convention p is the reference (human) distribution.
    """
    if smoothing_eps < 0:
        raise ValidationError(f"smoothing_eps must be >= 0, got {smoothing_eps}")
    if not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValidationError("histograms must share identical bin edges")
    if smoothing_eps == 0 and (p.total == 0 or q.total == 0):
        raise MetricUndefinedError("KL undefined for an all-zero histogram without smoothing")
    ph = p.counts + smoothing_eps
    qh = q.counts + smoothing_eps
    ph = ph / ph.sum()
    qh = qh / qh.sum()
    total = 0.0
    for pi, qi in zip(ph, qh):
        if pi == 0.0:
            continue
        if qi == 0.0:
            return math.inf
        total += pi * math.log(pi / qi)
    return total


# ---------------------------------------------------------------------------
# Aggregate reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """All measures computable for one reference/hypothesis pair."""

    auc: float | None = None
    nss: float | None = None
    string_edit: int | None = None
    stde: float | None = None
    kl_amplitude: float | None = None

    FIELDS = ("auc", "nss", "string_edit", "stde", "kl_amplitude")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def evaluate_pair(
    reference: Scanpath,
    hypothesis: Scanpath,
    saliency: SaliencyMap | None = None,
    *,
    rows: int = DEFAULT_QUANTIZER_ROWS,
    cols: int = DEFAULT_QUANTIZER_COLS,
    k_max: int = DEFAULT_K_MAX,
    bins: int = DEFAULT_AMPLITUDE_BINS,
    smoothing_eps: float = DEFAULT_SMOOTHING_EPS,
) -> MetricReport:
    """Compute every metric the inputs allow; missing inputs leave fields None."""
    if reference.grid != hypothesis.grid:
        raise ValidationError("reference and hypothesis scanpaths must share one grid")
    if saliency is not None and saliency.grid != reference.grid:
        raise ValidationError("saliency grid must match the scanpath grid")

    quantizer = GridQuantizer(rows=rows, cols=cols, grid=reference.grid)
    se = string_edit(reference, hypothesis, quantizer)
    st = stde(reference, hypothesis, k_max) if len(reference) and len(hypothesis) else None

    auc_v = nss_v = None
    if saliency is not None and len(reference):
        auc_v = auc_judd(saliency, reference.fixations)
        nss_v = nss(saliency, reference.fixations)

    kl_v = None
    ref_amp = saccade_amplitudes(reference)
    hyp_amp = saccade_amplitudes(hypothesis)
    if ref_amp.size and hyp_amp.size:
        kl_v = kl_divergence(
            amplitude_histogram(ref_amp, bins), amplitude_histogram(hyp_amp, bins), smoothing_eps
        )
    return MetricReport(auc=auc_v, nss=nss_v, string_edit=se, stde=st, kl_amplitude=kl_v)


def evaluate_batch(pairs, **config) -> tuple[list[tuple[str, MetricReport]], dict, dict]:
    """Evaluate (id, reference, hypothesis, saliency) tuples.

    Returns per-pair reports, the column means over available values, and
    a pooled amplitude-KL summary computed over all saccades at once.
    """
    rows = [(pid, evaluate_pair(ref, hyp, sal, **config)) for pid, ref, hyp, sal in pairs]
    means: dict[str, float | None] = {}
    for name in MetricReport.FIELDS:
        values = [getattr(rep, name) for _, rep in rows if getattr(rep, name) is not None]
        means[name] = float(np.mean(values)) if values else None

    bins = config.get("bins", DEFAULT_AMPLITUDE_BINS)
    eps = config.get("smoothing_eps", DEFAULT_SMOOTHING_EPS)
    ref_amp = np.concatenate([saccade_amplitudes(ref) for _, ref, _, _ in pairs]) if pairs else np.empty(0)
    hyp_amp = np.concatenate([saccade_amplitudes(hyp) for _, _, hyp, _ in pairs]) if pairs else np.empty(0)
    pooled = {
        "bins": bins,
        "n_reference_saccades": int(ref_amp.size),
        "n_hypothesis_saccades": int(hyp_amp.size),
        "kl_nats": (
            kl_divergence(amplitude_histogram(ref_amp, bins), amplitude_histogram(hyp_amp, bins), eps)
            if ref_amp.size and hyp_amp.size
            else None
        ),
    }
    return rows, means, pooled
