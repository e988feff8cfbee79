"""Crowd-evaluation statistics: Fleiss' kappa and the judge-accuracy report.

The input is the append-only JSON-lines label store written by the
annotation service: one record per judgment with the ground truth joined
in. One session is one annotator.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .types import MetricUndefinedError, PROVENANCES, ValidationError

CATEGORIES = PROVENANCES  # ("human", "synthetic")
DEFAULT_SESSION_SIZE = 20
DEFAULT_EXPERTISE_THRESHOLD = 3  # paper protocol: experts rate 3..5, naive 1..2


@dataclass(frozen=True)
class JudgmentRecord:
    """One stored judgment with server-side truth."""

    session_id: str
    stimulus_id: str
    label: str
    truth: str
    expertise: int
    education: str = ""
    submitted_at: float = 0.0

    def __post_init__(self):
        if self.label not in CATEGORIES:
            raise ValidationError(f"label must be one of {CATEGORIES}, got {self.label!r}")
        if self.truth not in CATEGORIES:
            raise ValidationError(f"truth must be one of {CATEGORIES}, got {self.truth!r}")
        if self.expertise not in (1, 2, 3, 4, 5):
            raise ValidationError(f"expertise must be in 1..5, got {self.expertise!r}")


def load_store(path) -> list[JudgmentRecord]:
    """Read the JSON-lines label store."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
            records.append(
                JudgmentRecord(
                    session_id=str(doc["session_id"]),
                    stimulus_id=str(doc["stimulus_id"]),
                    label=doc["label"],
                    truth=doc["truth"],
                    expertise=int(doc["expertise"]),
                    education=str(doc.get("education", "")),
                    submitted_at=float(doc.get("submitted_at", 0.0)),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad judgment record: {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# Fleiss' kappa
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JudgmentMatrix:
    """Per-item category counts with a constant number of raters per item."""

    counts: np.ndarray  # (N items, categories) integer counts

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] < 2:
            raise ValidationError(f"judgment matrix must be (N >= 1, k >= 2), got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValidationError("judgment counts must be nonnegative")
        row_sums = counts.sum(axis=1)
        if np.any(row_sums != row_sums[0]):
            raise ValidationError("every item must have the same number of ratings")

    @property
    def n_items(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_raters(self) -> int:
        return int(self.counts[0].sum())


def fleiss_kappa(matrix: JudgmentMatrix) -> float:
    """Chance-corrected agreement for multiple raters over categorical items.

    With n raters per item, per-item agreement is the fraction of agreeing
    rater pairs; chance agreement is the sum of squared category
    prevalences. A fully unanimous table with a single used category has
    no chance correction: it scores 1 when agreement is perfect and is
    undefined otherwise.
    """
    n = matrix.n_raters
    if n < 2:
        raise MetricUndefinedError(f"Fleiss' kappa needs >= 2 raters per item, got {n}")
    counts = matrix.counts.astype(np.float64)
    p_i = (counts * (counts - 1)).sum(axis=1) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (matrix.n_items * n)
    p_e = float((p_j ** 2).sum())
    if p_e >= 1.0:
        if p_bar == 1.0:
            return 1.0
        raise MetricUndefinedError("kappa undefined: chance agreement is 1 but observed agreement is not")
    return (p_bar - p_e) / (1.0 - p_e)


def judgment_matrix(records, categories=CATEGORIES) -> tuple[JudgmentMatrix | None, int]:
    """Build a constant-rater matrix from records with uneven coverage.

    Items (stimuli) are rated by however many sessions drew them; Fleiss'
    kappa needs a constant rating count, so the matrix keeps the items
    whose count equals the most common count >= 2 (ties resolved to the
    larger count). Returns the matrix (None if nothing qualifies) and the
    number of multiply-rated items that were dropped.
    """
    by_item: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        by_item[rec.stimulus_id][rec.label] += 1
    sizes = Counter(sum(c.values()) for c in by_item.values() if sum(c.values()) >= 2)
    if not sizes:
        return None, 0
    best = max(sizes.items(), key=lambda kv: (kv[1], kv[0]))[0]
    kept = [item for item, c in sorted(by_item.items()) if sum(c.values()) == best]
    excluded = sum(1 for c in by_item.values() if 2 <= sum(c.values()) != best)
    counts = np.array([[by_item[item][cat] for cat in categories] for item in kept], dtype=np.int64)
    return JudgmentMatrix(counts=counts), excluded


def _kappa_or_none(records) -> float | None:
    matrix, _ = judgment_matrix(records)
    if matrix is None:
        return None
    try:
        return fleiss_kappa(matrix)
    except MetricUndefinedError:
        return None


# ---------------------------------------------------------------------------
# Crowd report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupStat:
    """Mean and population standard deviation over annotators."""

    mean: float
    std: float
    n: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}

    def fmt(self) -> str:
        return f"{self.mean:.2f} ({self.std:.2f})"


@dataclass(frozen=True)
class CrowdReport:
    overall_acc: GroupStat | None
    expert_acc: GroupStat | None
    naive_acc: GroupStat | None
    human_labeled_human: GroupStat | None
    synthetic_labeled_human: GroupStat | None
    labeled_human: GroupStat | None
    kappa_overall: float | None
    kappa_expert: float | None
    kappa_naive: float | None
    kappa_human_items: float | None
    kappa_synthetic_items: float | None
    n_annotators: int
    n_judgments: int
    complete_sessions: int
    incomplete_sessions: int

    @classmethod
    def empty(cls) -> "CrowdReport":
        return cls(*([None] * 11), n_annotators=0, n_judgments=0, complete_sessions=0, incomplete_sessions=0)

    def as_dict(self) -> dict:
        def stat(s):
            return s.as_dict() if s is not None else None

        return {
            "overall_acc": stat(self.overall_acc),
            "expert_acc": stat(self.expert_acc),
            "naive_acc": stat(self.naive_acc),
            "human_labeled_human": stat(self.human_labeled_human),
            "synthetic_labeled_human": stat(self.synthetic_labeled_human),
            "labeled_human": stat(self.labeled_human),
            "kappa_overall": self.kappa_overall,
            "kappa_expert": self.kappa_expert,
            "kappa_naive": self.kappa_naive,
            "kappa_human_items": self.kappa_human_items,
            "kappa_synthetic_items": self.kappa_synthetic_items,
            "n_annotators": self.n_annotators,
            "n_judgments": self.n_judgments,
            "complete_sessions": self.complete_sessions,
            "incomplete_sessions": self.incomplete_sessions,
        }


def _group_stat(values) -> GroupStat | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    arr = np.asarray(values, dtype=np.float64)
    return GroupStat(mean=float(arr.mean()), std=float(arr.std()), n=arr.size)


def crowd_report(
    records,
    expertise_threshold: int = DEFAULT_EXPERTISE_THRESHOLD,
    session_size: int = DEFAULT_SESSION_SIZE,
) -> CrowdReport:
    """Aggregate the label store into accuracy and agreement statistics.

    Accuracies are per-annotator fractions averaged with population std
    across annotators. Kappas use only sessions that judged all
    ``session_size`` assigned items, in line with the constant-rater
    requirement.
    """
    records = list(records)
    if not records:
        raise MetricUndefinedError("the label store is empty")

    by_session: dict[str, list[JudgmentRecord]] = defaultdict(list)
    for rec in records:
        by_session[rec.session_id].append(rec)

    acc, hlh, slh, lab_h, expertise = {}, {}, {}, {}, {}
    for sid, recs in by_session.items():
        expertise[sid] = recs[0].expertise
        acc[sid] = float(np.mean([r.label == r.truth for r in recs]))
        human = [r for r in recs if r.truth == "human"]
        synth = [r for r in recs if r.truth == "synthetic"]
        hlh[sid] = float(np.mean([r.label == "human" for r in human])) if human else None
        slh[sid] = float(np.mean([r.label == "human" for r in synth])) if synth else None
        lab_h[sid] = float(np.mean([r.label == "human" for r in recs]))

    sessions = sorted(by_session)
    experts = [s for s in sessions if expertise[s] >= expertise_threshold]
    naive = [s for s in sessions if expertise[s] < expertise_threshold]
    complete = {s for s in sessions if len(by_session[s]) >= session_size}

    kappa_records = [r for s in complete for r in by_session[s]]
    return CrowdReport(
        overall_acc=_group_stat([acc[s] for s in sessions]),
        expert_acc=_group_stat([acc[s] for s in experts]),
        naive_acc=_group_stat([acc[s] for s in naive]),
        human_labeled_human=_group_stat([hlh[s] for s in sessions]),
        synthetic_labeled_human=_group_stat([slh[s] for s in sessions]),
        labeled_human=_group_stat([lab_h[s] for s in sessions]),
        kappa_overall=_kappa_or_none(kappa_records),
        kappa_expert=_kappa_or_none([r for r in kappa_records if expertise[r.session_id] >= expertise_threshold]),
        kappa_naive=_kappa_or_none([r for r in kappa_records if expertise[r.session_id] < expertise_threshold]),
        kappa_human_items=_kappa_or_none([r for r in kappa_records if r.truth == "human"]),
        kappa_synthetic_items=_kappa_or_none([r for r in kappa_records if r.truth == "synthetic"]),
        n_annotators=len(sessions),
        n_judgments=len(records),
        complete_sessions=len(complete),
        incomplete_sessions=len(sessions) - len(complete),
    )


def format_report(report: CrowdReport) -> str:
    """Plain-text table with the five accuracy columns plus the kappa block."""

    def cell(stat: GroupStat | None) -> str:
        return stat.fmt() if stat is not None else "-"

    def kcell(v: float | None) -> str:
        return f"{v:.3f}" if v is not None else "-"

    headers = [
        "Overall",
        "Expert evaluators",
        "Naive evaluators",
        "Human videos labeled as human",
        "Synthetic videos labeled as human",
    ]
    cells = [
        cell(report.overall_acc),
        cell(report.expert_acc),
        cell(report.naive_acc),
        cell(report.human_labeled_human),
        cell(report.synthetic_labeled_human),
    ]
    widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
    lines = [
        " | ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "-+-".join("-" * w for w in widths),
        " | ".join(c.ljust(w) for c, w in zip(cells, widths)),
        "",
        f"labeled human: {cell(report.labeled_human)}",
        f"kappa overall: {kcell(report.kappa_overall)}  expert: {kcell(report.kappa_expert)}  "
        f"naive: {kcell(report.kappa_naive)}",
        f"kappa human items: {kcell(report.kappa_human_items)}  "
        f"synthetic items: {kcell(report.kappa_synthetic_items)}",
        f"annotators: {report.n_annotators}  judgments: {report.n_judgments}  "
        f"complete sessions: {report.complete_sessions}  incomplete: {report.incomplete_sessions}",
    ]
    return "\n".join(lines) + "\n"
