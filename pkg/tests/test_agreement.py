import json

import numpy as np
import pytest

from gravscan import (
    CrowdReport,
    JudgmentMatrix,
    JudgmentRecord,
    MetricUndefinedError,
    ValidationError,
    crowd_report,
    fleiss_kappa,
    format_report,
    load_store,
)
from gravscan.agreement import judgment_matrix


def test_kappa_perfect_agreement_mixed_categories():
    m = JudgmentMatrix(counts=[[5, 0], [0, 5], [5, 0], [0, 5]])
    assert fleiss_kappa(m) == 1.0


def test_kappa_two_item_hand_example():
    # item 1: both raters say human; item 2: split
    # P_bar = 0.5, p = (3/4, 1/4), Pe = 5/8, kappa = -1/3
    m = JudgmentMatrix(counts=[[2, 0], [1, 1]])
    assert fleiss_kappa(m) == pytest.approx(-1.0 / 3.0, abs=1e-9)


def test_kappa_random_labels_is_near_zero():
    rng = np.random.default_rng(51)
    n_items, n_raters = 1000, 5
    human = rng.binomial(n_raters, 0.5, size=n_items)
    m = JudgmentMatrix(counts=np.stack([human, n_raters - human], axis=1))
    assert abs(fleiss_kappa(m)) <= 0.05


def test_kappa_category_relabeling_invariance():
    rng = np.random.default_rng(53)
    human = rng.binomial(4, 0.3, size=50)
    counts = np.stack([human, 4 - human], axis=1)
    assert fleiss_kappa(JudgmentMatrix(counts=counts)) == pytest.approx(
        fleiss_kappa(JudgmentMatrix(counts=counts[:, ::-1])), abs=1e-12
    )


def test_kappa_stays_in_range_on_random_matrices():
    rng = np.random.default_rng(57)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        human = rng.integers(0, n + 1, size=rng.integers(1, 30))
        m = JudgmentMatrix(counts=np.stack([human, n - human], axis=1))
        try:
            k = fleiss_kappa(m)
        except MetricUndefinedError:
            continue
        assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12


def test_kappa_unanimous_single_category():
    # everyone picks the same category everywhere: chance agreement is 1
    # and so is observed agreement; defined as perfect agreement
    assert fleiss_kappa(JudgmentMatrix(counts=[[3, 0], [3, 0]])) == 1.0


def test_matrix_validation():
    with pytest.raises(ValidationError):
        JudgmentMatrix(counts=[[2, 0], [1, 0]])  # unequal raters
    with pytest.raises(ValidationError):
        JudgmentMatrix(counts=[[2, -1]])
    with pytest.raises(MetricUndefinedError):
        fleiss_kappa(JudgmentMatrix(counts=[[1, 0]]))  # single rater


# ---------------------------------------------------------------------------
# store aggregation
# ---------------------------------------------------------------------------

def _records(sessions):
    """sessions: {sid: (expertise, [(stimulus, label, truth), ...])}"""
    out = []
    for sid, (level, rows) in sessions.items():
        for stim, label, truth in rows:
            out.append(
                JudgmentRecord(
                    session_id=sid, stimulus_id=stim, label=label, truth=truth, expertise=level
                )
            )
    return out


def test_perfect_annotator_report():
    recs = _records({"s1": (4, [("a", "human", "human"), ("b", "synthetic", "synthetic")])})
    report = crowd_report(recs, session_size=2)
    assert report.overall_acc.mean == 1.0
    assert report.overall_acc.std == 0.0
    assert report.n_annotators == 1
    assert report.kappa_overall is None  # no stimulus shared by >= 2 raters


def test_group_means_and_population_std():
    # accuracies 0.6 and 0.4 -> mean 0.5, population std 0.1
    rows1 = [(f"i{k}", "human" if k < 3 else "synthetic", "human") for k in range(5)]
    rows2 = [(f"i{k}", "human" if k < 2 else "synthetic", "human") for k in range(5)]
    recs = _records({"s1": (5, rows1), "s2": (1, rows2)})
    report = crowd_report(recs, session_size=5)
    assert report.overall_acc.mean == pytest.approx(0.5)
    assert report.overall_acc.std == pytest.approx(0.1)
    assert report.expert_acc.mean == pytest.approx(0.6)
    assert report.naive_acc.mean == pytest.approx(0.4)
    # overall mean lies between the group means
    assert report.naive_acc.mean <= report.overall_acc.mean <= report.expert_acc.mean


def test_truth_class_columns():
    rows = [
        ("a", "human", "human"),
        ("b", "synthetic", "human"),
        ("c", "human", "synthetic"),
        ("d", "synthetic", "synthetic"),
    ]
    report = crowd_report(_records({"s": (3, rows)}), session_size=4)
    assert report.human_labeled_human.mean == pytest.approx(0.5)
    assert report.synthetic_labeled_human.mean == pytest.approx(0.5)
    assert report.labeled_human.mean == pytest.approx(0.5)


def test_incomplete_sessions_excluded_from_kappa():
    # two complete sessions agree on everything; a third, incomplete
    # session disagrees but must not affect kappa
    items = [("a", "human"), ("b", "synthetic"), ("c", "human")]
    full1 = [(i, t, t) for i, t in items]
    full2 = [(i, t, t) for i, t in items]
    partial = [("a", "synthetic", "human")]
    recs = _records({"s1": (5, full1), "s2": (2, full2), "s3": (3, partial)})
    report = crowd_report(recs, session_size=3)
    assert report.complete_sessions == 2
    assert report.incomplete_sessions == 1
    assert report.kappa_overall == 1.0
    assert report.n_annotators == 3  # accuracy stats keep everyone


def test_empty_store_raises_and_empty_report_exists():
    with pytest.raises(MetricUndefinedError):
        crowd_report([])
    empty = CrowdReport.empty()
    assert empty.n_annotators == 0
    assert empty.overall_acc is None


def test_judgment_matrix_mode_selection():
    # items rated by {2, 2, 3} raters: the modal count 2 wins, one item excluded
    recs = _records(
        {
            "s1": (3, [("a", "human", "human"), ("b", "human", "human"), ("c", "human", "human")]),
            "s2": (3, [("a", "human", "human"), ("b", "synthetic", "human"), ("c", "human", "human")]),
            "s3": (3, [("c", "human", "human")]),
        }
    )
    matrix, excluded = judgment_matrix(recs)
    assert matrix.n_raters == 2
    assert matrix.n_items == 2
    assert excluded == 1


def test_store_round_trip(tmp_path):
    recs = _records({"s1": (4, [("a", "human", "human"), ("b", "synthetic", "human")])})
    store = tmp_path / "store.jsonl"
    with store.open("w") as fh:
        for r in recs:
            fh.write(
                json.dumps(
                    {
                        "session_id": r.session_id,
                        "stimulus_id": r.stimulus_id,
                        "label": r.label,
                        "truth": r.truth,
                        "expertise": r.expertise,
                        "education": r.education,
                        "submitted_at": r.submitted_at,
                    }
                )
                + "\n"
            )
    assert load_store(store) == recs

    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"session_id": "x"}\n')
    with pytest.raises(ValidationError):
        load_store(bad)


def test_format_report_has_five_columns():
    rows = [("a", "human", "human"), ("b", "synthetic", "synthetic")]
    report = crowd_report(_records({"s1": (4, rows), "s2": (1, rows)}), session_size=2)
    text = format_report(report)
    header = text.splitlines()[0]
    assert header.count("|") == 4
    for name in ("Overall", "Expert", "Naive", "Human videos", "Synthetic videos"):
        assert name in header
    assert "kappa" in text
