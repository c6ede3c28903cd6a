import itertools
import logging

import numpy as np
import pytest

from helpers import random_pair
from sgsd.der import DerBreakdown, score_der
from sgsd.selector import (
    CombinationMode,
    DetectionMetrics,
    SelectionError,
    combine_flags,
    corpus_der,
    detection_metrics,
    evaluate_detection,
    format_detection_table,
    is_poor_separation,
    oracle_choice,
    oracle_select,
    poor_separation_labels,
    select,
    select_one,
)
from sgsd.strategies import Thresholds
from sgsd.timeline import Annotation


def ann(rid="rec", **spans):
    return Annotation.from_dict(rid, spans)


@pytest.mark.parametrize("f1, f2, f3", list(itertools.product([False, True], repeat=3)))
def test_truth_table(f1, f2, f3):
    v = {1: f1, 2: f2, 3: f3}
    assert combine_flags(v, "S1") == f1
    assert combine_flags(v, "S2") == f2
    assert combine_flags(v, "S3") == f3
    assert combine_flags(v, "S1_AND_2") == (f1 or f2)
    assert combine_flags(v, "VOTE_1_2_3") == (f1 + f2 + f3 >= 2)


def test_mode_parse_aliases():
    assert CombinationMode.parse("sgsd3") is CombinationMode.S3
    assert CombinationMode.parse("S1&2") is CombinationMode.S1_AND_2
    assert CombinationMode.parse("vote") is CombinationMode.VOTE_1_2_3
    with pytest.raises(SelectionError):
        CombinationMode.parse("S4")


def test_combine_requires_strategies():
    with pytest.raises(SelectionError):
        combine_flags({1: True}, "VOTE_1_2_3")
    with pytest.raises(SelectionError):
        combine_flags({1: True, 2: True, 3: True}, "ORACLE")


def _corpus(n=6, seed=0):
    rng = np.random.default_rng(seed)
    ssd, csd = {}, {}
    for i in range(n):
        c, s = random_pair(rng, rid=f"r{i}", min_speakers=1, max_speakers=3)
        csd[c.recording_id], ssd[s.recording_id] = c, s
    return ssd, csd


def test_all_flagged_returns_csd():
    ssd, csd = _corpus()
    report = select(ssd, csd, Thresholds(1.0, 0.0, 0.0), mode="S2")
    assert report.selected == csd
    assert report.n_csd == len(csd)


def test_none_flagged_returns_ssd():
    # random SSD can exceed 100% DER and stay flagged even at th3 = 1
    _, csd = _corpus()
    same = {rid: a.relabel({s: s.upper() for s in a.speakers}) for rid, a in csd.items()}
    report = select(same, csd, Thresholds(0.0, 1.0, 0.5), mode="S3")
    assert report.selected == same
    assert report.n_ssd == len(csd)


def test_identical_inputs_keep_ssd():
    a = ann(A=[(0, 3)], B=[(3, 6)])
    sel = select_one(a.relabel({"A": "stream1", "B": "stream2"}), a)
    assert sel.chosen_system == "SSD" and not sel.flagged


def test_degenerate_ssd_goes_to_csd(caplog):
    csd = ann(A=[(0, 3)], B=[(3, 6)])
    with caplog.at_level(logging.WARNING):
        sel = select_one(Annotation("rec"), csd, mode="S3")
    assert sel.chosen_system == "CSD"
    assert "degenerate" in caplog.text


def test_mismatched_recordings():
    with pytest.raises(SelectionError, match="missing from CSD: b"):
        select({"a": Annotation("a"), "b": Annotation("b")}, {"a": Annotation("a")})


def test_order_invariance():
    ssd, csd = _corpus(8, seed=3)
    rev_ssd = dict(reversed(list(ssd.items())))
    rev_csd = dict(reversed(list(csd.items())))
    for mode in ("S1", "S3", "VOTE_1_2_3"):
        assert select(ssd, csd, mode=mode).to_dict() == select(rev_ssd, rev_csd, mode=mode).to_dict()


def test_oracle_choice_and_ties():
    good, bad = DerBreakdown(1, 0, 0, 10), DerBreakdown(5, 0, 0, 10)
    assert not oracle_choice(good, bad)  # SSD better, keep SSD
    assert oracle_choice(bad, good)
    assert oracle_choice(good, DerBreakdown(2, 0, 0, 20))  # equal DER: CSD
    assert not is_poor_separation(good, DerBreakdown(2, 0, 0, 20))


def test_oracle_is_lower_bound():
    ref, ssd, csd = {}, {}, {}
    rng = np.random.default_rng(11)
    for i in range(10):
        r, s = random_pair(rng, rid=f"r{i}", min_speakers=1)
        _, c = random_pair(rng, rid=f"r{i}", min_speakers=1)
        ref[r.recording_id], ssd[s.recording_id], csd[c.recording_id] = r, s, c
    oracle = corpus_der(oracle_select(ssd, csd, ref).selected, ref)
    for mode in ("S1", "S2", "S3", "S1_AND_2", "VOTE_1_2_3"):
        assert oracle.der <= corpus_der(select(ssd, csd, mode=mode).selected, ref).der + 1e-12
    assert oracle.der <= corpus_der(csd, ref).der
    assert oracle.der <= corpus_der(ssd, ref).der


def test_select_oracle_mode_needs_reference():
    ssd, csd = _corpus(2)
    with pytest.raises(SelectionError):
        select(ssd, csd, mode="ORACLE")
    report = select(ssd, csd, mode="ORACLE", reference=csd)
    # CSD scores 0 against itself, so it always wins or ties
    assert report.n_csd == 2


def test_detection_metrics_counts():
    flags = {"a": True, "b": True, "c": False, "d": False}
    pos = {"a": True, "b": False, "c": True, "d": False}
    m = detection_metrics(flags, pos)
    assert (m.true_positives, m.false_positives, m.true_negatives, m.false_negatives) == (1, 1, 1, 1)
    assert m.recall == m.precision == m.accuracy == 0.5


def test_undefined_precision_and_recall(caplog):
    with caplog.at_level(logging.WARNING):
        m = detection_metrics({"a": False}, {"a": False})
    assert m.precision == 1.0 and m.recall == 1.0 and m.accuracy == 1.0
    assert "precision undefined" in caplog.text and "recall undefined" in caplog.text
    with pytest.raises(SelectionError):
        detection_metrics({"a": True}, {"b": True})


def test_evaluate_detection_ground_truth():
    ref = {"r": ann("r", A=[(0, 10)], B=[(10, 20)])}
    csd = {"r": ann("r", A=[(0, 10)], B=[(10, 20)])}
    ssd = {"r": ann("r", X=[(0, 20)])}
    assert poor_separation_labels(ssd, csd, ref) == {"r": True}
    m = evaluate_detection({"r": True}, ssd, csd, ref)
    assert m.true_positives == 1 and m.accuracy == 1.0
    # equal DER is not a positive
    assert poor_separation_labels(csd, csd, ref) == {"r": False}


def test_degenerate_reference_positive():
    # empty reference: any SSD false alarm makes it infinitely worse than an empty CSD
    ref = {"r": Annotation("r")}
    assert poor_separation_labels({"r": ann("r", X=[(0, 1)])}, {"r": Annotation("r")}, ref) == {"r": True}


def test_report_serialization():
    ssd, csd = _corpus(3)
    d = select(ssd, csd, mode="VOTE").to_dict()
    assert d["mode"] == "VOTE_1_2_3"
    assert d["summary"]["recordings"] == 3
    assert [r["recording_id"] for r in d["recordings"]] == sorted(ssd)
    assert set(d["recordings"][0]["verdicts"]) == {"1", "2", "3"}


def test_detection_table():
    text = format_detection_table([("S3", DetectionMetrics(3, 1, 5, 1))])
    assert "Recall" in text and "0.75" in text and "0.80" in text


def test_corpus_der_of_selection():
    ref = {"r": ann("r", A=[(0, 10)])}
    assert corpus_der(ref, ref).der == 0.0
    assert corpus_der({"r": Annotation("r")}, ref).der == score_der(ref["r"], Annotation("r")).der
