from __future__ import annotations

import json
import random

import pytest
from conftest import make_trace

from vulnreason.dag import parse_trace
from vulnreason.metrics import (
    CODEBOOK,
    CODEBOOK_ORDER,
    Category,
    EmptyCorpus,
    ErrorLabelSet,
    InconsistentFlags,
    OutcomeRow,
    Reasoning,
    UnknownCode,
    UnpairedSample,
    classify_outcome,
    closeness_rate,
    detection_metrics,
    error_heatmap,
    heatmap_csv,
    outcome_counts,
    pairwise_outcomes,
    read_outcomes,
    reasoning_metrics,
    write_outcomes,
)

ALL_ROWS = [
    (1, 1, "MATCH", Category.TP),
    (1, 1, "MISMATCH", Category.FN),
    (1, 0, "NOT_APPLICABLE", Category.FN),
    (0, 0, "NOT_APPLICABLE", Category.TN),
    (0, 1, "MISMATCH", Category.FP),
    (0, 1, "MATCH", Category.TN_STAR),
]


def test_exhaustive_outcome_table():
    for g, p, r, expected in ALL_ROWS:
        assert classify_outcome(g, p, r).category is expected


def test_outcome_table_is_total_and_single_valued():
    legal = set()
    for g in (0, 1):
        for p in (0, 1):
            flags = ("NOT_APPLICABLE",) if p == 0 else ("MATCH", "MISMATCH")
            for r in flags:
                legal.add((g, p, r, classify_outcome(g, p, r).category))
    assert len(legal) == 6
    assert {row[:3] for row in legal} == {row[:3] for row in ALL_ROWS}


def test_inconsistent_flags():
    with pytest.raises(InconsistentFlags):
        classify_outcome(1, 0, "MATCH")  # judge never consulted on negatives
    with pytest.raises(InconsistentFlags):
        classify_outcome(0, 1, "NOT_APPLICABLE")  # positive needs a flag
    with pytest.raises(InconsistentFlags):
        classify_outcome(2, 1, "MATCH")


def records(*categories):
    table = {
        Category.TP: (1, 1, "MATCH"),
        Category.FN: (1, 1, "MISMATCH"),
        Category.TN: (0, 0, "NOT_APPLICABLE"),
        Category.FP: (0, 1, "MISMATCH"),
        Category.TN_STAR: (0, 1, "MATCH"),
    }
    return [classify_outcome(*table[c]) for c in categories]


def test_reasoning_metrics_hand_computed():
    recs = records(Category.TP, Category.FN, Category.TN, Category.TN)
    metrics = reasoning_metrics(recs)
    assert metrics.precision == pytest.approx(1.0)
    assert metrics.recall == pytest.approx(0.5)
    assert metrics.f1 == pytest.approx(2 * 1.0 * 0.5 / 1.5, abs=1e-9)
    assert metrics.accuracy == pytest.approx(3 / 4)


def test_reasoning_metrics_all_tp():
    metrics = reasoning_metrics(records(Category.TP, Category.TP))
    assert (metrics.accuracy, metrics.precision, metrics.recall, metrics.f1) == (1, 1, 1, 1)


def test_reasoning_metrics_zero_denominators():
    metrics = reasoning_metrics(records(Category.FP, Category.FP, Category.FP))
    assert metrics.precision == 0.0
    assert metrics.recall == 0.0
    assert metrics.f1 == 0.0


def test_tn_star_pools_into_tn():
    metrics = reasoning_metrics(records(Category.TN_STAR, Category.TN_STAR))
    assert metrics.accuracy == 1.0
    # and precision denominator excludes the reclassified records
    assert metrics.precision == 0.0


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        reasoning_metrics([])
    with pytest.raises(EmptyCorpus):
        detection_metrics([])
    with pytest.raises(EmptyCorpus):
        closeness_rate([])


def test_detection_vs_reasoning_divergence():
    # one (1,1,MISMATCH) record: detection is perfect, reasoning scores zero
    rec = classify_outcome(1, 1, "MISMATCH")
    detection = detection_metrics([(rec.ground_truth, rec.prediction)])
    reasoning = reasoning_metrics([rec])
    assert detection.f1 == 1.0
    assert reasoning.f1 == 0.0


def test_detection_metrics_basics():
    assert detection_metrics([(1, 1), (0, 0)]).accuracy == 1.0
    assert detection_metrics([(1, 0), (0, 1)]).accuracy == 0.0


def test_reasoning_tp_never_exceeds_detection_tp():
    rng = random.Random(1)
    for _ in range(100):
        recs = []
        for _ in range(rng.randint(1, 30)):
            g = rng.randint(0, 1)
            p = rng.randint(0, 1)
            r = "NOT_APPLICABLE" if p == 0 else rng.choice(("MATCH", "MISMATCH"))
            recs.append(classify_outcome(g, p, r))
        reasoning_tp = outcome_counts(recs)[Category.TP]
        detection_tp = sum(1 for x in recs if x.ground_truth == 1 and x.prediction == 1)
        assert reasoning_tp <= detection_tp


def test_metrics_permutation_invariant():
    rng = random.Random(8)
    recs = records(*([Category.TP] * 3 + [Category.FP] * 2 + [Category.FN] * 4
                     + [Category.TN] * 5 + [Category.TN_STAR]))
    shuffled = recs[:]
    rng.shuffle(shuffled)
    assert reasoning_metrics(recs) == reasoning_metrics(shuffled)


# ---------------------------------------------------------------------------
# pair-wise analysis


def test_pairwise_match_match():
    table = pairwise_outcomes([(records(Category.TP)[0], records(Category.TN)[0])])
    assert table[("MATCH", "MATCH")] == 1
    assert sum(table.values()) == 1


def test_pairwise_mismatch_mismatch():
    table = pairwise_outcomes([(records(Category.FN)[0], records(Category.FP)[0])])
    assert table[("MISMATCH", "MISMATCH")] == 1


def test_pairwise_four_cells():
    pairs = [
        (records(Category.TP)[0], records(Category.TN)[0]),
        (records(Category.TP)[0], records(Category.FP)[0]),
        (records(Category.FN)[0], records(Category.TN_STAR)[0]),  # TN* = patched MATCH
        (records(Category.FN)[0], records(Category.FP)[0]),
    ]
    table = pairwise_outcomes(pairs)
    assert all(count == 1 for count in table.values())
    assert sum(table.values()) == 4


def test_pairwise_rejects_misordered_pair():
    with pytest.raises(UnpairedSample):
        pairwise_outcomes([(records(Category.TN)[0], records(Category.TP)[0])])


# ---------------------------------------------------------------------------
# error labels and heatmap


def test_codebook_has_twelve_codes():
    assert len(CODEBOOK) == 12
    assert CODEBOOK_ORDER == ("FE", "CS1", "CS2", "CS3", "CS4",
                              "AR1", "AR2", "AR3", "AR4", "GB1", "GB2", "GB3")
    assert set(CODEBOOK) == set(CODEBOOK_ORDER)


def test_error_label_set_bounds():
    assert ErrorLabelSet(frozenset({"CS2", "AR1"})).ordered() == ("CS2", "AR1")
    with pytest.raises(ValueError):
        ErrorLabelSet(frozenset())
    with pytest.raises(ValueError):
        ErrorLabelSet(frozenset({"FE", "CS1", "CS2", "CS3", "CS4"}))
    with pytest.raises(UnknownCode):
        ErrorLabelSet(frozenset({"ZZ9"}))


def test_heatmap_counts_and_csv():
    labels = {
        "s1": ("model-a", ErrorLabelSet(frozenset({"CS2", "AR1"}))),
        "s2": ("model-a", ErrorLabelSet(frozenset({"CS2"}))),
        "s3": ("model-b", ErrorLabelSet(frozenset({"GB1"}))),
    }
    matrix = error_heatmap(labels)
    assert matrix["model-a"]["CS2"] == 2
    assert matrix["model-a"]["AR1"] == 1
    assert matrix["model-b"]["GB1"] == 1
    assert sum(matrix["model-b"].values()) == 1
    csv_text = heatmap_csv(matrix)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "model," + ",".join(CODEBOOK_ORDER)
    assert lines[1].startswith("model-a,")
    # column totals equal the multiset cardinality of codes
    total = sum(sum(row.values()) for row in matrix.values())
    assert total == 4


def test_heatmap_empty():
    assert error_heatmap({}) == {}
    assert heatmap_csv({}) == "model," + ",".join(CODEBOOK_ORDER) + "\n"


# ---------------------------------------------------------------------------
# closeness rate


def test_closeness_rate_mixed():
    rng = random.Random(21)
    closed = parse_trace(make_trace("c", [
        (1, "source", []), (2, "verified_sink", [1]),
    ]))
    open_dag = parse_trace(make_trace("o", [
        (1, "source", []), (2, "source", []), (3, "verified_sink", [1]),
    ]))
    dags = [closed] * 4 + [open_dag] * 6
    rng.shuffle(dags)
    assert closeness_rate(dags) == pytest.approx(40.0)
    assert closeness_rate([closed]) == 100.0
    assert closeness_rate([open_dag]) == 0.0


# ---------------------------------------------------------------------------
# JSONL round trip


def test_outcome_jsonl_roundtrip(tmp_path):
    rows = [
        OutcomeRow("s1", classify_outcome(1, 1, "MATCH"), lineage_id="L1", model="m"),
        OutcomeRow("s2", classify_outcome(0, 1, "MATCH"), lineage_id="L1", model="m"),
    ]
    path = tmp_path / "outcomes.jsonl"
    write_outcomes(path, rows)
    loaded = read_outcomes(path)
    assert loaded == rows


def test_outcome_jsonl_rejects_inconsistent_category(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({
        "sample_id": "x", "ground_truth": 1, "prediction": 1,
        "reasoning": "MATCH", "category": "FN",
    }) + "\n")
    with pytest.raises(InconsistentFlags):
        read_outcomes(path)
