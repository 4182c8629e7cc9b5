from __future__ import annotations

import json

import pytest
from conftest import make_trace

from vulnreason.cli import main
from vulnreason.metrics import CODEBOOK_ORDER


def jsonl(path, docs):
    path.write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in docs))
    return path


@pytest.fixture()
def trace_docs(example_trace_doc):
    open_doc = make_trace("open-1", [
        (1, "source", []),
        (2, "source", []),
        (3, "verified_sink", [1]),
    ])
    return [example_trace_doc, open_doc]


@pytest.fixture()
def corpus_docs(example_trace_doc):
    gt = {"cwe_id": "CWE-787", "root_cause": "boundary check lets 64 through",
          "fixing_pattern": "strict compare", "label": 1, "confidence": 5,
          "human_verified": False}
    return [
        {"sample_id": "toy-flawed-length-check", "label": 1,
         "source": "int f() { return 1; }", "lineage_id": "L1", "ground_truth": gt},
        {"sample_id": "open-1", "label": 1, "source": "int g() { return 2; }",
         "lineage_id": "L2", "ground_truth": gt},
    ]


def test_validate_ok(tmp_path, example_trace_doc, capsys):
    traces = jsonl(tmp_path / "traces.jsonl", [example_trace_doc])
    report = tmp_path / "report.jsonl"
    assert main(["validate", str(traces), "--report", str(report)]) == 0
    rows = [json.loads(l) for l in report.read_text().splitlines()]
    assert rows[0]["structural_ok"] is True
    assert (tmp_path / "report.jsonl.manifest.json").exists()


def test_validate_flags_bad_trace(tmp_path, example_trace_doc):
    bad = json.loads(json.dumps(example_trace_doc))
    bad["thinking"][5]["direct_dependent_steps"] = []
    bad["thinking"][5]["kind"] = "intermediate"
    traces = jsonl(tmp_path / "traces.jsonl", [example_trace_doc, bad])
    report = tmp_path / "report.jsonl"
    assert main(["validate", str(traces), "--report", str(report)]) == 1
    rows = [json.loads(l) for l in report.read_text().splitlines()]
    assert rows[0]["structural_ok"] and not rows[1]["structural_ok"]
    assert rows[1]["violations"]


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "absent.jsonl")]) == 2


def test_score_happy_path(tmp_path, trace_docs, corpus_docs, capsys):
    traces = jsonl(tmp_path / "traces.jsonl", trace_docs)
    corpus = jsonl(tmp_path / "corpus.jsonl", corpus_docs)
    out = tmp_path / "rewards.jsonl"
    code = main(["score", "--traces", str(traces), "--ground-truth", str(corpus),
                 "--out", str(out)])
    assert code == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 2
    closed = {r["sample_id"]: r for r in rows}
    assert closed["toy-flawed-length-check"]["total"] == pytest.approx(1.0)
    assert closed["open-1"]["close_indicator"] == 0
    summary = capsys.readouterr().out
    assert "closeness_rate=50.00%" in summary


def test_score_missing_ground_truth(tmp_path, trace_docs, corpus_docs, capsys):
    traces = jsonl(tmp_path / "traces.jsonl", trace_docs)
    corpus = jsonl(tmp_path / "corpus.jsonl", corpus_docs[:1])
    code = main(["score", "--traces", str(traces), "--ground-truth", str(corpus),
                 "--out", str(tmp_path / "r.jsonl")])
    assert code == 1
    assert "open-1" in capsys.readouterr().err


def test_score_weight_flags(tmp_path, trace_docs, corpus_docs):
    traces = jsonl(tmp_path / "t.jsonl", trace_docs[:1])
    corpus = jsonl(tmp_path / "c.jsonl", corpus_docs)
    out = tmp_path / "r.jsonl"
    assert main(["score", "--traces", str(traces), "--ground-truth", str(corpus),
                 "--omega-close", "0.5", "--omega-final", "0.5", "--out", str(out)]) == 0
    row = json.loads(out.read_text().splitlines()[0])
    assert row["total"] == pytest.approx(1.0)


def outcome_line(sid, lineage, g, p, r, model="model-a"):
    from vulnreason.metrics import classify_outcome

    record = classify_outcome(g, p, r)
    return {"sample_id": sid, "lineage_id": lineage, "model": model,
            "ground_truth": g, "prediction": p, "reasoning": r,
            "category": record.category.value}


def test_metrics_table3_fixture(tmp_path):
    rows = [
        outcome_line("a", "L1", 1, 1, "MATCH"),
        outcome_line("b", "L2", 1, 1, "MISMATCH"),
        outcome_line("c", "L3", 1, 0, "NOT_APPLICABLE"),
        outcome_line("d", "L1", 0, 0, "NOT_APPLICABLE"),
        outcome_line("e", "L2", 0, 1, "MISMATCH"),
        outcome_line("f", "L3", 0, 1, "MATCH"),
    ]
    outcomes = jsonl(tmp_path / "outcomes.jsonl", rows)
    out = tmp_path / "metrics.json"
    assert main(["metrics", "--outcomes", str(outcomes), "--out", str(out),
                 "--pairs"]) == 0
    result = json.loads(out.read_text())
    assert result["counts"] == {"TP": 1, "FN": 2, "TN": 1, "FP": 1, "TN*": 1}
    assert result["pairs"] == {
        "MATCH/MATCH": 1, "MATCH/MISMATCH": 0,
        "MISMATCH/MATCH": 1, "MISMATCH/MISMATCH": 1,
    }


def test_metrics_empty_file(tmp_path):
    outcomes = tmp_path / "empty.jsonl"
    outcomes.write_text("")
    assert main(["metrics", "--outcomes", str(outcomes)]) == 1


def test_metrics_orphan_pair(tmp_path, capsys):
    rows = [outcome_line("a", "L9", 1, 1, "MATCH")]
    outcomes = jsonl(tmp_path / "outcomes.jsonl", rows)
    assert main(["metrics", "--outcomes", str(outcomes), "--pairs"]) == 1
    assert "L9" in capsys.readouterr().err


def test_metrics_heatmap(tmp_path):
    rows = [outcome_line("a", "", 1, 1, "MATCH")]
    outcomes = jsonl(tmp_path / "outcomes.jsonl", rows)
    labels = jsonl(tmp_path / "labels.jsonl", [
        {"sample_id": "a", "model": "model-a", "codes": ["CS2", "AR1"]},
        {"sample_id": "b", "model": "model-b", "codes": ["GB1"]},
    ])
    heatmap = tmp_path / "heatmap.csv"
    assert main(["metrics", "--outcomes", str(outcomes), "--labels", str(labels),
                 "--heatmap", str(heatmap)]) == 0
    lines = heatmap.read_text().splitlines()
    assert lines[0] == "model," + ",".join(CODEBOOK_ORDER)
    assert len(lines) == 3


def test_perturb_deterministic_manifest(tmp_path, toy_corpus, toy_protected):
    corpus = jsonl(tmp_path / "corpus.jsonl", [
        {"sample_id": name, "label": 1, "source": src}
        for name, src in sorted(toy_corpus.items())
    ])
    protected = tmp_path / "protected.json"
    protected.write_text(json.dumps(toy_protected))
    out1, out2 = tmp_path / "v1.jsonl", tmp_path / "v2.jsonl"
    argv = ["perturb", "--corpus", str(corpus), "--seed", "9",
            "--protected-lines-file", str(protected)]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = [json.loads(l) for l in out1.read_text().splitlines()]
    assert len(rows) == 5
    assert all(r["gate_passed"] for r in rows)  # no gates enabled


def test_perturb_with_gates(tmp_path, toy_corpus, gxx_available):
    if not gxx_available:
        pytest.skip("g++ not installed")
    corpus = jsonl(tmp_path / "corpus.jsonl", [
        {"sample_id": "one", "label": 1, "source": toy_corpus["cwe78_command_build.cpp"]},
    ])
    out = tmp_path / "variants.jsonl"
    code = main(["perturb", "--corpus", str(corpus), "--seed", "2",
                 "--gates", "compile,judge", "--out", str(out)])
    assert code == 0
    row = json.loads(out.read_text().splitlines()[0])
    assert row["compile_ok"] is True
    assert row["equivalence_ok"] is True


def test_stats_outputs(tmp_path, trace_docs, corpus_docs):
    traces = jsonl(tmp_path / "traces.jsonl", trace_docs)
    corpus = jsonl(tmp_path / "corpus.jsonl", corpus_docs * 5)  # 10 samples
    # sample ids must be unique for a meaningful file; rewrite them
    docs = []
    for i, doc in enumerate(json.loads(l) for l in corpus.read_text().splitlines()):
        doc = dict(doc)
        doc["sample_id"] = f"s{i:02d}"
        docs.append(doc)
    corpus = jsonl(tmp_path / "corpus.jsonl", docs)
    out_dir = tmp_path / "stats"
    assert main(["stats", "--traces", str(traces), "--corpus", str(corpus),
                 "--out-dir", str(out_dir)]) == 0
    stats_rows = [json.loads(l) for l in (out_dir / "graph_stats.jsonl").read_text().splitlines()]
    assert {r["sample_id"] for r in stats_rows} == {"toy-flawed-length-check", "open-1"}
    example = next(r for r in stats_rows if r["sample_id"] == "toy-flawed-length-check")
    assert example["node_count"] == 12 and example["edge_count"] == 14
    difficulty_rows = (out_dir / "difficulty.jsonl").read_text().splitlines()
    assert len(difficulty_rows) == 10
    summary = json.loads((out_dir / "summary.json").read_text())
    assert len(summary["splits"]["hard"]) == 1
    assert (out_dir / "run_manifest.json").exists()


def test_stats_single_trace_still_emits(tmp_path, example_trace_doc):
    traces = jsonl(tmp_path / "traces.jsonl", [example_trace_doc])
    out_dir = tmp_path / "stats"
    assert main(["stats", "--traces", str(traces), "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "graph_stats.jsonl").exists()


def test_stats_empty_input(tmp_path):
    out_dir = tmp_path / "stats"
    assert main(["stats", "--out-dir", str(out_dir)]) == 1


def test_synthesize_all_mock(tmp_path, corpus_docs, example_trace_doc):
    corpus = jsonl(tmp_path / "corpus.jsonl", corpus_docs)
    generator_cfg = tmp_path / "generator.json"
    stage3 = dict(example_trace_doc)
    generator_cfg.write_text(json.dumps({
        "backend": "mock",
        "rules": [
            {"pattern": "Decompose the analysis",
             "reply": json.dumps({"thinking": [{"step_id": 1, "kind": "source", "statement": "s"}]})},
            {"pattern": "minimal set of direct dependencies",
             "reply": json.dumps({"thinking": [{"step_id": 1, "kind": "source",
                                                "statement": "s", "direct_dependent_steps": None}]})},
            {"pattern": "justification", "reply": json.dumps(stage3)},
        ],
        "default": "The length flows unchecked into the copy size.",
    }))
    out_dir = tmp_path / "gold"
    assert main(["synthesize", "--corpus", str(corpus), "--generator", str(generator_cfg),
                 "--out-dir", str(out_dir)]) == 0
    gold = [json.loads(l) for l in (out_dir / "gold.jsonl").read_text().splitlines()]
    discards = (out_dir / "discards.jsonl").read_text().splitlines()
    assert len(gold) + len(discards) == 2
    assert len(gold) == 2
    assert all("provenance" in g for g in gold)


def test_synthesize_leaky_generator_discards_all(tmp_path, corpus_docs):
    corpus = jsonl(tmp_path / "corpus.jsonl", corpus_docs)
    generator_cfg = tmp_path / "generator.json"
    generator_cfg.write_text(json.dumps({
        "backend": "mock",
        "default": "as stated in the ground truth the check is wrong",
    }))
    out_dir = tmp_path / "gold"
    assert main(["synthesize", "--corpus", str(corpus), "--generator", str(generator_cfg),
                 "--max-attempts", "3", "--out-dir", str(out_dir)]) == 0
    discards = [json.loads(l) for l in (out_dir / "discards.jsonl").read_text().splitlines()]
    assert len(discards) == 2
    assert all(d["discard_reason"] == "leakage-exhausted" for d in discards)
    assert all(d["attempts"] == 3 for d in discards)
