"""Command-line surface: validate, score, metrics, perturb, stats, synthesize, serve.

Exit codes are uniform across commands: 0 success, 1 data or validation
failure, 2 environment or provider failure. Every run writes one manifest
next to its outputs. Option precedence is flags over environment over config
file.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from . import dag as dag_mod
from . import metrics as metrics_mod
from . import pipeline as pipe
from . import rewards as rewards_mod
from .judge import JudgeHandle, JudgeUnavailable, load_handle, mock_handle
from .perturb import (
    ApplyConfig,
    ParseFailure,
    PerturbationPlan,
    ToolchainConfig,
    ToolchainMissing,
    generate_variant,
    method_catalog,
)
from .perturb.engine import VariantInput

EXIT_OK = 0
EXIT_DATA = 1
EXIT_ENV = 2


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(anchor: Path, command: str, config: dict, inputs: list[Path],
                   started: float) -> Path:
    """One manifest per run, written next to the command's outputs."""
    target = anchor / "run_manifest.json" if anchor.is_dir() else anchor.with_suffix(
        anchor.suffix + ".manifest.json"
    )
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest(),
        "input_digests": [
            {"path": str(p), "sha256": _sha256_file(p)} for p in inputs if p.exists()
        ],
        "started": started,
        "finished": time.time(),
    }
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if p.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(p.read_text(encoding="utf-8"))
    return json.loads(p.read_text(encoding="utf-8"))


def _resolve(flag, env_name: str, config: dict, key: str, default):
    """flags > environment > config file > default."""
    if flag is not None:
        return flag
    if env_name and os.environ.get(env_name) is not None:
        return os.environ[env_name]
    if key in config:
        return config[key]
    return default


def _judge_from_spec(spec: str | None) -> JudgeHandle:
    if not spec or spec == "mock":
        return mock_handle(default="VERDICT: MATCH")
    return load_handle(spec)


def _read_traces(path: Path) -> list[tuple[dict, Exception | None]]:
    """Parse each JSONL line; collect per-trace parse errors as data."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append((json.loads(line), None))
            except json.JSONDecodeError as exc:
                out.append(({"line": line_no}, exc))
    return out


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    started = time.time()
    traces_path = Path(args.traces)
    if not traces_path.exists():
        print(f"error: no such file: {traces_path}", file=sys.stderr)
        return EXIT_ENV
    report_path = Path(args.report) if args.report else traces_path.with_suffix(".report.jsonl")
    all_ok = True
    lines = []
    for doc, err in _read_traces(traces_path):
        if err is not None:
            all_ok = False
            lines.append({"sample_id": None, "structural_ok": False,
                          "error": f"invalid JSON: {err}"})
            continue
        try:
            dag = dag_mod.parse_trace(doc)
        except dag_mod.TraceError as exc:
            all_ok = False
            lines.append({"sample_id": doc.get("sample_id"), "structural_ok": False,
                          "error": f"{type(exc).__name__}: {exc}"})
            continue
        report = dag_mod.validate_structure(dag)
        all_ok = all_ok and report.structural_ok
        lines.append({
            "sample_id": dag.sample_id,
            "structural_ok": report.structural_ok,
            "closed": report.closed,
            "dangling_nodes": list(report.dangling_nodes),
            "violations": [dataclasses.asdict(v) for v in report.violations],
        })
    with open(report_path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    write_manifest(report_path, "validate", vars(args), [traces_path], started)
    ok_count = sum(1 for l in lines if l["structural_ok"])
    print(f"validate: {ok_count}/{len(lines)} traces structurally ok -> {report_path}")
    return EXIT_OK if all_ok else EXIT_DATA


# ---------------------------------------------------------------------------
# score


def cmd_score(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    traces_path, corpus_path = Path(args.traces), Path(args.ground_truth)
    for p in (traces_path, corpus_path):
        if not p.exists():
            print(f"error: no such file: {p}", file=sys.stderr)
            return EXIT_ENV
    omega_close = float(_resolve(args.omega_close, "VULNREASON_OMEGA_CLOSE", config, "omega_close", 0.3))
    omega_final = float(_resolve(args.omega_final, "VULNREASON_OMEGA_FINAL", config, "omega_final", 0.7))
    weights = rewards_mod.RewardWeights(omega_close, omega_final)
    judge = _judge_from_spec(_resolve(args.judge, "VULNREASON_JUDGE", config, "judge_backend", None))

    try:
        samples = {s.sample_id: s for s in pipe.load_samples(corpus_path)}
    except pipe.IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    dags = []
    unmatched = []
    for doc, err in _read_traces(traces_path):
        if err is not None:
            print(f"error: bad trace JSON: {err}", file=sys.stderr)
            return EXIT_DATA
        dag = dag_mod.parse_trace(doc)
        sample = samples.get(dag.sample_id)
        if sample is None or sample.ground_truth is None:
            unmatched.append(dag.sample_id)
            continue
        dags.append((dag, sample.ground_truth))

    out_path = Path(args.out) if args.out else traces_path.with_suffix(".rewards.jsonl")
    rows = []
    closed_count = 0
    for dag, gt in dags:
        close = rewards_mod.closeness_reward(dag)
        closed_count += 1 if dag_mod.is_closed(dag)[0] else 0
        try:
            breakdown = rewards_mod.total_reward(dag, gt, judge, weights)
        except rewards_mod.UndefinedVerdict:
            breakdown = rewards_mod.RewardBreakdown(
                close_indicator=close, final_indicator=0.0,
                sink_match=0, veracity=0, total=weights.omega_close * close,
            )
        except JudgeUnavailable as exc:
            print(f"error: judge unavailable: {exc}", file=sys.stderr)
            return EXIT_ENV
        rows.append({"sample_id": dag.sample_id, **dataclasses.asdict(breakdown)})
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    write_manifest(out_path, "score", vars(args), [traces_path, corpus_path], started)

    mean_total = sum(r["total"] for r in rows) / len(rows) if rows else 0.0
    rate = 100.0 * closed_count / len(dags) if dags else 0.0
    print(f"score: n={len(rows)} mean_total={mean_total:.6f} closeness_rate={rate:.2f}% -> {out_path}")
    if unmatched:
        print(f"error: no ground truth for sample_ids: {', '.join(sorted(unmatched))}",
              file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args) -> int:
    started = time.time()
    outcomes_path = Path(args.outcomes)
    if not outcomes_path.exists():
        print(f"error: no such file: {outcomes_path}", file=sys.stderr)
        return EXIT_ENV
    try:
        rows = metrics_mod.read_outcomes(outcomes_path)
    except (metrics_mod.InconsistentFlags, ValueError, KeyError) as exc:
        print(f"error: bad outcome record: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not rows:
        print("error: empty outcome file", file=sys.stderr)
        return EXIT_DATA

    out_path = Path(args.out) if args.out else outcomes_path.with_suffix(".metrics.json")
    records = [r.record for r in rows]
    reasoning = metrics_mod.reasoning_metrics(records)
    detection = metrics_mod.detection_metrics(
        [(r.record.ground_truth, r.record.prediction) for r in rows]
    )
    counts = metrics_mod.outcome_counts(records)
    result = {
        "n": len(rows),
        "counts": {cat.value: counts.get(cat, 0) for cat in metrics_mod.Category},
        "reasoning": dataclasses.asdict(reasoning),
        "detection": dataclasses.asdict(detection),
    }

    inputs = [outcomes_path]
    if args.pairs:
        by_lineage: dict[str, dict[int, metrics_mod.OutcomeRow]] = {}
        for row in rows:
            if row.lineage_id:
                by_lineage.setdefault(row.lineage_id, {})[row.record.ground_truth] = row
        orphans = [lid for lid, sides in by_lineage.items() if set(sides) != {0, 1}]
        if orphans:
            print(f"error: unpaired lineage_ids: {', '.join(sorted(orphans))}", file=sys.stderr)
            return EXIT_DATA
        pairs = [(sides[1].record, sides[0].record) for _, sides in sorted(by_lineage.items())]
        table = metrics_mod.pairwise_outcomes(pairs)
        result["pairs"] = {f"{v}/{p}": c for (v, p), c in table.items()}

    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if args.heatmap:
        labels_path = Path(args.labels) if args.labels else None
        if not labels_path or not labels_path.exists():
            print("error: --heatmap requires --labels FILE", file=sys.stderr)
            return EXIT_ENV
        labels = {}
        with open(labels_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                try:
                    labels[doc["sample_id"]] = (
                        doc["model"],
                        metrics_mod.ErrorLabelSet(frozenset(doc["codes"])),
                    )
                except (metrics_mod.UnknownCode, ValueError) as exc:
                    print(f"error: bad label set: {exc}", file=sys.stderr)
                    return EXIT_DATA
        Path(args.heatmap).write_text(
            metrics_mod.heatmap_csv(metrics_mod.error_heatmap(labels)), encoding="utf-8"
        )
        inputs.append(labels_path)

    write_manifest(out_path, "metrics", vars(args), inputs, started)
    print(f"metrics: n={len(rows)} R_F1={reasoning.f1:.4f} -> {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# perturb


def cmd_perturb(args) -> int:
    started = time.time()
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        print(f"error: no such file: {corpus_path}", file=sys.stderr)
        return EXIT_ENV
    try:
        samples = pipe.load_samples(corpus_path)
    except pipe.IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    methods = tuple(args.methods.split(",")) if args.methods else tuple(sorted(method_catalog()))
    protected_map: dict[str, list[int]] = {}
    if args.protected_lines_file:
        protected_map = json.loads(Path(args.protected_lines_file).read_text(encoding="utf-8"))

    toolchain = None
    judges = None
    gates = set((args.gates or "").split(",")) - {""}
    if "compile" in gates:
        toolchain = ToolchainConfig.from_dict(_load_config(args.toolchain) if args.toolchain else {})
    if "judge" in gates:
        if args.judges:
            handles = [load_handle(p) for p in args.judges.split(",")]
        else:
            handles = [mock_handle(default="VERDICT: EQUIVALENT") for _ in range(3)]
        if len(handles) != 3:
            print("error: the judge gate needs exactly 3 handles", file=sys.stderr)
            return EXIT_ENV
        judges = tuple(handles)

    config = ApplyConfig(all_sites=args.sample_rate is None,
                         sample_rate=args.sample_rate if args.sample_rate is not None else 1.0)
    out_path = Path(args.out) if args.out else corpus_path.with_suffix(".variants.jsonl")
    rows = []
    failures = 0
    passed = 0
    for sample in samples:
        plan = PerturbationPlan(
            methods=methods,
            seed=args.seed,
            protected_lines=frozenset(protected_map.get(sample.sample_id, ())),
        )
        try:
            variant = generate_variant(
                VariantInput(source=sample.source, label=sample.label,
                             sample_id=sample.sample_id),
                plan, toolchain=toolchain, judges=judges, config=config,
            )
        except ToolchainMissing as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ENV
        except (ParseFailure, ValueError) as exc:
            failures += 1
            rows.append({"sample_id": sample.sample_id, "error": str(exc)})
            continue
        passed += 1 if variant.gate_passed else 0
        rows.append({
            "sample_id": sample.sample_id,
            "original": variant.original,
            "perturbed": variant.perturbed,
            "methods": list(plan.methods),
            "seed": plan.seed,
            "protected_lines": sorted(plan.protected_lines),
            "applied": list(variant.applied),
            "compile_ok": variant.compile_ok,
            "equivalence_ok": variant.equivalence_ok,
            "gate_passed": variant.gate_passed,
            "votes": list(variant.votes),
            "compile_diagnostics": variant.compile_diagnostics,
        })
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    write_manifest(out_path, "perturb", vars(args), [corpus_path], started)
    total = len(samples)
    print(f"perturb: {total - failures}/{total} variants generated, "
          f"gate pass rate {100.0 * passed / total if total else 0.0:.1f}% -> {out_path}")
    return EXIT_OK if total - failures > 0 else EXIT_DATA


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = []

    stats_rows = []
    if args.traces:
        traces_path = Path(args.traces)
        if not traces_path.exists():
            print(f"error: no such file: {traces_path}", file=sys.stderr)
            return EXIT_ENV
        inputs.append(traces_path)
        for doc, err in _read_traces(traces_path):
            if err is not None:
                print(f"error: bad trace JSON: {err}", file=sys.stderr)
                return EXIT_DATA
            dag = dag_mod.parse_trace(doc)
            stats = dag_mod.topology_stats(dag)
            stats_rows.append({"sample_id": dag.sample_id, **dataclasses.asdict(stats)})

    difficulty_rows = []
    split_ids = {}
    if args.corpus:
        corpus_path = Path(args.corpus)
        if not corpus_path.exists():
            print(f"error: no such file: {corpus_path}", file=sys.stderr)
            return EXIT_ENV
        inputs.append(corpus_path)
        try:
            samples = pipe.load_samples(corpus_path)
        except pipe.IngestionError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        if not samples:
            print("error: empty corpus", file=sys.stderr)
            return EXIT_DATA
        split = pipe.split_by_difficulty(samples, fraction=args.split)
        split_ids = {
            "easy": [s.sample_id for s in split.easy],
            "hard": [s.sample_id for s in split.hard],
        }
        difficulty_rows = [dataclasses.asdict(score) for score in split.scores]

    if not stats_rows and not difficulty_rows:
        print("error: nothing to compute (need --traces and/or --corpus)", file=sys.stderr)
        return EXIT_DATA

    easy, hard = set(split_ids.get("easy", ())), set(split_ids.get("hard", ()))
    for row in stats_rows:
        row["split"] = ("hard" if row["sample_id"] in hard
                        else "easy" if row["sample_id"] in easy else "mid")

    if stats_rows:
        with open(out_dir / "graph_stats.jsonl", "w", encoding="utf-8") as fh:
            for row in stats_rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    if difficulty_rows:
        with open(out_dir / "difficulty.jsonl", "w", encoding="utf-8") as fh:
            for row in difficulty_rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    def _mean(rows, key):
        return sum(r[key] for r in rows) / len(rows) if rows else 0.0

    summary = {"n_traces": len(stats_rows), "n_samples": len(difficulty_rows),
               "split_fraction": args.split, "splits": split_ids}
    for bucket in ("all", "easy", "hard"):
        rows = [r for r in stats_rows if bucket == "all" or r["split"] == bucket]
        summary[f"{bucket}_mean"] = {
            key: _mean(rows, key)
            for key in ("node_count", "edge_count", "density", "max_in_degree", "max_out_degree")
        }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out_dir, "stats", vars(args), inputs, started)
    print(f"stats: {len(stats_rows)} traces, {len(difficulty_rows)} samples -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synthesize


def cmd_synthesize(args) -> int:
    started = time.time()
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        print(f"error: no such file: {corpus_path}", file=sys.stderr)
        return EXIT_ENV
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        samples = pipe.load_samples(corpus_path)
    except pipe.IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    generator = _judge_from_spec(args.generator)
    judge = _judge_from_spec(args.judge)

    accepted, discarded = [], []
    for sample in samples:
        try:
            result = pipe.synthesize_gold(sample, generator, judge,
                                          max_attempts=args.max_attempts)
        except pipe.GeneratorUnavailable as exc:
            print(f"error: generator unavailable: {exc}", file=sys.stderr)
            return EXIT_ENV
        except pipe.IngestionError as exc:
            discarded.append({"sample_id": sample.sample_id, "discard_reason": "no-ground-truth",
                              "detail": str(exc)})
            continue
        if result.accepted and result.dag is not None:
            doc = dag_mod.to_dict(result.dag)
            doc["provenance"] = {"attempts": result.attempts,
                                 "similarity": result.similarity,
                                 **result.provenance}
            accepted.append(doc)
        else:
            discarded.append({"sample_id": sample.sample_id,
                              "discard_reason": result.discard_reason,
                              "attempts": result.attempts,
                              "similarity": result.similarity})
    with open(out_dir / "gold.jsonl", "w", encoding="utf-8") as fh:
        for doc in accepted:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    with open(out_dir / "discards.jsonl", "w", encoding="utf-8") as fh:
        for doc in discarded:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    write_manifest(out_dir, "synthesize", vars(args), [corpus_path], started)
    print(f"synthesize: accepted={len(accepted)} discarded={len(discarded)} -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    from .annotation import Roster, TaskStore, create_app

    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    roster_doc = _load_config(args.annotators) if args.annotators else {
        "annotators": ["annotator-a", "annotator-b"], "secret": "dev-secret"}
    store = TaskStore(data_dir)
    tasks_file = data_dir / "tasks.jsonl"
    if tasks_file.exists():
        with open(tasks_file, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                if doc.get("task_id") not in store.tasks:
                    store.create_task(doc)
    app = create_app(store, Roster.from_dict(roster_doc), static_dir=args.static_dir)

    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:
        return EXIT_ENV if exc.code else EXIT_OK
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return EXIT_ENV
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vulnreason",
        description="Vulnerability-reasoning toolkit: DAG validation, verifiable "
                    "rewards, reasoning-aware metrics, code perturbation, dataset "
                    "curation, and the annotation review service.",
    )
    parser.add_argument("--version", action="version", version=f"vulnreason {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structurally validate reasoning traces")
    p.add_argument("traces")
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("score", help="compute hybrid rewards for traces")
    p.add_argument("--traces", required=True)
    p.add_argument("--ground-truth", required=True, help="sample corpus JSONL with reports")
    p.add_argument("--judge", default=None, help="judge config JSON (default: mock MATCH)")
    p.add_argument("--omega-close", type=float, default=None)
    p.add_argument("--omega-final", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("metrics", help="reasoning-aware metrics from outcome records")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--pairs", action="store_true", help="also emit the pair-wise table")
    p.add_argument("--labels", default=None, help="error-label JSONL for the heatmap")
    p.add_argument("--heatmap", default=None, help="write the model-by-code CSV here")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("perturb", help="generate semantic-preserving variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--methods", default=None, help="comma-separated method ids (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--protected-lines-file", default=None)
    p.add_argument("--gates", default="", help="comma set from {compile,judge}")
    p.add_argument("--toolchain", default=None, help="toolchain config JSON")
    p.add_argument("--judges", default=None, help="three judge config paths, comma-separated")
    p.add_argument("--sample-rate", type=float, default=None,
                   help="transform a seeded fraction of sites instead of all")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_perturb)

    p = sub.add_parser("stats", help="topology statistics and difficulty splits")
    p.add_argument("--traces", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--split", type=float, default=0.10)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("synthesize", help="synthesize gold-standard traces")
    p.add_argument("--corpus", required=True)
    p.add_argument("--generator", default=None, help="generator config JSON (mock allowed)")
    p.add_argument("--judge", default=None)
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("serve", help="run the annotation review service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--annotators", default=None, help="roster config JSON")
    p.add_argument("--static-dir", default=None, help="built frontend assets")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
