from __future__ import annotations

import json
import random
import shutil
import subprocess
import tempfile
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"
TOY_DIR = DATA_DIR / "toycorpus"


@pytest.fixture(scope="session")
def example_trace_doc() -> dict:
    return json.loads((DATA_DIR / "flawed_check_trace.json").read_text())


@pytest.fixture(scope="session")
def example_dag(example_trace_doc):
    from vulnreason.dag import parse_trace

    return parse_trace(example_trace_doc)


@pytest.fixture(scope="session")
def toy_corpus() -> dict[str, str]:
    return {p.name: p.read_text() for p in sorted(TOY_DIR.glob("*.cpp"))}


@pytest.fixture(scope="session")
def toy_protected() -> dict[str, list[int]]:
    return json.loads((TOY_DIR / "protected.json").read_text())


@pytest.fixture(scope="session")
def gxx_available() -> bool:
    return shutil.which("g++") is not None


def compile_and_run(source: str, tag: str = "prog") -> tuple[int, str]:
    """Build a standalone C++ program and return (exit code, stdout)."""
    with tempfile.TemporaryDirectory(prefix="vulnreason-test-") as tmp:
        src = Path(tmp) / f"{tag}.cpp"
        src.write_text(source)
        exe = Path(tmp) / tag
        build = subprocess.run(
            ["g++", "-O0", "-w", str(src), "-o", str(exe)],
            capture_output=True, text=True, timeout=120,
        )
        if build.returncode != 0:
            raise AssertionError(f"compile failed:\n{build.stderr}")
        run = subprocess.run([str(exe)], capture_output=True, text=True, timeout=30)
        return run.returncode, run.stdout


# ---------------------------------------------------------------------------
# Random trace construction and independent oracles


def citation_text(deps: list[int]) -> str:
    if not deps:
        return "Fact read directly from the code."
    cites = " and ".join(f"Step {d}" for d in deps)
    return f"Derived by data-flow analysis from {cites}."


def make_trace(sample_id: str, spec: list[tuple[int, str, list[int]]]) -> dict:
    """Trace document from (step_id, kind, deps) triples, citations included."""
    return {
        "sample_id": sample_id,
        "thinking": [
            {
                "step_id": sid,
                "kind": kind,
                "statement": f"Assertion {sid}.",
                "direct_dependent_steps": deps or None,
                "justification": citation_text(deps),
            }
            for sid, kind, deps in spec
        ],
    }


def random_trace_spec(rng: random.Random, max_nodes: int = 20) -> list[tuple[int, str, list[int]]]:
    """Random parseable trace: deps always cite strictly earlier steps."""
    n = rng.randint(1, max_nodes)
    spec: list[tuple[int, str, list[int]]] = []
    for sid in range(1, n + 1):
        if sid == 1 or rng.random() < 0.35:
            spec.append((sid, "source", []))
            continue
        pool = list(range(1, sid))
        deps = sorted(rng.sample(pool, k=rng.randint(1, min(3, len(pool)))))
        if sid == n or (sid > 2 and rng.random() < 0.15):
            kind = rng.choice(("verified_sink", "sanitized_sink"))
        else:
            kind = "intermediate"
        spec.append((sid, kind, deps))
    # sinks must not feed later nodes: drop any dep that points at a sink
    sinks = {sid for sid, kind, _ in spec if kind.endswith("_sink")}
    fixed = []
    for sid, kind, deps in spec:
        clean = [d for d in deps if d not in sinks]
        if kind != "source" and not clean:
            non_sink_pool = [d for d in range(1, sid) if d not in sinks]
            if non_sink_pool:
                clean = [rng.choice(non_sink_pool)]
            else:
                kind = "source"
        fixed.append((sid, kind, clean))
    return fixed


def oracle_admissible(spec: list[tuple[int, str, list[int]]], visited: set[int]) -> set[int]:
    """Brute-force transition rule straight off the raw spec triples."""
    return {
        sid for sid, _, deps in spec
        if sid not in visited and all(d in visited for d in deps)
    }


def oracle_sink_reaching(spec: list[tuple[int, str, list[int]]]) -> set[int]:
    """Brute-force forward reachability: which nodes reach some sink."""
    children: dict[int, list[int]] = {sid: [] for sid, _, _ in spec}
    kinds = {sid: kind for sid, kind, _ in spec}
    for sid, _, deps in spec:
        for d in deps:
            children[d].append(sid)

    def reaches_sink(start: int, seen: set[int]) -> bool:
        if kinds[start].endswith("_sink"):
            return True
        for child in children[start]:
            if child not in seen and reaches_sink(child, seen | {child}):
                return True
        return False

    return {sid for sid, _, _ in spec if reaches_sink(sid, {sid})}
