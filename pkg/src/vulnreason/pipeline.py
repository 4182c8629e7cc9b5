"""Dataset curation: filtering, dedup, difficulty scoring, and gold synthesis.

Samples arrive as JSONL with the interprocedural context bundle inlined;
context extraction itself happens upstream. Gold-standard trace synthesis
orchestrates a generator model through a scaffold step and three structuring
stages, gated against ground-truth leakage, then pruned and quality-checked
by the DAG layer.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import dag as dag_mod
from .csource import ParseFailure, code_view, strip_comments
from .judge import JudgeHandle, prompt_fingerprint, prompt_text

logger = logging.getLogger(__name__)


class IngestionError(ValueError):
    pass


class TooFewSamples(Warning):
    pass


class SimilarityUnavailable(RuntimeError):
    pass


class GeneratorUnavailable(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Data model


@dataclass(frozen=True)
class ContextBundle:
    callee_methods: tuple[str, ...] = ()
    caller_methods: tuple[str, ...] = ()
    global_vars: tuple[str, ...] = ()
    import_libs: tuple[str, ...] = ()
    type_defs: tuple[str, ...] = ()
    vulnerable_methods_before: str | None = None
    vulnerable_methods_after: str | None = None
    caller_depth: int = 0

    def __post_init__(self) -> None:
        if self.caller_depth > 3:
            raise IngestionError(
                f"caller_depth {self.caller_depth} exceeds the extraction bound of 3"
            )

    def fragments(self) -> tuple[str, ...]:
        return self.callee_methods + self.caller_methods


@dataclass(frozen=True)
class GroundTruthReport:
    cwe_id: str
    root_cause: str
    fixing_pattern: str
    label: int = 1
    cve_id: str | None = None
    resolved: str = "Resolved"
    confidence: int = 5
    human_verified: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.confidence <= 5:
            raise IngestionError(f"confidence {self.confidence} outside 1..5")
        if self.confidence < 4 and not self.human_verified:
            raise IngestionError(
                f"confidence {self.confidence} < 4 requires human verification"
            )
        if self.resolved not in ("Resolved", "Unresolved"):
            raise IngestionError(f"resolved flag must be Resolved/Unresolved, got {self.resolved!r}")
        if self.label not in (0, 1):
            raise IngestionError(f"label must be 0/1, got {self.label!r}")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    label: int
    source: str
    lineage_id: str = ""
    context: ContextBundle = field(default_factory=ContextBundle)
    ground_truth: GroundTruthReport | None = None
    commit_url: str | None = None
    path: str | None = None
    split: str = ""

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise IngestionError(f"{self.sample_id}: label must be 0/1")
        if not self.source:
            raise IngestionError(f"{self.sample_id}: empty source")


def sample_from_dict(doc: dict) -> Sample:
    ctx = ContextBundle(
        callee_methods=tuple(doc.get("calleeMethods", ())),
        caller_methods=tuple(doc.get("callerMethods", ())),
        global_vars=tuple(doc.get("globalVars", ())),
        import_libs=tuple(doc.get("importLibs", ())),
        type_defs=tuple(doc.get("typeDefs", ())),
        vulnerable_methods_before=doc.get("vulnerableMethods_before"),
        vulnerable_methods_after=doc.get("vulnerableMethods_after"),
        caller_depth=int(doc.get("callerDepth", 0)),
    )
    gt = None
    if doc.get("ground_truth"):
        raw = doc["ground_truth"]
        gt = GroundTruthReport(
            cwe_id=raw.get("cwe_id", ""),
            root_cause=raw.get("root_cause", ""),
            fixing_pattern=raw.get("fixing_pattern", ""),
            label=int(raw.get("label", doc.get("label", 1))),
            cve_id=raw.get("cve_id"),
            resolved=raw.get("resolved", "Resolved"),
            confidence=int(raw.get("confidence", 5)),
            human_verified=bool(raw.get("human_verified", False)),
        )
    return Sample(
        sample_id=str(doc["sample_id"]),
        label=int(doc["label"]),
        source=doc["source"],
        lineage_id=str(doc.get("lineage_id", "")),
        context=ctx,
        ground_truth=gt,
        commit_url=doc.get("commit_url"),
        path=doc.get("path"),
        split=str(doc.get("split", "")),
    )


def sample_to_dict(sample: Sample) -> dict:
    doc: dict = {
        "sample_id": sample.sample_id,
        "label": sample.label,
        "source": sample.source,
        "lineage_id": sample.lineage_id,
        "split": sample.split,
        "calleeMethods": list(sample.context.callee_methods),
        "callerMethods": list(sample.context.caller_methods),
        "globalVars": list(sample.context.global_vars),
        "importLibs": list(sample.context.import_libs),
        "typeDefs": list(sample.context.type_defs),
        "vulnerableMethods_before": sample.context.vulnerable_methods_before,
        "vulnerableMethods_after": sample.context.vulnerable_methods_after,
        "callerDepth": sample.context.caller_depth,
    }
    if sample.commit_url:
        doc["commit_url"] = sample.commit_url
    if sample.path:
        doc["path"] = sample.path
    if sample.ground_truth:
        gt = sample.ground_truth
        doc["ground_truth"] = {
            "cwe_id": gt.cwe_id,
            "root_cause": gt.root_cause,
            "fixing_pattern": gt.fixing_pattern,
            "label": gt.label,
            "cve_id": gt.cve_id,
            "resolved": gt.resolved,
            "confidence": gt.confidence,
            "human_verified": gt.human_verified,
        }
    return doc


def load_samples(path: str | Path) -> list[Sample]:
    """Strict JSONL ingestion; confidence gating violations abort the load."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                samples.append(sample_from_dict(json.loads(line)))
            except (KeyError, json.JSONDecodeError) as exc:
                raise IngestionError(f"{path}:{line_no}: {exc}") from exc
    return samples


def write_samples(path: str | Path, samples: Iterable[Sample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample_to_dict(sample), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Normalization, dedup, filtering


WHITESPACE = re.compile(r"\s+")


def normalize_and_hash(source: str) -> str:
    """MD5 digest of the source with comments and all whitespace removed."""
    stripped = strip_comments(source)
    normalized = WHITESPACE.sub("", stripped)
    return hashlib.md5(normalized.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DedupResult:
    kept: tuple[Sample, ...]
    dropped: tuple[tuple[Sample, str], ...]  # (sample, duplicate_of sample_id)
    cross_split_collisions: tuple[tuple[str, str], ...]  # (kept id, dropped id)


def dedup(samples: Sequence[Sample]) -> DedupResult:
    """First occurrence per digest wins, regardless of split membership."""
    seen: dict[str, Sample] = {}
    kept: list[Sample] = []
    dropped: list[tuple[Sample, str]] = []
    cross: list[tuple[str, str]] = []
    for sample in samples:
        digest = normalize_and_hash(sample.source)
        if digest in seen:
            keeper = seen[digest]
            dropped.append((sample, keeper.sample_id))
            if sample.split != keeper.split:
                cross.append((keeper.sample_id, sample.sample_id))
                logger.warning(
                    "cross-split duplicate: %s (%s) duplicates %s (%s)",
                    sample.sample_id, sample.split, keeper.sample_id, keeper.split,
                )
        else:
            seen[digest] = sample
            kept.append(sample)
    return DedupResult(tuple(kept), tuple(dropped), tuple(cross))


TOKEN = re.compile(r"\w+|[^\w\s]")


def simple_token_count(text: str) -> int:
    """Default tokenizer: identifier/number runs plus single symbols."""
    return len(TOKEN.findall(text))


EXCLUDED_PATH_PATTERNS = (
    re.compile(r"(^|/)tests?(/|$)", re.IGNORECASE),
    re.compile(r"_test\.(c|cc|cpp|cxx|h|hpp)$", re.IGNORECASE),
    re.compile(r"test_[^/]*\.(c|cc|cpp|cxx)$", re.IGNORECASE),
    re.compile(r"\.(md|rst|txt|json|ya?ml|toml|cfg|ini|xml|html)$", re.IGNORECASE),
    re.compile(r"(^|/)(docs?|examples?)(/|$)", re.IGNORECASE),
)


def excluded_path(path: str | None) -> bool:
    if not path:
        return False
    return any(p.search(path) for p in EXCLUDED_PATH_PATTERNS)


def filter_samples(
    samples: Sequence[Sample],
    max_tokens: int = 8192,
    min_tokens: int = 10,
    tokenizer: Callable[[str], int] = simple_token_count,
) -> list[Sample]:
    """Scope and length filters: drop test/non-source paths and out-of-range sizes."""
    kept = []
    for sample in samples:
        if excluded_path(sample.path):
            continue
        count = tokenizer(sample.source)
        if min_tokens <= count <= max_tokens:
            kept.append(sample)
    return kept


# ---------------------------------------------------------------------------
# Complexity and difficulty


DECISION_WORD = re.compile(r"\b(if|for|while|case|catch)\b")


def cyclomatic_complexity(source: str) -> int:
    """1 + decision points (if/for/while/case/catch, ternary, && and ||).

    Comment and literal text never counts; raises ParseFailure for sources
    the scanner cannot classify.
    """
    view = code_view(source)
    count = len(DECISION_WORD.findall(view))
    count += view.count("&&") + view.count("||") + view.count("?")
    return 1 + count


def context_complexity(bundle: ContextBundle) -> int:
    """Sum of per-fragment complexity over callee and caller methods."""
    return sum(cyclomatic_complexity(fragment) for fragment in bundle.fragments())


@dataclass(frozen=True)
class DifficultyWeights:
    w1: float = 1.0
    w2: float = 0.3
    w3: float = 0.005

    def __post_init__(self) -> None:
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("difficulty weights must be non-negative")


@dataclass(frozen=True)
class DifficultyScore:
    sample_id: str
    cc_vuln: int
    cc_context: int
    n_tokens: int
    value: float


def difficulty_value(
    cc_vuln: float, cc_context: float, n_tokens: float,
    weights: DifficultyWeights = DifficultyWeights(),
) -> float:
    return weights.w1 * cc_vuln + weights.w2 * cc_context + weights.w3 * n_tokens


def difficulty(
    sample: Sample,
    weights: DifficultyWeights = DifficultyWeights(),
    tokenizer: Callable[[str], int] = simple_token_count,
) -> DifficultyScore:
    """Composite difficulty over target complexity, context complexity, and size.

    Token count covers the target source plus every context fragment, since
    all of it lands in the analysis prompt.
    """
    cc_vuln = cyclomatic_complexity(sample.source)
    cc_context = context_complexity(sample.context)
    n_tokens = tokenizer(sample.source) + sum(
        tokenizer(fragment) for fragment in sample.context.fragments()
    )
    return DifficultyScore(
        sample_id=sample.sample_id,
        cc_vuln=cc_vuln,
        cc_context=cc_context,
        n_tokens=n_tokens,
        value=difficulty_value(cc_vuln, cc_context, n_tokens, weights),
    )


@dataclass(frozen=True)
class DifficultySplit:
    easy: tuple[Sample, ...]
    hard: tuple[Sample, ...]
    all: tuple[Sample, ...]
    scores: tuple[DifficultyScore, ...]


def split_by_difficulty(
    samples: Sequence[Sample],
    fraction: float = 0.10,
    weights: DifficultyWeights = DifficultyWeights(),
    scores: Sequence[DifficultyScore] | None = None,
) -> DifficultySplit:
    """Hard = top ceil(fraction*N) by difficulty, easy = bottom ceil(fraction*N).

    Sorting is deterministic: value descending, then sample_id ascending.
    """
    if not samples:
        raise IngestionError("cannot split an empty corpus")
    if len(samples) < 10:
        logger.warning("difficulty split over %d samples (< 10) is noisy", len(samples))
    if scores is None:
        scores = [difficulty(s, weights) for s in samples]
    by_id = {score.sample_id: score for score in scores}
    ordered = sorted(samples, key=lambda s: (-by_id[s.sample_id].value, s.sample_id))
    k = math.ceil(fraction * len(samples))
    return DifficultySplit(
        easy=tuple(ordered[len(ordered) - k:]),
        hard=tuple(ordered[:k]),
        all=tuple(ordered),
        scores=tuple(scores),
    )


# ---------------------------------------------------------------------------
# Leakage gate and similarity


class TrigramSimilarity:
    """Character-trigram cosine similarity on case/whitespace-normalized text."""

    def __call__(self, a: str, b: str) -> float:
        va, vb = self._vector(a), self._vector(b)
        if not va or not vb:
            return 1.0 if not va and not vb else 0.0
        dot = sum(count * vb.get(gram, 0) for gram, count in va.items())
        norm_a = math.sqrt(sum(c * c for c in va.values()))
        norm_b = math.sqrt(sum(c * c for c in vb.values()))
        return dot / (norm_a * norm_b)

    @staticmethod
    def _vector(text: str) -> Counter:
        normalized = WHITESPACE.sub(" ", text.lower()).strip()
        return Counter(normalized[i : i + 3] for i in range(max(0, len(normalized) - 2)))


LEAKAGE_TERMS = re.compile(r"\bground[\s_-]*truth\b", re.IGNORECASE)
LEAKAGE_THRESHOLD = 0.8


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    reason: str = ""
    similarity: float = 0.0


def leakage_gate(
    response: str,
    ground_truth: GroundTruthReport,
    similarity: Callable[[str, str], float] | None = None,
    threshold: float = LEAKAGE_THRESHOLD,
) -> GateDecision:
    """Reject responses that echo the reference: explicit terminology, or
    similarity >= threshold against the root cause, the fixing pattern, or
    their concatenation (the maximum of the three is scored)."""
    if LEAKAGE_TERMS.search(response):
        return GateDecision(accepted=False, reason="terminology")
    if similarity is None:
        similarity = TrigramSimilarity()
    targets = [
        ground_truth.root_cause,
        ground_truth.fixing_pattern,
        f"{ground_truth.root_cause} {ground_truth.fixing_pattern}",
    ]
    try:
        score = max(similarity(response, target) for target in targets if target.strip())
    except ValueError:
        score = 0.0
    if score >= threshold:
        return GateDecision(accepted=False, reason="similarity", similarity=score)
    return GateDecision(accepted=True, similarity=score)


# ---------------------------------------------------------------------------
# Gold-standard synthesis


DISCARD_LEAKAGE = "leakage-exhausted"
DISCARD_PARSE = "parse-failure"
DISCARD_UNQUALIFIED = "unqualified"

STAGE_PROMPTS = ("cot_scaffold", "stage1_nodes", "stage2_deps", "stage3_edges")


@dataclass(frozen=True)
class GoldResult:
    sample_id: str
    accepted: bool
    dag: dag_mod.ReasoningDag | None
    discard_reason: str | None
    attempts: int
    similarity: float
    provenance: dict


def _extract_json(reply: str) -> dict:
    try:
        return json.loads(reply)
    except json.JSONDecodeError:
        pass
    start = reply.find("{")
    end = reply.rfind("}")
    if start >= 0 and end > start:
        return json.loads(reply[start : end + 1])
    raise json.JSONDecodeError("no JSON object in reply", reply, 0)


def synthesize_gold(
    sample: Sample,
    generator: JudgeHandle,
    judge: JudgeHandle,
    similarity: Callable[[str, str], float] | None = None,
    max_attempts: int = 3,
) -> GoldResult:
    """Scaffold, structure, prune, and qualify one gold-standard trace.

    The chain-of-thought scaffold is resampled up to ``max_attempts`` times
    when the leakage gate rejects it; structural stages then run once, and
    the resulting graph must survive pruning and the gold quality rules.
    """
    if sample.ground_truth is None:
        raise IngestionError(f"{sample.sample_id}: gold synthesis requires a ground truth")
    gt = sample.ground_truth
    provenance = {name: prompt_fingerprint(name) for name in STAGE_PROMPTS}

    context_text = "\n\n".join(sample.context.fragments()) or "(no extra context)"
    scaffold_prompt_t = prompt_text("cot_scaffold")
    attempts = 0
    cot: str | None = None
    score = 0.0
    while attempts < max_attempts:
        attempts += 1
        prompt = scaffold_prompt_t.format(
            source=sample.source,
            context=context_text,
            root_cause=gt.root_cause,
            fixing_pattern=gt.fixing_pattern,
            attempt=attempts,
        )
        try:
            response = generator.complete(prompt)
        except Exception as exc:
            raise GeneratorUnavailable(str(exc)) from exc
        decision = leakage_gate(response, gt, similarity)
        score = decision.similarity
        if decision.accepted:
            cot = response
            break
        logger.info(
            "%s: scaffold attempt %d rejected (%s)",
            sample.sample_id, attempts, decision.reason,
        )
    if cot is None:
        return GoldResult(sample.sample_id, False, None, DISCARD_LEAKAGE,
                          attempts, score, provenance)

    try:
        stage1 = generator.complete(
            prompt_text("stage1_nodes").format(source=sample.source, analysis=cot)
        )
        stage2 = generator.complete(
            prompt_text("stage2_deps").format(nodes=stage1)
        )
        stage3 = generator.complete(
            prompt_text("stage3_edges").format(nodes=stage2)
        )
    except Exception as exc:
        raise GeneratorUnavailable(str(exc)) from exc

    try:
        doc = _extract_json(stage3)
        doc.setdefault("sample_id", sample.sample_id)
        parsed = dag_mod.parse_trace(doc)
    except (json.JSONDecodeError, dag_mod.TraceError) as exc:
        logger.info("%s: stage output unparseable: %s", sample.sample_id, exc)
        return GoldResult(sample.sample_id, False, None, DISCARD_PARSE,
                          attempts, score, provenance)

    pruned = dag_mod.prune(parsed)
    accepted, reason = dag_mod.qualify_gold(pruned)
    if not accepted:
        provenance["qualify_reason"] = reason
        return GoldResult(sample.sample_id, False, None, DISCARD_UNQUALIFIED,
                          attempts, score, provenance)
    return GoldResult(sample.sample_id, True, pruned, None, attempts, score, provenance)
