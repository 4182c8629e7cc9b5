"""Reasoning-aware evaluation: confusion categories, R-metrics, pair analysis,
and the 12-code error taxonomy.

Classification is driven by the triplet (ground truth, prediction, reasoning
flag). Vulnerable code is scored strictly: a correct verdict with mismatched
reasoning still counts as a miss. Patched code is scored leniently: a
vulnerable verdict whose reasoning correctly analyzes the fix is reclassified
as a true negative (tracked separately as TN*).
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class InconsistentFlags(ValueError):
    """Reasoning flag supplied where the matrix expects none, or vice versa."""


class EmptyCorpus(ValueError):
    pass


class UnpairedSample(ValueError):
    pass


class UnknownCode(ValueError):
    pass


class Reasoning(str, Enum):
    MATCH = "MATCH"
    MISMATCH = "MISMATCH"
    NOT_APPLICABLE = "NOT_APPLICABLE"


class Category(str, Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"
    TN_STAR = "TN*"


@dataclass(frozen=True)
class OutcomeRecord:
    ground_truth: int
    prediction: int
    reasoning: Reasoning
    category: Category


def classify_outcome(g: int, p: int, r: Reasoning | str) -> OutcomeRecord:
    """Map a (G, P, R) triplet to its unique outcome category.

    The reasoning flag must be NOT_APPLICABLE exactly when the prediction is
    0 (the judge is never consulted for negative predictions).
    """
    if g not in (0, 1) or p not in (0, 1):
        raise InconsistentFlags(f"labels must be 0/1, got g={g!r} p={p!r}")
    r = Reasoning(r)
    if p == 0 and r is not Reasoning.NOT_APPLICABLE:
        raise InconsistentFlags(f"reasoning flag {r.value} supplied for a negative prediction")
    if p == 1 and r is Reasoning.NOT_APPLICABLE:
        raise InconsistentFlags("reasoning flag required for a positive prediction")
    if g == 1:
        category = (
            Category.TP if (p == 1 and r is Reasoning.MATCH)
            else Category.FN
        )
    else:
        if p == 0:
            category = Category.TN
        elif r is Reasoning.MATCH:
            category = Category.TN_STAR
        else:
            category = Category.FP
    return OutcomeRecord(ground_truth=g, prediction=p, reasoning=r, category=category)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    denom = precision + recall
    return 2 * precision * recall / denom if denom > 0 else 0.0


def outcome_counts(records: Iterable[OutcomeRecord]) -> Counter:
    return Counter(rec.category for rec in records)


def reasoning_metrics(records: Sequence[OutcomeRecord]) -> MetricSet:
    """R-metrics over reasoning-adjusted categories; TN* pools with TN."""
    if not records:
        raise EmptyCorpus("no outcome records")
    counts = outcome_counts(records)
    tp = counts[Category.TP]
    fp = counts[Category.FP]
    fn = counts[Category.FN]
    tn = counts[Category.TN] + counts[Category.TN_STAR]
    total = len(records)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return MetricSet(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
    )


def detection_metrics(records: Sequence[tuple[int, int]]) -> MetricSet:
    """Plain binary-classification metrics on (ground truth, prediction)."""
    if not records:
        raise EmptyCorpus("no detection records")
    tp = sum(1 for g, p in records if g == 1 and p == 1)
    tn = sum(1 for g, p in records if g == 0 and p == 0)
    fp = sum(1 for g, p in records if g == 0 and p == 1)
    fn = sum(1 for g, p in records if g == 1 and p == 0)
    total = len(records)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return MetricSet(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
    )


PAIR_CELLS = (
    ("MATCH", "MATCH"),
    ("MATCH", "MISMATCH"),
    ("MISMATCH", "MATCH"),
    ("MISMATCH", "MISMATCH"),
)


def pairwise_outcomes(
    pairs: Sequence[tuple[OutcomeRecord, OutcomeRecord]],
) -> dict[tuple[str, str], int]:
    """Count (vulnerable, patched) reasoning outcomes over coupled pairs.

    The vulnerable side counts as MATCH only for a TP; the patched side
    counts as MATCH for TN or TN*.
    """
    counts: dict[tuple[str, str], int] = {cell: 0 for cell in PAIR_CELLS}
    for vul, patch in pairs:
        if vul.ground_truth != 1 or patch.ground_truth != 0:
            raise UnpairedSample(
                f"pair sides must be (vulnerable, patched); got g={vul.ground_truth}/{patch.ground_truth}"
            )
        vul_side = "MATCH" if vul.category is Category.TP else "MISMATCH"
        patch_side = "MATCH" if patch.category in (Category.TN, Category.TN_STAR) else "MISMATCH"
        counts[(vul_side, patch_side)] += 1
    return counts


# ---------------------------------------------------------------------------
# Error-code taxonomy (open-coding codebook)

CODEBOOK: dict[str, tuple[str, str, str]] = {
    "FE": ("Analysis Focus", "Analysis Focus Identification Error",
           "Starts the analysis on code unrelated to the actual weakness."),
    "CS1": ("Code Comprehension", "Data Flow Misunderstanding",
            "Loses track of how values move between variables and calls, or misses a transformation such as sanitization."),
    "CS2": ("Code Comprehension", "Control Flow Misunderstanding",
            "Gets execution paths wrong: reachability, loop exit conditions, or branch logic."),
    "CS3": ("Code Comprehension", "Intra-procedural Semantic Error",
            "Misreads logic local to one function, with no cross-function calls involved."),
    "CS4": ("Code Comprehension", "Inter-procedural Semantic Error",
            "Misreads semantics across call boundaries or interactions with external systems."),
    "AR1": ("Logic & Reasoning", "Fallacy of Incomplete Evidence",
            "Builds an argument from supporting facts while ignoring counter-evidence such as existing checks."),
    "AR2": ("Logic & Reasoning", "Spurious Causality Fallacy",
            "Promotes a superficial code feature to root cause without a causal link."),
    "AR3": ("Logic & Reasoning", "Flawed Premise Fallacy",
            "Assumes wrong facts about the environment, trust boundaries, or API behavior."),
    "AR4": ("Logic & Reasoning", "Contradiction Fallacy",
            "Derives mutually conflicting conclusions inside one reasoning chain."),
    "GB1": ("Generative Bias", "Hallucination Bias",
            "Invents variables, calls, or dependencies that do not exist in the code."),
    "GB2": ("Generative Bias", "Over-inference Bias",
            "Extrapolates an improbable or impossible attack chain from weak clues."),
    "GB3": ("Generative Bias", "Redundancy Bias",
            "Pads the trace with repetitive or generic content unrelated to the argument."),
}

CODEBOOK_ORDER: tuple[str, ...] = (
    "FE", "CS1", "CS2", "CS3", "CS4", "AR1", "AR2", "AR3", "AR4", "GB1", "GB2", "GB3",
)


@dataclass(frozen=True)
class ErrorLabelSet:
    """Between one and four codes drawn from the 12-code codebook."""

    codes: frozenset[str]

    def __post_init__(self) -> None:
        if not isinstance(self.codes, frozenset):
            object.__setattr__(self, "codes", frozenset(self.codes))
        unknown = self.codes - set(CODEBOOK_ORDER)
        if unknown:
            raise UnknownCode(f"codes outside the codebook: {sorted(unknown)}")
        if not 1 <= len(self.codes) <= 4:
            raise ValueError(f"label sets carry 1..4 codes, got {len(self.codes)}")

    def ordered(self) -> tuple[str, ...]:
        return tuple(c for c in CODEBOOK_ORDER if c in self.codes)


def error_heatmap(
    labels: Mapping[str, tuple[str, ErrorLabelSet]],
) -> dict[str, dict[str, int]]:
    """Per-model frequency of each error code across labeled samples."""
    matrix: dict[str, dict[str, int]] = {}
    for _sample, (model, label_set) in labels.items():
        if not isinstance(label_set, ErrorLabelSet):
            label_set = ErrorLabelSet(frozenset(label_set))
        row = matrix.setdefault(model, {code: 0 for code in CODEBOOK_ORDER})
        for code in label_set.codes:
            row[code] += 1
    return matrix


def heatmap_csv(matrix: Mapping[str, Mapping[str, int]]) -> str:
    """Stable CSV rendering: model rows sorted, columns in codebook order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["model", *CODEBOOK_ORDER])
    for model in sorted(matrix):
        row = matrix[model]
        writer.writerow([model, *(row.get(code, 0) for code in CODEBOOK_ORDER)])
    return buffer.getvalue()


def closeness_rate(dags: Sequence) -> float:
    """Percentage of DAGs that are logically closed."""
    from .dag import is_closed

    if not dags:
        raise EmptyCorpus("no DAGs")
    closed = sum(1 for d in dags if is_closed(d)[0])
    return 100.0 * closed / len(dags)


# ---------------------------------------------------------------------------
# JSONL import/export

@dataclass(frozen=True)
class OutcomeRow:
    """An OutcomeRecord plus the identity fields used for joins."""

    sample_id: str
    record: OutcomeRecord
    lineage_id: str = ""
    model: str = ""

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "lineage_id": self.lineage_id,
            "model": self.model,
            "ground_truth": self.record.ground_truth,
            "prediction": self.record.prediction,
            "reasoning": self.record.reasoning.value,
            "category": self.record.category.value,
        }


def row_from_dict(doc: Mapping) -> OutcomeRow:
    record = classify_outcome(doc["ground_truth"], doc["prediction"], doc["reasoning"])
    stated = doc.get("category")
    if stated is not None and Category(stated) is not record.category:
        raise InconsistentFlags(
            f"{doc.get('sample_id')}: stated category {stated} does not match "
            f"({record.ground_truth},{record.prediction},{record.reasoning.value})"
        )
    return OutcomeRow(
        sample_id=str(doc.get("sample_id", "")),
        lineage_id=str(doc.get("lineage_id", "")),
        model=str(doc.get("model", "")),
        record=record,
    )


def write_outcomes(path: str | Path, rows: Iterable[OutcomeRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")


def read_outcomes(path: str | Path) -> list[OutcomeRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(row_from_dict(json.loads(line)))
    return rows
