"""Hybrid verifiable reward: structural closeness plus judge-verified semantics.

The total reward is a weighted sum of two indicators: a rule-based closeness
check on the graph structure and a judge-based check that the generated sink
conclusions align with the ground truth. For vulnerable samples the semantic
part splits evenly between sink alignment and full-path veracity, which keeps
the reward from being gamed by confident verdicts with fabricated reasoning.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .dag import ReasoningDag, is_closed, render_text, validate_structure
from .judge import JudgeHandle, judge_match

STD_EPSILON = 1e-8


class UndefinedVerdict(ValueError):
    """The trace has no sink nodes, so it implies no verdict."""


class EmptyGroup(ValueError):
    pass


@dataclass(frozen=True)
class RewardWeights:
    omega_close: float = 0.3
    omega_final: float = 0.7

    def __post_init__(self) -> None:
        if self.omega_close < 0 or self.omega_final < 0:
            raise ValueError("reward weights must be non-negative")
        if self.omega_close + self.omega_final <= 0:
            raise ValueError("at least one reward weight must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    close_indicator: int
    final_indicator: float
    sink_match: int
    veracity: int
    total: float


class FinalParts(NamedTuple):
    sink_match: int
    veracity: int
    final_indicator: float


def closeness_reward(dag: ReasoningDag) -> int:
    """1 iff the trace passes every structural rule and is logically closed."""
    if not validate_structure(dag).structural_ok:
        return 0
    return 1 if is_closed(dag)[0] else 0


def final_reward(dag: ReasoningDag, ground_truth, judge: JudgeHandle) -> FinalParts:
    """Judge-based semantic indicator.

    ``sink_match`` requires the trace verdict to equal the ground-truth label
    (a hard gate) and the judge to MATCH the sink statements against the root
    cause. For vulnerable samples ``veracity`` additionally checks the full
    reasoning path, and the indicator averages the two; for benign samples
    veracity is pinned to sink_match.
    """
    verdict = dag.verdict
    if verdict is None:
        raise UndefinedVerdict(f"{dag.sample_id}: trace has no sink nodes")
    label = int(ground_truth.label)
    sink_text = "\n".join(n.statement for n in dag.sinks())
    sink_match = 0
    if verdict == label and judge_match(sink_text, ground_truth, judge).is_match:
        sink_match = 1
    if label == 1:
        veracity = 1 if judge_match(render_text(dag), ground_truth, judge).is_match else 0
        final = (sink_match + veracity) / 2.0
    else:
        veracity = sink_match
        final = float(sink_match)
    return FinalParts(sink_match=sink_match, veracity=veracity, final_indicator=final)


def total_reward(
    dag: ReasoningDag,
    ground_truth,
    judge: JudgeHandle,
    weights: RewardWeights = RewardWeights(),
) -> RewardBreakdown:
    close = closeness_reward(dag)
    parts = final_reward(dag, ground_truth, judge)
    total = weights.omega_close * close + weights.omega_final * parts.final_indicator
    return RewardBreakdown(
        close_indicator=close,
        final_indicator=parts.final_indicator,
        sink_match=parts.sink_match,
        veracity=parts.veracity,
        total=total,
    )


@dataclass(frozen=True)
class RolloutScores:
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]


def score_rollouts(rewards: Sequence[float]) -> RolloutScores:
    """Group-relative advantages: (r - mean) / population std, zero when flat."""
    if not rewards:
        raise EmptyGroup("cannot score an empty rollout group")
    values = tuple(float(r) for r in rewards)
    mean = statistics.fmean(values)
    std = statistics.pstdev(values)
    if std < STD_EPSILON:
        return RolloutScores(rewards=values, advantages=(0.0,) * len(values))
    return RolloutScores(rewards=values, advantages=tuple((v - mean) / std for v in values))


def batch_total_rewards(
    items: Sequence[tuple[ReasoningDag, object]],
    judge: JudgeHandle,
    weights: RewardWeights = RewardWeights(),
    max_in_flight: int = 4,
) -> list[RewardBreakdown]:
    """Score many (dag, ground_truth) pairs concurrently, order-stable."""
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(total_reward, dag, gt, judge, weights) for dag, gt in items]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class RewardConfig:
    omega_close: float = 0.3
    omega_final: float = 0.7
    group_size: int = 16
    judge_backend: str = "mock"
    max_in_flight: int = 4

    @property
    def weights(self) -> RewardWeights:
        return RewardWeights(self.omega_close, self.omega_final)


def load_reward_config(path: str | Path) -> RewardConfig:
    """Read a reward config from JSON or TOML, keyed exactly as the fields."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        doc = json.loads(path.read_text(encoding="utf-8"))
    known = {k: doc[k] for k in ("omega_close", "omega_final", "group_size",
                                 "judge_backend", "max_in_flight") if k in doc}
    return RewardConfig(**known)
