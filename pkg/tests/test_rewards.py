from __future__ import annotations

import json
import random

import pytest
from conftest import make_trace

from vulnreason.dag import parse_trace
from vulnreason.judge import mock_handle
from vulnreason.pipeline import GroundTruthReport
from vulnreason.rewards import (
    EmptyGroup,
    RewardConfig,
    RewardWeights,
    UndefinedVerdict,
    batch_total_rewards,
    closeness_reward,
    final_reward,
    load_reward_config,
    score_rollouts,
    total_reward,
)

MATCH_JUDGE = mock_handle(default="Looks consistent.\nVERDICT: MATCH")
MISMATCH_JUDGE = mock_handle(default="Differs.\nVERDICT: MISMATCH")


def vul_truth(**kw):
    return GroundTruthReport(
        cwe_id="CWE-787", root_cause="flawed boundary check allows a one-byte overflow",
        fixing_pattern="use a strict comparison", label=1, **kw,
    )


def benign_truth():
    return GroundTruthReport(
        cwe_id="CWE-787", root_cause="the strict comparison rejects the boundary value",
        fixing_pattern="already fixed", label=0,
    )


def sanitized_only_dag():
    return parse_trace(make_trace("benign", [
        (1, "source", []),
        (2, "intermediate", [1]),
        (3, "sanitized_sink", [2]),
    ]))


# ---------------------------------------------------------------------------
# closeness


def test_closeness_example(example_dag):
    assert closeness_reward(example_dag) == 1


def test_closeness_empty_dag():
    empty = parse_trace({"sample_id": "e", "thinking": []})
    assert closeness_reward(empty) == 0


def test_closeness_zero_when_node_stranded(example_trace_doc):
    doc = json.loads(json.dumps(example_trace_doc))
    for node in doc["thinking"]:
        if node["step_id"] in (11, 12):
            node["direct_dependent_steps"] = [d for d in node["direct_dependent_steps"] if d != 10]
            node["justification"] += " Cites Step 9 and Step 6 and Step 8."
    assert closeness_reward(parse_trace(doc)) == 0


def test_closeness_requires_structural_validity(example_trace_doc):
    doc = json.loads(json.dumps(example_trace_doc))
    doc["thinking"][6]["justification"] = "no citation tags here."
    assert closeness_reward(parse_trace(doc)) == 0


# ---------------------------------------------------------------------------
# final reward


def test_final_reward_all_correct(example_dag):
    parts = final_reward(example_dag, vul_truth(), MATCH_JUDGE)
    assert parts == (1, 1, 1.0)


def test_final_reward_wrong_verdict_caps_sink_match():
    parts = final_reward(sanitized_only_dag(), vul_truth(), MATCH_JUDGE)
    assert parts.sink_match == 0
    assert parts.final_indicator <= 0.5


def test_final_reward_path_mismatch_halves(example_dag):
    # judge MATCHes the sink statements but MISMATCHes the full path
    judge = mock_handle(
        rules=[(r"Step 1 \[source\]", "VERDICT: MISMATCH")],
        default="VERDICT: MATCH",
    )
    parts = final_reward(example_dag, vul_truth(), judge)
    assert parts.sink_match == 1 and parts.veracity == 0
    assert parts.final_indicator == 0.5


def test_final_reward_benign_pins_veracity():
    parts = final_reward(sanitized_only_dag(), benign_truth(), MATCH_JUDGE)
    assert parts.sink_match == 1
    assert parts.veracity == parts.sink_match
    assert parts.final_indicator == 1.0


def test_final_reward_requires_verdict():
    no_sink = parse_trace(make_trace("ns", [(1, "source", [])]))
    with pytest.raises(UndefinedVerdict):
        final_reward(no_sink, vul_truth(), MATCH_JUDGE)


def test_anti_hacking_benign_label_gates_vulnerable_verdict(example_dag):
    # verdict 1 against a benign ground truth can never earn sink_match
    parts = final_reward(example_dag, benign_truth(), MATCH_JUDGE)
    assert parts.sink_match == 0
    assert parts.final_indicator == 0.0


# ---------------------------------------------------------------------------
# total reward


def test_total_reward_composition(example_dag):
    weights = RewardWeights(0.3, 0.7)
    breakdown = total_reward(example_dag, vul_truth(), MATCH_JUDGE, weights)
    assert breakdown.total == pytest.approx(1.0, abs=1e-12)
    assert breakdown.close_indicator == 1 and breakdown.final_indicator == 1.0


def test_total_reward_half_final(example_dag):
    judge = mock_handle(rules=[(r"Step 1 \[source\]", "VERDICT: MISMATCH")],
                        default="VERDICT: MATCH")
    breakdown = total_reward(example_dag, vul_truth(), judge, RewardWeights(0.3, 0.7))
    assert breakdown.total == pytest.approx(0.3 * 1 + 0.7 * 0.5, abs=1e-12)


def test_total_reward_zero_for_open_mismatch():
    dag = parse_trace(make_trace("open", [
        (1, "source", []),
        (2, "source", []),
        (3, "verified_sink", [1]),
    ]))
    assert not closeness_reward(dag)
    breakdown = total_reward(dag, vul_truth(), MISMATCH_JUDGE, RewardWeights(0.9, 0.1))
    assert breakdown.total == 0.0


def test_total_reward_identity_on_weight_grid(example_dag):
    judge = mock_handle(rules=[(r"Step 1 \[source\]", "VERDICT: MISMATCH")],
                        default="VERDICT: MATCH")
    for i in range(10):
        for j in range(10):
            w1, w2 = 0.1 + i * 0.09, 0.05 + j * 0.1
            breakdown = total_reward(example_dag, vul_truth(), judge, RewardWeights(w1, w2))
            assert abs(breakdown.total - (w1 * breakdown.close_indicator
                                          + w2 * breakdown.final_indicator)) < 1e-12
            assert 0.0 <= breakdown.total <= w1 + w2


def test_total_reward_monotone_in_omega_close(example_dag):
    totals = [
        total_reward(example_dag, vul_truth(), MATCH_JUDGE, RewardWeights(w, 0.5)).total
        for w in (0.1, 0.4, 0.9)
    ]
    assert totals == sorted(totals) and totals[0] < totals[-1]


def test_total_reward_deterministic_with_mock(example_dag):
    results = {
        total_reward(example_dag, vul_truth(), MATCH_JUDGE).total for _ in range(5)
    }
    assert len(results) == 1


def test_batch_total_rewards_order_stable(example_dag):
    items = [(example_dag, vul_truth()), (sanitized_only_dag(), benign_truth())]
    single = [total_reward(d, g, MATCH_JUDGE) for d, g in items]
    batched = batch_total_rewards(items, MATCH_JUDGE, max_in_flight=2)
    assert batched == single


# ---------------------------------------------------------------------------
# rollout scoring


def test_rollouts_zero_variance():
    scores = score_rollouts([1.0, 1.0, 1.0, 1.0])
    assert scores.advantages == (0.0, 0.0, 0.0, 0.0)


def test_rollouts_two_point():
    scores = score_rollouts([0.0, 1.0])
    assert scores.advantages == pytest.approx((-1.0, 1.0))


def test_rollouts_permutation_equivariance():
    rng = random.Random(2)
    base = [rng.random() for _ in range(16)]
    perm = list(range(16))
    rng.shuffle(perm)
    shuffled = [base[k] for k in perm]
    a = score_rollouts(base).advantages
    b = score_rollouts(shuffled).advantages
    assert all(abs(b[i] - a[perm[i]]) < 1e-12 for i in range(16))


def test_rollouts_zero_mean():
    rng = random.Random(9)
    for _ in range(50):
        values = [rng.uniform(0, 2) for _ in range(rng.randint(1, 32))]
        advantages = score_rollouts(values).advantages
        assert abs(sum(advantages) / len(advantages)) < 1e-9


def test_rollouts_empty_group():
    with pytest.raises(EmptyGroup):
        score_rollouts([])


# ---------------------------------------------------------------------------
# weights and config


def test_weights_validation():
    with pytest.raises(ValueError):
        RewardWeights(-0.1, 0.5)
    with pytest.raises(ValueError):
        RewardWeights(0.0, 0.0)


def test_reward_config_files(tmp_path):
    json_path = tmp_path / "reward.json"
    json_path.write_text(json.dumps({
        "omega_close": 0.25, "omega_final": 0.75, "group_size": 8,
        "judge_backend": "mock", "max_in_flight": 2,
    }))
    config = load_reward_config(json_path)
    assert config.weights == RewardWeights(0.25, 0.75)
    assert config.group_size == 8

    toml_path = tmp_path / "reward.toml"
    toml_path.write_text('omega_close = 0.4\nomega_final = 0.6\ngroup_size = 16\n')
    config = load_reward_config(toml_path)
    assert config.weights == RewardWeights(0.4, 0.6)
    assert config.group_size == 16
