from __future__ import annotations

import json

import pytest

from planverify.harness.metrics import MetricWeights
from planverify.harness.report import (
    PlanResult,
    assign_ranks,
    rank_and_report,
    render_rank_table,
    seed_spec,
)
from planverify.model import CandidatePlan, Intent
from planverify.mpha import generate_candidates
from planverify.opponents import OpponentConfig
from planverify.scenarios import load_template

# Published seven-plan comparison: (plan, static rank, simulation rank)
PUBLISHED_RANKS = [("Plan 1", 3, 2), ("Plan 2", 4, 6), ("Plan 3", 5, 5), ("Plan 4", 2, 3),
                   ("Plan 5", 6, 4), ("Plan 6", 1, 1), ("Plan 7", 7, 7)]


def _result(plan_id: str, static_total: float, pqs: float) -> PlanResult:
    return PlanResult(plan_id, msr=0.0, cla=0.0, ade=0.0, fde=0.0, pqs=pqs, suppression_rate_outcome=1.0,
                      process={}, per_scenario={}, static_score={"total": static_total}, fault_count=0)


def test_published_rank_pairs_render_both_rank_columns():
    # scores chosen so that sorting reproduces the published ranks exactly
    results = [_result(pid, 5.0 - 0.5 * static, 1.0 - 0.1 * sim) for pid, static, sim in PUBLISHED_RANKS]
    ranked = assign_ranks(results)
    assert [(p.plan_id, p.static_rank, p.rank) for p in sorted(ranked, key=lambda p: p.plan_id)] == PUBLISHED_RANKS
    rows = [{"plan": p.plan_id, "static_rank": p.static_rank, "sim_rank": p.rank} for p in ranked]
    text = render_rank_table(rows)
    lines = text.splitlines()
    assert lines[0].split() == ["plan", "static_rank", "sim_rank"]
    assert lines[2].split() == ["Plan", "6", "1", "1"]
    assert lines[-1].split() == ["Plan", "7", "7", "7"]
    assert len(lines) == 2 + 7


def test_ranking_orders_by_pqs_then_plan_id():
    ranked = assign_ranks([_result("b", 3, 0.30), _result("a", 3, 0.30), _result("c", 4, 0.45)])
    assert [(p.plan_id, p.rank) for p in ranked] == [("c", 1), ("a", 2), ("b", 3)]
    assert {p.plan_id: p.static_rank for p in ranked} == {"c": 1, "a": 2, "b": 3}


def test_render_handles_empty_and_none():
    assert render_rank_table([]) == "(no plans)\n"
    assert "-" in render_rank_table([{"x": None}]).splitlines()[2]


def test_seed_spec():
    assert seed_spec(range(1, 101)) == "1..100"
    assert seed_spec([3, 1, 2]) == [3, 1, 2]
    assert seed_spec([7]) == [7]


@pytest.fixture(scope="module")
def easy_plans():
    s = load_template("easy")
    (p,) = generate_candidates(Intent(s.core_target_id), s, 1)
    twin = CandidatePlan("a-twin", p.actions, p.planned_trajectories, p.metadata)
    return s, p, twin


def test_identical_plans_tie_and_rank_by_plan_id(easy_plans):
    s, p, twin = easy_plans
    rep = rank_and_report([p, twin], s, seeds=range(1, 6))
    a, b = rep.plans
    assert a.pqs == b.pqs
    assert [a.plan_id, b.plan_id] == sorted([p.plan_id, twin.plan_id])
    assert rep.to_dict()["ranking"] == [a.plan_id, b.plan_id]


def test_report_contents(easy_plans):
    s, p, _ = easy_plans
    rep = rank_and_report([p], s, OpponentConfig("predictive"), MetricWeights(eta2=0.2), seeds=range(1, 4),
                          config={"note": "x"})
    doc = json.loads(rep.to_bytes())
    assert doc["validator"]["kind"] == "predictive"
    assert doc["seed_protocol"] == {"seeds": "1..3", "algorithm_id": "philox4x64-10", "rollout_index": 0}
    assert doc["weights"]["eta2"] == 0.2
    assert set(doc["scenario_digests"]) == {s.name}
    res = doc["plans"][0]
    assert res["suppression_rate_outcome"] + res["msr"] == 1.0
    assert len(res["records"]) == 3
    assert {"static_score", "process", "per_scenario", "pqs"} <= set(res)
    assert "overall_success" not in res
    assert rep.to_text().startswith("validator: predictive")


def test_both_difficulties_give_overall_and_robust(easy_plans):
    _, p, _ = easy_plans
    easy, hard = load_template("easy"), load_template("difficult")
    rep = rank_and_report([p], [easy, hard], seeds=range(1, 3))
    r = rep.plans[0]
    e, d = r.per_scenario["easy"]["msr"], r.per_scenario["difficult"]["msr"]
    assert r.overall_success == (e + d) / 2 and r.robust_success == min(e, d)


def test_report_bytes_independent_of_worker_count(easy_plans):
    s, p, twin = easy_plans
    one = rank_and_report([p, twin], s, seeds=range(1, 9), workers=1)
    four = rank_and_report([p, twin], s, seeds=range(1, 9), workers=4)
    assert one.to_bytes() == four.to_bytes()


def test_report_argument_errors(easy_plans):
    s, p, _ = easy_plans
    with pytest.raises(ValueError):
        rank_and_report([], s)
    with pytest.raises(ValueError):
        rank_and_report([p], [s, s], seeds=[1])
