"""Verification reports: full metric pipeline, PQS ranking and renderings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from planverify import canonical
from planverify.engine import RolloutRecord
from planverify.harness.metrics import (
    MetricWeights,
    compute_ade,
    compute_cla,
    compute_msr,
    compute_pqs,
    process_metrics,
    success_aggregates,
    suppression_rate_outcome,
)
from planverify.harness.rubric import static_score
from planverify.harness.verify import monte_carlo_verify
from planverify.model import CandidatePlan, Difficulty, Scenario
from planverify.opponents import OpponentConfig
from planverify.rng import ALGORITHM_ID
from planverify.schema import scenario_digest


def seed_spec(seeds: Sequence[int]) -> str | list[int]:
    """``"a..b"`` for a contiguous ascending range, otherwise the explicit list."""
    s = list(seeds)
    if len(s) > 1 and s == list(range(s[0], s[-1] + 1)):
        return f"{s[0]}..{s[-1]}"
    return s


@dataclass
class PlanResult:
    plan_id: str
    msr: float
    cla: float
    ade: float
    fde: float
    pqs: float
    suppression_rate_outcome: float
    process: dict
    per_scenario: dict
    static_score: dict
    fault_count: int
    overall_success: float | None = None
    robust_success: float | None = None
    rank: int = 0
    static_rank: int = 0
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "plan_id": self.plan_id, "rank": self.rank, "static_rank": self.static_rank,
            "msr": self.msr, "cla": self.cla, "ade": self.ade, "fde": self.fde, "pqs": self.pqs,
            "suppression_rate_outcome": self.suppression_rate_outcome,
            "process": self.process, "per_scenario": self.per_scenario,
            "static_score": self.static_score, "fault_count": self.fault_count,
            "records": self.records,
        }
        if self.overall_success is not None:
            out["overall_success"] = self.overall_success
            out["robust_success"] = self.robust_success
        return out


@dataclass
class VerificationReport:
    validator: dict
    seed_protocol: dict
    scenario_digests: dict
    weights: dict
    plans: list[PlanResult]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "validator": self.validator,
            "seed_protocol": self.seed_protocol,
            "scenario_digests": self.scenario_digests,
            "weights": self.weights,
            "config": self.config,
            "ranking": [p.plan_id for p in self.plans],
            "plans": [p.to_dict() for p in self.plans],
        }

    def to_bytes(self) -> bytes:
        return canonical.dump_bytes(self.to_dict())

    def to_text(self) -> str:
        head = (f"validator: {self.validator.get('kind')}  seeds: {self.seed_protocol['seeds']}  "
                f"scenarios: {', '.join(sorted(self.scenario_digests))}")
        rows = [{
            "plan": p.plan_id, "pqs": p.pqs, "msr": p.msr, "cla": p.cla, "ade": p.ade,
            "static": p.static_score["total"], "static_rank": p.static_rank, "sim_rank": p.rank,
        } for p in self.plans]
        return head + "\n" + render_rank_table(rows)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return "-" if v is None else str(v)


def render_rank_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> str:
    """Fixed-width text table; columns default to the keys of the first row."""
    if not rows:
        return "(no plans)\n"
    cols = list(columns or rows[0].keys())
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    line = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out) + "\n"


def _record_digest(r: RolloutRecord) -> dict:
    return {"scenario": r.scenario_name, "seed": r.seed.base_seed, "outcome": r.outcome.value,
            "end_tick": r.end_tick, "log_hash": r.log_hash}


def summarize_plan(plan: CandidatePlan, records_by_scenario: Mapping[str, Sequence[RolloutRecord]],
                   difficulties: Mapping[str, Difficulty], weights: MetricWeights,
                   static: dict, faults: int = 0) -> PlanResult:
    records = [r for name in sorted(records_by_scenario) for r in records_by_scenario[name]]
    msr = compute_msr(records)
    cla = compute_cla(records, weights)
    ade, fde = compute_ade(records, plan)
    per = {}
    by_diff: dict[Difficulty, list[RolloutRecord]] = {}
    for name, recs in sorted(records_by_scenario.items()):
        per[name] = {"difficulty": difficulties[name].value, "n": len(recs),
                     "msr": compute_msr(recs) if recs else None}
        by_diff.setdefault(difficulties[name], []).extend(recs)
    overall = robust = None
    if by_diff.get(Difficulty.EASY) and by_diff.get(Difficulty.DIFFICULT):
        overall, robust = success_aggregates(compute_msr(by_diff[Difficulty.EASY]),
                                             compute_msr(by_diff[Difficulty.DIFFICULT]))
    return PlanResult(
        plan_id=plan.plan_id, msr=msr, cla=cla, ade=ade, fde=fde,
        pqs=compute_pqs(msr, cla, ade, weights),
        suppression_rate_outcome=suppression_rate_outcome(msr),
        process=process_metrics(records).to_dict(), per_scenario=per, static_score=static,
        fault_count=faults, overall_success=overall, robust_success=robust,
        records=[_record_digest(r) for r in records],
    )


def assign_ranks(results: list[PlanResult]) -> list[PlanResult]:
    """Sort by PQS (desc, ties by plan_id) and fill simulation and static ranks."""
    by_static = sorted(results, key=lambda p: (-p.static_score["total"], p.plan_id))
    for k, p in enumerate(by_static, 1):
        p.static_rank = k
    ranked = sorted(results, key=lambda p: (-p.pqs, p.plan_id))
    for k, p in enumerate(ranked, 1):
        p.rank = k
    return ranked


def rank_and_report(plans: Sequence[CandidatePlan], scenarios: Scenario | Sequence[Scenario],
                    opponent: OpponentConfig | None = None, weights: MetricWeights | None = None,
                    seeds: Iterable[int] | None = None, *, workers: int = 1,
                    config: Mapping[str, Any] | None = None) -> VerificationReport:
    """Verify every plan on every scenario, compute all metrics and rank by PQS."""
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    if not plans:
        raise ValueError("no plans to verify")
    opponent = opponent or OpponentConfig()
    weights = weights or MetricWeights()
    seed_list = tuple(seeds) if seeds is not None else scenarios[0].sim_config.seed_list
    diffs = {s.name: s.difficulty for s in scenarios}
    if len(diffs) != len(scenarios):
        raise ValueError("scenario names must be unique within a report")
    results = []
    for plan in plans:
        by_scn: dict[str, list[RolloutRecord]] = {}
        faults = 0
        for s in scenarios:
            res = monte_carlo_verify(plan, s, opponent, seed_list, workers=workers)
            by_scn[s.name] = res.records
            faults += res.fault_count
        static = static_score(plan, scenarios[0]).to_dict()
        results.append(summarize_plan(plan, by_scn, diffs, weights, static, faults))
    return VerificationReport(
        validator=opponent.to_dict(),
        seed_protocol={"seeds": seed_spec(seed_list), "algorithm_id": ALGORITHM_ID, "rollout_index": 0},
        scenario_digests={s.name: scenario_digest(s) for s in scenarios},
        weights=weights.to_dict(),
        plans=assign_ranks(results),
        config=dict(config or {}),
    )
