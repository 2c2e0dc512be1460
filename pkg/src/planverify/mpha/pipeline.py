"""End-to-end candidate generation: routes, assessment, composition, validation."""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace

from planverify.errors import IrreparableViolation, NoValidCandidate, PlanVerifyError
from planverify.model import AtomicAction, CandidatePlan, EntityClass, Escort, Intent, Scenario, Vec2
from planverify.mpha.analyst import ZERO_ASSESSMENT, AssessmentVector, analyst_assess, draft_plan
from planverify.mpha.kinematics import follow_polyline, launch_schedule, with_trajectories
from planverify.mpha.pathfinder import PathfinderConfig, make_route, pathfinder_topk, route_endpoints, threat_field
from planverify.mpha.planner import PlannerConfig, compose_for_route, v_global
from planverify.mpha.validator import validate_and_repair
from planverify.schema import intent_to_dict, plan_from_dict, scenario_to_dict

log = logging.getLogger(__name__)

ABLATIONS = ("single", "no_pf", "no_an", "no_pl")


@dataclass(frozen=True)
class GeneratorConfig:
    n_fast: int = 10
    r_max: int = 3
    pathfinder: PathfinderConfig = field(default_factory=PathfinderConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    endpoint: str | None = None  # external one-shot generator for the ``single`` ablation
    timeout: float = 30.0


def direct_route(scenario: Scenario, cfg: PathfinderConfig):
    start, goal = route_endpoints(scenario)
    return make_route("direct", (start, goal), threat_field(scenario), cfg)


def naive_single_plan(scenario: Scenario, plan_id: str = "single") -> CandidatePlan:
    """One-shot plan without any search: straight run, fire everything, fighters escort."""
    cons = scenario.constraint_set
    target = scenario.core_target.position
    bombers = [e for e in scenario.blue if e.cls is EntityClass.BOMBER]
    fighters = [e for e in scenario.blue if e.cls is EntityClass.FIGHTER]
    actions = []
    for b in bombers:
        moves, _ = follow_polyline(b, [target], cons.speed_limit(b), scenario)
        actions.extend(moves)
    for k, f in enumerate(fighters):
        if bombers:
            offset = Vec2(-4.0, 6.0 if k % 2 == 0 else -6.0)
            actions.append(AtomicAction(f.id, 0.0, Escort(bombers[k % len(bombers)].id, offset)))
    moved = with_trajectories(plan_id, actions, scenario, {})
    launches = launch_schedule(scenario, dict(moved.planned_trajectories), bombers)
    return with_trajectories(plan_id, [*actions, *launches], scenario,
                             {"generator": "single", "route_id": "direct"})


def external_plan(intent: Intent, scenario: Scenario, endpoint: str, timeout: float) -> CandidatePlan:
    body = json.dumps({"intent": intent_to_dict(intent), "scenario": scenario_to_dict(scenario)}).encode()
    req = urllib.request.Request(endpoint.rstrip("/") + "/plan", data=body, method="POST",
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            if resp.status != 200:
                raise PlanVerifyError(f"plan generator answered HTTP {resp.status}")
            return plan_from_dict(json.loads(resp.read()))
    except urllib.error.URLError as exc:
        raise PlanVerifyError(f"plan generator unreachable: {exc}") from exc


def _finish(plan: CandidatePlan, scenario: Scenario, r_max: int) -> CandidatePlan | None:
    try:
        out = validate_and_repair(plan, scenario, r_max)
    except IrreparableViolation as exc:
        log.info("discarding %s: %s", plan.plan_id, exc)
        return None
    meta = dict(out.plan.metadata)
    meta["repair_iterations"] = out.iterations
    return CandidatePlan(out.plan.plan_id, out.plan.actions, out.plan.planned_trajectories, meta)


def generate_candidates(intent: Intent, scenario: Scenario, n: int = 1, *, ablate: str | None = None,
                        config: GeneratorConfig | None = None) -> list[CandidatePlan]:
    """Up to ``n`` validated plans, best first.

    ``ablate`` removes one stage: ``no_pf`` plans on the direct route,
    ``no_an`` skips assessment (routes keep pathfinder order), ``no_pl`` uses
    the analyst's draft plan, ``single`` asks the external generator (or a
    built-in naive one-shot plan) and bypasses all stages.  Every output
    passes the validator; candidates it cannot repair are discarded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if ablate is not None and ablate not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablate!r}; expected one of {ABLATIONS}")
    cfg = config or GeneratorConfig()
    scenario_c = scenario
    if intent.hard_constraints:
        scenario_c = replace(scenario, constraint_set=intent.constraints_for(scenario))
    tag = ablate or "mpha"

    if ablate == "single":
        if cfg.endpoint:
            raw = external_plan(intent, scenario_c, cfg.endpoint, cfg.timeout)
        else:
            raw = naive_single_plan(scenario_c, "single-1")
        plan = _finish(raw, scenario_c, cfg.r_max)
        if plan is None:
            raise NoValidCandidate("the one-shot plan could not be repaired")
        return [plan]

    routes = [direct_route(scenario_c, cfg.pathfinder)] if ablate == "no_pf" else \
        list(pathfinder_topk(intent, scenario_c, n, cfg.pathfinder))
    if ablate == "no_an":
        assessments = [ZERO_ASSESSMENT] * len(routes)
    else:
        assessments = [analyst_assess(r, scenario_c, cfg.n_fast) for r in routes]

    scored: list[tuple[float, int, CandidatePlan]] = []
    for k, (route, e) in enumerate(zip(routes, assessments)):
        value = v_global(e, intent, scenario_c) if e is not ZERO_ASSESSMENT else 0.0
        meta = {
            "generator": tag,
            "v_global": value,
            "assessment": {"exp_success": e.exp_success, "exp_loss": e.exp_loss,
                           "exp_time": e.exp_time, "n_fast": e.n_fast},
        }
        pid = f"{tag}-{route.route_id}"
        if ablate == "no_pl":
            raw = draft_plan(route, scenario_c, pid)
            raw = CandidatePlan(raw.plan_id, raw.actions, raw.planned_trajectories,
                                {**raw.metadata, **meta, "generator": tag,
                                 "route": [[p.x, p.y] for p in route.waypoints]})
        else:
            raw = compose_for_route(route, scenario_c, cfg.planner, pid, meta)
        plan = _finish(raw, scenario_c, cfg.r_max)
        if plan is not None:
            scored.append((value, k, plan))
    if not scored:
        raise NoValidCandidate(f"all {len(routes)} candidates were discarded by the validator")
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [p for _, _, p in scored[:n]]


__all__ = ["ABLATIONS", "AssessmentVector", "GeneratorConfig", "direct_route", "generate_candidates",
           "naive_single_plan"]
