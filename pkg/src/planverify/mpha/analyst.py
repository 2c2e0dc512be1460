"""Fast route assessment by short NoBrain Monte-Carlo runs on a draft plan."""

from __future__ import annotations

from dataclasses import dataclass

from planverify.engine import run_rollout
from planverify.model import CandidatePlan, EntityClass, Scenario
from planverify.mpha.kinematics import follow_polyline, launch_schedule, with_trajectories
from planverify.mpha.pathfinder import RouteSkeleton
from planverify.opponents.nobrain import NoBrainOpponent
from planverify.rng import SeedInfo
from planverify.schema import scenario_digest

# analyst rollouts use their own stream index so they never share draws with verification
ANALYST_STREAM = 1


@dataclass(frozen=True)
class AssessmentVector:
    exp_success: float
    exp_loss: float
    exp_time: float
    n_fast: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.exp_success, self.exp_loss, self.exp_time)


ZERO_ASSESSMENT = AssessmentVector(0.0, 0.0, 0.0, 0)


def draft_plan(route: RouteSkeleton, scenario: Scenario, plan_id: str | None = None) -> CandidatePlan:
    """Bombers fly the whole route at their speed limit and fire every budgeted round from range entry."""
    cons = scenario.constraint_set
    bombers = [e for e in scenario.blue if e.cls is EntityClass.BOMBER]
    actions = []
    for b in bombers:
        moves, _ = follow_polyline(b, route.waypoints, cons.speed_limit(b), scenario)
        actions.extend(moves)
    plan = with_trajectories(plan_id or f"draft-{route.route_id}", actions, scenario, {})
    launches = launch_schedule(scenario, dict(plan.planned_trajectories), bombers)
    return with_trajectories(plan.plan_id, [*actions, *launches], scenario,
                             {"generator": "analyst-draft", "route_id": route.route_id})


def analyst_assess(route: RouteSkeleton, scenario: Scenario, n_fast: int = 10) -> AssessmentVector:
    """Sample means of (success, friendly platforms lost, end time) over ``n_fast`` NoBrain runs."""
    if n_fast < 1:
        raise ValueError("n_fast must be >= 1")
    plan = draft_plan(route, scenario)
    digest = scenario_digest(scenario)
    succ = loss = time = 0.0
    for seed in range(1, n_fast + 1):
        rec = run_rollout(scenario, plan, NoBrainOpponent(), SeedInfo(seed, ANALYST_STREAM),
                          scenario_digest=digest)
        succ += rec.success
        loss += rec.entities_lost["PlanExecuting"]
        time += rec.end_tick * rec.dt
    return AssessmentVector(succ / n_fast, loss / n_fast, time / n_fast, n_fast)
