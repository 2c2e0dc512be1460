"""Static (simulation-free) plan scoring on five 1..5 dimensions.

Threshold tables, applied top to bottom with the first match winning:

smoothness  mean total turning per entity (rad)   <=0.5:5  <=1.0:4  <=2.0:3  <=4.0:2  else 1
threat      bomber exposure / direct-path exposure <=0.25:5 <=0.5:4 <=0.75:3 <=1.0:2  else 1
            (a zero-exposure direct path scores 5 when the plan is also unexposed, else 1)
resource    planned launches / launch budget       <=0.4:5  <=0.55:4 <=0.7:3  <=0.85:2 else 1
coordination fraction of anti-air range entries
            covered by a SUPPRESS that starts no
            later than the entry                   >=1:5    >=0.75:4 >=0.5:3  >0:2     else 1
            (no range entries scores 5)
feasibility validator failure or no launches: 1; otherwise mean launch margin (R-d)/R
                                                   >=0.3:5  >=0.2:4  >=0.1:3  else 2
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

from planverify.model import CandidatePlan, EntityClass, Launch, Scenario, Suppress, Vec2
from planverify.mpha.pathfinder import ThreatField, route_endpoints, route_exposure
from planverify.mpha.planner import route_threat_windows
from planverify.mpha.validator import validator_check

DIMENSIONS = ("smoothness", "threat_avoidance", "resource", "coordination", "feasibility")

SMOOTHNESS_TABLE = ((0.5, 5), (1.0, 4), (2.0, 3), (4.0, 2))
THREAT_TABLE = ((0.25, 5), (0.5, 4), (0.75, 3), (1.0, 2))
RESOURCE_TABLE = ((0.4, 5), (0.55, 4), (0.7, 3), (0.85, 2))
COORDINATION_TABLE = ((1.0, 5), (0.75, 4), (0.5, 3))
FEASIBILITY_TABLE = ((0.3, 5), (0.2, 4), (0.1, 3))


def _at_most(value: float, table: Sequence[tuple[float, int]]) -> int:
    for limit, score in table:
        if value <= limit + 1e-12:
            return score
    return 1


def _at_least(value: float, table: Sequence[tuple[float, int]], floor: int) -> int:
    for limit, score in table:
        if value >= limit - 1e-12:
            return score
    return floor


@dataclass(frozen=True)
class StaticScore:
    smoothness: int
    threat_avoidance: int
    resource: int
    coordination: int
    feasibility: int
    total: float
    raw: Mapping[str, float]

    def to_dict(self) -> dict:
        return asdict(self)


def turning(traj: Sequence[tuple[float, float]]) -> float:
    """Total absolute heading change along a sampled trajectory (radians)."""
    heads = []
    for (x0, y0), (x1, y1) in zip(traj, traj[1:]):
        if math.hypot(x1 - x0, y1 - y0) > 1e-9:
            heads.append(math.atan2(y1 - y0, x1 - x0))
    total = 0.0
    for a, b in zip(heads, heads[1:]):
        total += abs((b - a + math.pi) % (2 * math.pi) - math.pi)
    return total


def static_score(plan: CandidatePlan, scenario: Scenario,
                 weights: Mapping[str, float] | None = None) -> StaticScore:
    weights = weights or {d: 1.0 for d in DIMENSIONS}
    cons = scenario.constraint_set
    cfg = scenario.sim_config
    target = scenario.core_target
    blue = scenario.blue
    bombers = [e for e in blue if e.cls is EntityClass.BOMBER]
    trajs = plan.planned_trajectories

    turns = [turning(trajs[e.id]) for e in blue if e.id in trajs]
    smooth_raw = sum(turns) / len(turns) if turns else 0.0
    smoothness = _at_most(smooth_raw, SMOOTHNESS_TABLE)

    field = ThreatField(scenario)
    start, goal = route_endpoints(scenario)
    direct = route_exposure(field, [start, goal], 4.0)
    exposures = [route_exposure(field, [Vec2(*p) for p in trajs[b.id]], 4.0) for b in bombers if b.id in trajs]
    plan_exp = sum(exposures) / len(exposures) if exposures else 0.0
    if direct <= 0:
        threat_raw = 0.0 if plan_exp <= 0 else math.inf
    else:
        threat_raw = plan_exp / direct
    threat = _at_most(threat_raw, THREAT_TABLE)

    launches = [a for a in plan.actions if isinstance(a.order, Launch)]
    budget = sum(cons.budget(e) for e in blue if e.weapon is not None and e.cls is EntityClass.BOMBER)
    res_raw = len(launches) / budget if budget else (0.0 if not launches else math.inf)
    resource = _at_most(res_raw, RESOURCE_TABLE)

    windows = route_threat_windows(scenario, {k: list(v) for k, v in trajs.items()},
                                   [b.id for b in bombers if b.id in trajs])
    if windows:
        covered = 0
        for w in windows:
            if any(isinstance(a.order, Suppress) and a.order.target_id == w.aat_id
                   and a.t_start <= w.entry_tick * cfg.dt + 1e-9 for a in plan.actions):
                covered += 1
        coord_raw = covered / len(windows)
        coordination = _at_least(coord_raw, COORDINATION_TABLE, 2 if covered else 1)
    else:
        coord_raw = 1.0
        coordination = 5

    valid = not validator_check(plan, scenario)
    margins = []
    for a in launches:
        e = scenario.entity(a.actor_id)
        tk = max(1, int(round(a.t_start / cfg.dt)))
        traj = trajs.get(a.actor_id)
        if e.weapon is None or traj is None or tk >= len(traj):
            continue
        d = math.hypot(traj[tk][0] - target.position.x, traj[tk][1] - target.position.y)
        margins.append((e.weapon.range_r - d) / e.weapon.range_r)
    feas_raw = sum(margins) / len(margins) if margins else 0.0
    feasibility = 1 if not valid or not margins else _at_least(feas_raw, FEASIBILITY_TABLE, 2)

    scores = {"smoothness": smoothness, "threat_avoidance": threat, "resource": resource,
              "coordination": coordination, "feasibility": feasibility}
    wsum = sum(weights[d] for d in DIMENSIONS)
    total = sum(weights[d] * scores[d] for d in DIMENSIONS) / wsum
    raw = {"smoothness": smooth_raw, "threat_avoidance": threat_raw if math.isfinite(threat_raw) else -1.0,
           "resource": res_raw if math.isfinite(res_raw) else -1.0, "coordination": coord_raw,
           "feasibility": feas_raw, "valid": float(valid)}
    return StaticScore(total=total, raw=raw, **scores)
