"""Constrained plan composition: route choice, strike timing and fighter tasking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from planverify.errors import NoFeasibleRoute
from planverify.model import (
    AtomicAction,
    CandidatePlan,
    EntityClass,
    Escort,
    Intent,
    Scenario,
    Suppress,
    Vec2,
)
from planverify.mpha.analyst import AssessmentVector
from planverify.mpha.kinematics import follow_polyline, launch_schedule, truncate_at_distance, with_trajectories
from planverify.mpha.pathfinder import RouteSkeleton, lattice_path


@dataclass(frozen=True)
class PlannerConfig:
    hold_fraction: float = 0.0
    pk_target: float | None = None
    tau_lead: float | None = None  # defaults to the scenario's tau_sup
    suppress_standoff: float = 0.9
    escort_offsets: tuple[tuple[float, float], ...] = ((-4.0, 6.0), (-4.0, -6.0))
    v_floor: float | None = None


def v_global(e: AssessmentVector, intent: Intent, scenario: Scenario) -> float:
    """Linear utility ``w_s*success - w_l*loss/n_blue - w_t*time/horizon``."""
    ws, wl, wt = intent.priority_weights
    n_blue = max(1, len(scenario.blue))
    return ws * e.exp_success - wl * e.exp_loss / n_blue - wt * e.exp_time / scenario.sim_config.horizon


def select_route(routes: Sequence[RouteSkeleton], assessments: Sequence[AssessmentVector],
                 intent: Intent, scenario: Scenario, cfg: PlannerConfig | None = None
                 ) -> tuple[int, float]:
    """Index of the route with the highest utility (first on ties) and that utility."""
    cfg = cfg or PlannerConfig()
    if not routes:
        raise NoFeasibleRoute("no routes to choose from")
    if len(routes) != len(assessments):
        raise ValueError("routes and assessments differ in length")
    values = [v_global(a, intent, scenario) for a in assessments]
    best = max(range(len(values)), key=lambda i: (values[i], -i))
    if cfg.v_floor is not None and values[best] < cfg.v_floor:
        raise NoFeasibleRoute(f"best utility {values[best]:.4f} below floor {cfg.v_floor}")
    return best, values[best]


@dataclass(frozen=True)
class ThreatWindow:
    aat_id: str
    score: float
    entry_tick: int
    exit_tick: int
    entry_point: tuple[float, float]


def route_threat_windows(scenario: Scenario, trajectories: dict, bomber_ids: Sequence[str]) -> list[ThreatWindow]:
    """Anti-air units whose range the bombers' planned tracks enter, most threatening first."""
    out = []
    order = {e.id: i for i, e in enumerate(scenario.entities)}
    for aat in scenario.red:
        if aat.cls is not EntityClass.ANTI_AIR_THREAT or aat.weapon is None or aat.health <= 0:
            continue
        R = aat.weapon.range_r
        entry = exit_ = None
        point = None
        prox = 0.0
        for bid in bomber_ids:
            for t, (x, y) in enumerate(trajectories[bid]):
                d = math.hypot(x - aat.position.x, y - aat.position.y)
                if d <= R:
                    prox = max(prox, 1 - d / R)
                    if entry is None or t < entry:
                        entry, point = t, (x, y)
                    exit_ = t if exit_ is None else max(exit_, t)
        if entry is not None:
            out.append(ThreatWindow(aat.id, aat.weapon.p_base * prox, entry, exit_, point))  # type: ignore[arg-type]
    out.sort(key=lambda w: (-w.score, order[w.aat_id]))
    return out


def compose_for_route(route: RouteSkeleton, scenario: Scenario, cfg: PlannerConfig | None = None,
                      plan_id: str | None = None, metadata: dict | None = None) -> CandidatePlan:
    cfg = cfg or PlannerConfig()
    sim = scenario.sim_config
    cons = scenario.constraint_set
    target = scenario.core_target.position
    blue = scenario.blue
    bombers = [e for e in blue if e.cls is EntityClass.BOMBER and e.weapon is not None]
    fighters = [e for e in blue if e.cls is EntityClass.FIGHTER]
    plan_id = plan_id or f"mpha-{route.route_id}"

    actions: list[AtomicAction] = []
    if bombers:
        reach = min(cons.launch_range(b.weapon) for b in bombers)  # type: ignore[arg-type]
        path = truncate_at_distance(route.waypoints, target, cfg.hold_fraction * reach)
        for b in bombers:
            moves, _ = follow_polyline(b, path, cons.speed_limit(b), scenario)
            actions.extend(moves)
    draft = with_trajectories(plan_id, actions, scenario, {})
    windows = route_threat_windows(scenario, dict(draft.planned_trajectories), [b.id for b in bombers])

    tau_lead = sim.tau_sup if cfg.tau_lead is None else cfg.tau_lead
    last_t = min(sim.horizon, cons.max_plan_duration)
    tasks: dict[str, str] = {}
    free = []
    for k, f in enumerate(fighters):
        if k < len(windows) and f.weapon is not None:
            w = windows[k]
            aat = scenario.entity(w.aat_id)
            dx, dy = w.entry_point[0] - aat.position.x, w.entry_point[1] - aat.position.y
            norm = math.hypot(dx, dy) or 1.0
            r = cfg.suppress_standoff * f.weapon.range_r
            spot = Vec2(min(scenario.map_width, max(0.0, aat.position.x + dx / norm * r)),
                        min(scenario.map_height, max(0.0, aat.position.y + dy / norm * r)))
            path = lattice_path(scenario, f.position, spot)
            moves, _ = follow_polyline(f, path[1:] if path[0] == f.position else path,
                                       cons.speed_limit(f), scenario)
            actions.extend(moves)
            t0 = round(max(0.0, w.entry_tick * sim.dt - tau_lead), 10)
            end = min(last_t, w.exit_tick * sim.dt + sim.tau_sup)
            if end > t0:
                actions.append(AtomicAction(f.id, t0, Suppress(w.aat_id, round(end - t0, 10))))
            tasks[f.id] = f"suppress:{w.aat_id}"
        else:
            free.append(f)
    for k, f in enumerate(free):
        if not bombers:
            break
        ally = bombers[k % len(bombers)]
        ox, oy = cfg.escort_offsets[k % len(cfg.escort_offsets)]
        actions.append(AtomicAction(f.id, 0.0, Escort(ally.id, Vec2(ox, oy))))
        tasks[f.id] = f"escort:{ally.id}"

    moved = with_trajectories(plan_id, actions, scenario, {})
    launches = launch_schedule(scenario, dict(moved.planned_trajectories), bombers, pk_target=cfg.pk_target)
    meta = {
        "generator": "mpha",
        "route_id": route.route_id,
        "route": [[p.x, p.y] for p in route.waypoints],
        "tasks": tasks,
        **(metadata or {}),
    }
    return with_trajectories(plan_id, [*actions, *launches], scenario, meta)


def planner_compose(routes: Sequence[RouteSkeleton], assessments: Sequence[AssessmentVector],
                    intent: Intent, scenario: Scenario, cfg: PlannerConfig | None = None,
                    plan_id: str | None = None) -> CandidatePlan:
    """Compose a plan on the highest-utility route."""
    best, value = select_route(routes, assessments, intent, scenario, cfg)
    e = assessments[best]
    return compose_for_route(routes[best], scenario, cfg, plan_id, {
        "v_global": value,
        "assessment": {"exp_success": e.exp_success, "exp_loss": e.exp_loss,
                       "exp_time": e.exp_time, "n_fast": e.n_fast},
    })


__all__ = ["PlannerConfig", "ThreatWindow", "compose_for_route", "planner_compose",
           "route_threat_windows", "select_route", "v_global"]
