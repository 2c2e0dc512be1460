"""Rule-based plan checking and deterministic local repair.

``validator_check`` replays the plan's own kinematics (no opponent, no
randomness) and reports every constraint violation.  ``repair_plan`` applies
one edit per violation in a fixed code order and regenerates the planned
trajectories; ``validate_and_repair`` loops the two with a progress guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from planverify.engine import simulate_kinematics
from planverify.errors import IrreparableViolation
from planverify.model import (
    AtomicAction,
    CandidatePlan,
    Escort,
    Launch,
    MoveTo,
    NoFlyZone,
    Scenario,
    Suppress,
    Vec2,
)
from planverify.mpha.kinematics import fire_gap_ticks, follow_polyline
from planverify.mpha.pathfinder import segment_clear, segment_point_distance

CODES = (
    "TimestampDisorder",
    "SpeedExceeded",
    "NoFlyIncursion",
    "DurationExceeded",
    "OutOfRangeLaunch",
    "AmmoExceeded",
    "SalvoLimit",
)
_RANK = {c: i for i, c in enumerate(CODES)}
SPEED_EPS = 1e-9


@dataclass(frozen=True)
class Violation:
    code: str
    actor_id: str
    t: float
    detail: float
    info: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.code not in _RANK:
            raise ValueError(f"unknown violation code {self.code!r}")

    def key(self) -> tuple:
        return (_RANK[self.code], self.actor_id, self.t)

    def to_dict(self) -> dict:
        return {"code": self.code, "actor_id": self.actor_id, "t": self.t, "detail": self.detail}


def violation_counts(violations: Sequence[Violation]) -> tuple[int, ...]:
    counts = [0] * len(CODES)
    for v in violations:
        counts[_RANK[v.code]] += 1
    return tuple(counts)


def _tick(a: AtomicAction, dt: float) -> int:
    return max(1, int(round(a.t_start / dt)))


def _end_time(a: AtomicAction) -> float:
    return a.t_start + a.order.duration if isinstance(a.order, Suppress) else a.t_start


def validator_check(plan: CandidatePlan, scenario: Scenario) -> list[Violation]:
    cfg = scenario.sim_config
    cons = scenario.constraint_set
    dt = cfg.dt
    known = {e.id: e for e in scenario.entities}
    out: list[Violation] = []

    # timestamp order (adjacent inversions in the action list)
    for prev, cur in zip(plan.actions, plan.actions[1:]):
        if cur.sort_key() < prev.sort_key():
            out.append(Violation("TimestampDisorder", cur.actor_id, cur.t_start,
                                 max(0.0, prev.t_start - cur.t_start)))

    traj = simulate_kinematics(scenario, plan.actions)

    # speed: commanded MOVE_TO speeds, then implied per-tick speed of the replay
    speed_flagged = set()
    for a in plan.actions:
        e = known.get(a.actor_id)
        if e is None or not isinstance(a.order, MoveTo):
            continue
        limit = cons.speed_limit(e)
        if a.order.speed > limit + SPEED_EPS:
            out.append(Violation("SpeedExceeded", a.actor_id, a.t_start, a.order.speed - limit))
            speed_flagged.add(a.actor_id)
    for eid, pts in traj.items():
        if eid in speed_flagged:
            continue
        limit = cons.speed_limit(known[eid])
        for t in range(1, len(pts)):
            v = math.hypot(pts[t][0] - pts[t - 1][0], pts[t][1] - pts[t - 1][1]) / dt
            if v > limit + 1e-6:
                out.append(Violation("SpeedExceeded", eid, t * dt, v - limit))
                break

    # no-fly incursions: one per (entity, zone), detail = deepest penetration
    for eid, pts in traj.items():
        for zi, z in enumerate(cons.no_fly_zones):
            first, depth = None, 0.0
            for t in range(len(pts)):
                d = segment_point_distance(*pts[max(0, t - 1)], *pts[t], z.center.x, z.center.y)
                if d < z.radius:
                    if first is None:
                        first = t
                    depth = max(depth, z.radius - d)
            if first is not None:
                out.append(Violation("NoFlyIncursion", eid, first * dt, depth, {"zone": zi}))

    # plan duration
    limit_t = min(cons.max_plan_duration, cfg.horizon)
    for a in plan.actions:
        end = _end_time(a)
        if end > limit_t + 1e-9:
            out.append(Violation("DurationExceeded", a.actor_id, a.t_start, end - limit_t))

    # launches: range, ammo budget, salvo size
    per_actor: dict[str, int] = {}
    per_tick: dict[int, list[AtomicAction]] = {}
    n_ticks = len(next(iter(traj.values()))) if traj else 0
    for a in plan.actions:
        if not isinstance(a.order, Launch):
            continue
        e = known.get(a.actor_id)
        tgt = known.get(a.order.target_id)
        if e is None or tgt is None or e.weapon is None:
            continue
        tk = _tick(a, dt)
        per_actor[a.actor_id] = per_actor.get(a.actor_id, 0) + 1
        per_tick.setdefault(tk, []).append(a)
        if a.actor_id in traj and tk < n_ticks:
            x, y = traj[a.actor_id][tk]
            d = math.hypot(x - tgt.position.x, y - tgt.position.y)
            reach = cons.launch_range(e.weapon)
            if d > reach + 1e-9:
                out.append(Violation("OutOfRangeLaunch", a.actor_id, a.t_start, d - reach))
    for eid, n in per_actor.items():
        budget = cons.budget(known[eid])
        if n > budget:
            out.append(Violation("AmmoExceeded", eid, 0.0, float(n - budget)))
    for tk, acts in sorted(per_tick.items()):
        excess = len(acts) - cons.max_launches_per_tick
        if excess > 0:
            out.append(Violation("SalvoLimit", acts[-1].actor_id, tk * dt, float(excess)))

    out.sort(key=Violation.key)
    return out


# ---------------------------------------------------------------------------
# repair
# ---------------------------------------------------------------------------


def _retime_moves(scenario: Scenario, actions: list[AtomicAction], actor_id: str,
                  speed_cap: float | None = None) -> list[AtomicAction]:
    """Re-time an actor's MOVE_TO chain so each leg starts after the previous arrival."""
    dt = scenario.sim_config.dt
    entity = scenario.entity(actor_id)
    moves = [a for a in actions if a.actor_id == actor_id and isinstance(a.order, MoveTo)]
    if not moves:
        return actions
    rest = [a for a in actions if not (a.actor_id == actor_id and isinstance(a.order, MoveTo))]
    new: list[AtomicAction] = []
    pos = entity.position
    next_free = _tick(moves[0], dt)
    for a in moves:
        speed = a.order.speed if speed_cap is None else min(a.order.speed, speed_cap)
        start = max(_tick(a, dt), next_free)
        new.append(AtomicAction(actor_id, round(start * dt, 10), MoveTo(a.order.waypoint, speed)))
        _, arrive = follow_polyline(replace(entity, position=pos), [a.order.waypoint], speed, scenario,
                                    first_tick=start)
        next_free = int(arrive) + 1 if math.isfinite(arrive) else start
        pos = a.order.waypoint
    return rest + new


def _leg_start(scenario: Scenario, actions: Sequence[AtomicAction], move: AtomicAction) -> Vec2:
    """Position of the actor when ``move`` takes effect, from the replayed kinematics."""
    tk = _tick(move, scenario.sim_config.dt)
    traj = simulate_kinematics(scenario, actions, tk)
    x, y = traj[move.actor_id][tk - 1]
    return Vec2(x, y)


def _detour_point(a: Vec2, b: Vec2, zone: NoFlyZone, zones: Sequence[NoFlyZone],
                  margin: float = 1.0) -> Vec2 | None:
    """Point beside ``zone`` such that a->p->b clears it by ``margin`` (scanned outwards)."""
    dx, dy = b.x - a.x, b.y - a.y
    L = math.hypot(dx, dy) or 1.0
    nx, ny = -dy / L, dx / L
    cx, cy = zone.center.x, zone.center.y
    # choose the side of the centre where the leg already passes
    t = max(0.0, min(1.0, ((cx - a.x) * dx + (cy - a.y) * dy) / (L * L)))
    px, py = a.x + t * dx, a.y + t * dy
    side = 1.0 if (px - cx) * nx + (py - cy) * ny >= 0 else -1.0
    for k in range(40):
        r = (zone.radius + margin) * (1.1 ** k)
        for s in (side, -side):
            p = Vec2(cx + s * nx * r, cy + s * ny * r)
            if segment_clear(a, p, zones, margin) and segment_clear(p, b, zones, margin):
                return p
    return None


def repair_plan(plan: CandidatePlan, violations: Sequence[Violation], scenario: Scenario) -> CandidatePlan:
    if not violations:
        raise ValueError("repair_plan needs at least one violation")
    cfg = scenario.sim_config
    cons = scenario.constraint_set
    dt = cfg.dt
    actions = list(plan.actions)
    ordered = sorted(violations, key=Violation.key)
    codes = {v.code for v in ordered}
    edits: list[str] = []

    if "TimestampDisorder" in codes:
        actions.sort(key=lambda a: a.sort_key())
        edits.append("resort")

    for v in (v for v in ordered if v.code == "SpeedExceeded"):
        e = scenario.entity(v.actor_id)
        limit = cons.speed_limit(e)
        if not any(a.actor_id == v.actor_id and isinstance(a.order, MoveTo) for a in actions):
            raise IrreparableViolation(f"{v.actor_id}: speed exceeded without a MOVE_TO to slow down")
        actions = _retime_moves(scenario, actions, v.actor_id, speed_cap=limit)
        edits.append(f"slow:{v.actor_id}")

    nofly_actors = {v.actor_id for v in ordered if v.code == "NoFlyIncursion"}
    for v in (v for v in ordered if v.code == "NoFlyIncursion"):
        escorting = [a.order.ally_id for a in actions
                     if a.actor_id == v.actor_id and isinstance(a.order, Escort)]
        if escorting and escorting[-1] in nofly_actors:
            # follows an ally whose own leg is detoured in this pass; re-checked next iteration
            continue
        zone = cons.no_fly_zones[int(v.info.get("zone", 0))]  # type: ignore[arg-type]
        moves = sorted((a for a in actions if a.actor_id == v.actor_id and isinstance(a.order, MoveTo)),
                       key=lambda a: a.t_start)
        fixed = False
        for m in moves:
            start = _leg_start(scenario, actions, m)
            end = m.order.waypoint
            if segment_clear(start, end, [zone]):
                continue
            if zone.contains(end.x, end.y) or zone.contains(start.x, start.y):
                raise IrreparableViolation(f"{v.actor_id}: waypoint inside a no-fly zone")
            # escorts trail at an offset, so leave room for them as well
            spread = max((math.hypot(a.order.offset.x, a.order.offset.y) for a in actions
                          if isinstance(a.order, Escort) and a.order.ally_id == v.actor_id), default=0.0)
            p = _detour_point(start, end, zone, cons.no_fly_zones, 1.0 + spread)
            if p is None:
                raise IrreparableViolation(f"{v.actor_id}: no detour around no-fly zone")
            idx = actions.index(m)
            actions[idx:idx + 1] = [AtomicAction(m.actor_id, m.t_start, MoveTo(p, m.order.speed)),
                                    AtomicAction(m.actor_id, m.t_start, MoveTo(end, m.order.speed))]
            actions = _retime_moves(scenario, actions, v.actor_id)
            fixed = True
            edits.append(f"detour:{v.actor_id}")
            break
        if not fixed:
            raise IrreparableViolation(f"{v.actor_id}: incursion not caused by a MOVE_TO leg")

    if "DurationExceeded" in codes:
        limit_t = min(cons.max_plan_duration, cfg.horizon)
        kept = []
        for a in actions:
            if a.t_start > limit_t + 1e-9:
                continue
            if isinstance(a.order, Suppress) and _end_time(a) > limit_t + 1e-9:
                a = AtomicAction(a.actor_id, a.t_start, Suppress(a.order.target_id,
                                                                 round(limit_t - a.t_start, 10)))
                if a.order.duration <= 0:
                    continue
            kept.append(a)
        actions = kept
        edits.append("truncate")

    if "OutOfRangeLaunch" in codes:
        traj = simulate_kinematics(scenario, actions)
        last = min(cfg.horizon_ticks, int(math.floor(cons.max_plan_duration / dt + 1e-9)))
        for v in (v for v in ordered if v.code == "OutOfRangeLaunch"):
            cands = [a for a in actions if a.actor_id == v.actor_id and isinstance(a.order, Launch)
                     and abs(a.t_start - v.t) < 1e-9]
            if not cands:
                continue
            a = cands[0]
            e = scenario.entity(a.actor_id)
            tgt = scenario.entity(a.order.target_id)
            reach = cons.launch_range(e.weapon)  # type: ignore[arg-type]
            gap = fire_gap_ticks(e.weapon.rof_base, dt)  # type: ignore[union-attr]
            busy = {_tick(b, dt) for b in actions
                    if b is not a and b.actor_id == a.actor_id and isinstance(b.order, Launch)}
            new_tick = None
            for tk in range(_tick(a, dt), last + 1):
                x, y = traj[a.actor_id][tk]
                if math.hypot(x - tgt.position.x, y - tgt.position.y) <= reach and \
                        all(abs(tk - b) >= gap for b in busy):
                    new_tick = tk
                    break
            idx = actions.index(a)
            if new_tick is None:
                del actions[idx]
                edits.append(f"drop-launch:{a.actor_id}")
            else:
                actions[idx] = AtomicAction(a.actor_id, round(new_tick * dt, 10), a.order)
                edits.append(f"delay-launch:{a.actor_id}")

    for v in (v for v in ordered if v.code == "AmmoExceeded"):
        launches = [a for a in actions if a.actor_id == v.actor_id and isinstance(a.order, Launch)]
        launches.sort(key=lambda a: a.t_start)
        excess = len(launches) - cons.budget(scenario.entity(v.actor_id))
        for a in launches[len(launches) - excess:] if excess > 0 else []:
            actions.remove(a)
        edits.append(f"drop-excess:{v.actor_id}")

    if "SalvoLimit" in codes:
        cap = cons.max_launches_per_tick
        if cap < 1:
            raise IrreparableViolation("salvo limit is zero")
        last = min(cfg.horizon_ticks, int(math.floor(cons.max_plan_duration / dt + 1e-9)))
        count: dict[int, int] = {}
        rebuilt = []
        for a in sorted(actions, key=lambda a: a.sort_key()):
            if isinstance(a.order, Launch):
                tk = _tick(a, dt)
                while count.get(tk, 0) >= cap:
                    tk += 1
                if tk > last:
                    continue
                count[tk] = count.get(tk, 0) + 1
                if tk != _tick(a, dt):
                    a = AtomicAction(a.actor_id, round(tk * dt, 10), a.order)
            rebuilt.append(a)
        actions = rebuilt
        edits.append("spread-salvo")

    actions.sort(key=lambda a: a.sort_key())
    traj = simulate_kinematics(scenario, actions)
    meta = dict(plan.metadata)
    meta["repairs"] = [*meta.get("repairs", []), edits]
    return CandidatePlan(plan.plan_id, tuple(actions), {k: tuple(v) for k, v in traj.items()}, meta)


@dataclass
class RepairOutcome:
    plan: CandidatePlan
    iterations: int
    history: list[list[Violation]]


def validate_and_repair(plan: CandidatePlan, scenario: Scenario, r_max: int = 3) -> RepairOutcome:
    """Check/repair until clean; raises IrreparableViolation on stalled progress or exhausted budget.

    Progress means the per-code violation counts, read in fixed code order,
    decrease lexicographically at every iteration.
    """
    violations = validator_check(plan, scenario)
    history = [violations]
    it = 0
    while violations:
        if it >= r_max:
            raise IrreparableViolation(f"still {len(violations)} violations after {r_max} repairs")
        repaired = repair_plan(plan, violations, scenario)
        after = validator_check(repaired, scenario)
        if not violation_counts(after) < violation_counts(violations):
            raise IrreparableViolation(
                f"repair made no progress: {violation_counts(violations)} -> {violation_counts(after)}")
        plan, violations = repaired, after
        history.append(violations)
        it += 1
    return RepairOutcome(plan, it, history)


__all__ = ["CODES", "RepairOutcome", "Violation", "repair_plan", "validate_and_repair",
           "validator_check", "violation_counts"]
