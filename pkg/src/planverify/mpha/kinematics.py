"""Helpers that turn polylines into timestamped orders using engine kinematics."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

from planverify.engine import _advance, effective_hit_probability, simulate_kinematics
from planverify.model import (
    AtomicAction,
    CandidatePlan,
    EntityState,
    Launch,
    MoveTo,
    Scenario,
    Vec2,
)


def follow_polyline(
    entity: EntityState, waypoints: Sequence[Vec2], speed: float, scenario: Scenario,
    first_tick: int = 1,
) -> tuple[list[AtomicAction], int]:
    """MOVE_TO chain visiting ``waypoints`` in order.

    Each leg is ordered one tick after the previous arrival, so the entity
    never idles and never cuts a corner.  Returns the actions and the tick at
    which the final waypoint is reached (may exceed the horizon).
    """
    dt = scenario.sim_config.dt
    width, height = scenario.bounds
    limit = scenario.sim_config.horizon_ticks
    actions: list[AtomicAction] = []
    cur = entity
    tick = first_tick
    for wp in waypoints:
        if wp == cur.position:
            continue
        actions.append(AtomicAction(entity.id, round(tick * dt, 10), MoveTo(wp, speed)))
        step_speed = min(speed, entity.speed_max)
        if step_speed <= 0:
            return actions, math.inf  # type: ignore[return-value]
        arrived = False
        while not arrived:
            x, y, heading, arrived = _advance(cur, wp.x, wp.y, step_speed, dt, width, height)
            cur = replace(cur, position=Vec2(x, y), heading=heading)
            if arrived:
                break
            tick += 1
            if tick > 10 * limit:
                return actions, tick
        tick += 1
    return actions, tick - 1


def truncate_at_distance(pts: Sequence[Vec2], target: Vec2, radius: float) -> tuple[Vec2, ...]:
    """Polyline up to the first point within ``radius`` of ``target`` (unchanged if never)."""
    out = [pts[0]]
    if pts[0].dist(target) <= radius:
        return tuple(out)
    for p, q in zip(pts, pts[1:]):
        if q.dist(target) > radius:
            out.append(q)
            continue
        # first crossing on segment p->q: solve |p + t(q-p) - target| = radius
        dx, dy = q.x - p.x, q.y - p.y
        fx, fy = p.x - target.x, p.y - target.y
        a = dx * dx + dy * dy
        b = 2 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - radius * radius
        disc = max(0.0, b * b - 4 * a * c)
        t = (-b - math.sqrt(disc)) / (2 * a) if a else 0.0
        t = min(1.0, max(0.0, t))
        cut = Vec2(p.x + t * dx, p.y + t * dy)
        if cut != out[-1]:
            out.append(cut)
        return tuple(out)
    return tuple(out)


def fire_gap_ticks(rof: float, dt: float) -> int:
    """Smallest tick gap that satisfies the firing interval."""
    return max(1, math.ceil(rof / dt - 1e-9))


def in_range_ticks(traj: Sequence[tuple[float, float]], target: Vec2, rng_limit: float) -> list[int]:
    return [t for t, (x, y) in enumerate(traj)
            if t >= 1 and math.hypot(x - target.x, y - target.y) <= rng_limit]


def kill_probability(shots: Sequence[tuple[float, float]], health: float) -> float:
    """P(target health reaches 0) for independent shots given as (p_hit, damage)."""
    dist = {health: 1.0}
    for p, dmg in shots:
        nxt: dict[float, float] = {}
        for h, q in dist.items():
            if h <= 0:
                nxt[h] = nxt.get(h, 0.0) + q
                continue
            hit = max(0.0, h - dmg)
            nxt[hit] = nxt.get(hit, 0.0) + q * p
            nxt[h] = nxt.get(h, 0.0) + q * (1 - p)
        dist = nxt
    return sum(q for h, q in dist.items() if h <= 0)


def with_trajectories(plan_id: str, actions: Sequence[AtomicAction], scenario: Scenario,
                      metadata: dict) -> CandidatePlan:
    acts = tuple(sorted(actions, key=lambda a: a.sort_key()))
    traj = simulate_kinematics(scenario, acts)
    return CandidatePlan(plan_id, acts, {k: tuple(v) for k, v in traj.items()}, metadata)


def launch_schedule(
    scenario: Scenario,
    trajectories: dict[str, list[tuple[float, float]]],
    shooters: Sequence[EntityState],
    *,
    pk_target: float | None = None,
    occupied: dict[int, int] | None = None,
) -> list[AtomicAction]:
    """LAUNCH actions at ROF cadence from each shooter's first in-range planned tick.

    Shots are taken earliest first (ties by entity order) until the kill
    probability reaches ``pk_target`` (all budgeted shots when None), within
    each shooter's budget and the per-tick salvo limit.
    """
    cfg = scenario.sim_config
    cons = scenario.constraint_set
    target = scenario.core_target
    last_tick = min(cfg.horizon_ticks, int(math.floor(cons.max_plan_duration / cfg.dt + 1e-9)))
    candidates: list[tuple[int, int, EntityState, float]] = []
    for order, e in enumerate(shooters):
        if e.weapon is None or e.health <= 0:
            continue
        budget = cons.budget(e)
        reach = cons.launch_range(e.weapon)
        traj = trajectories[e.id]
        ticks = [t for t in in_range_ticks(traj, target.position, reach) if t <= last_tick]
        gap = fire_gap_ticks(e.weapon.rof_base, cfg.dt)
        chosen: list[int] = []
        for t in ticks:
            if len(chosen) >= budget:
                break
            if not chosen or t - chosen[-1] >= gap:
                chosen.append(t)
        for t in chosen:
            x, y = traj[t]
            d = math.hypot(x - target.position.x, y - target.position.y)
            p = effective_hit_probability(e.weapon.p_base, d, e.weapon.range_r, cfg.alpha, cfg.beta)
            candidates.append((t, order, e, p))
    candidates.sort(key=lambda c: (c[0], c[1]))
    salvo = dict(occupied or {})
    picked: list[tuple[float, float]] = []
    actions: list[AtomicAction] = []
    for t, _, e, p in candidates:
        if pk_target is not None and kill_probability(picked, target.health) >= pk_target:
            break
        if salvo.get(t, 0) >= cons.max_launches_per_tick:
            continue
        salvo[t] = salvo.get(t, 0) + 1
        assert e.weapon is not None
        picked.append((p, e.weapon.damage))
        actions.append(AtomicAction(e.id, round(t * cfg.dt, 10), Launch(e.weapon.name, target.id)))
    return actions
