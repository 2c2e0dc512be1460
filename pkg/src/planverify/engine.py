"""Discrete-time engagement simulator.

A step turns S_t into S_{t+1} through a fixed phase pipeline:

0. apply the orders due at the new tick (MOVE_TO / ESCORT / SUPPRESS set
   standing state, LAUNCH is queued); orders for dead or unknown actors are
   dropped and logged;
1. expire suppression whose window has elapsed (SuppressEnd);
2. integrate movement: waypoint movers first, then escorts, clamped to the map;
3. standing SUPPRESS orders fire soft-kill shots;
4. LAUNCH orders, opponent fire and escort self-defence fire, in stored
   entity order;
5. advance the tick.

Events produced by a step carry the new tick index and all combat in that
step happens at time ``tick * dt`` on the post-move positions.  Every
probabilistic fire resolution consumes exactly one uniform draw and nothing
else touches the random stream.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from planverify import canonical
from planverify.errors import DomainError, OpponentFault
from planverify.model import (
    AtomicAction,
    CandidatePlan,
    EntityClass,
    EntityState,
    Escort,
    EscortOrder,
    Event,
    EventKind,
    GlobalState,
    Launch,
    MoveTo,
    Scenario,
    Side,
    SimConfig,
    Suppress,
    SuppressOrder,
    Vec2,
    evolve,
)
from planverify.rng import RngStream, SeedInfo
from planverify.schema import scenario_digest as _digest

if TYPE_CHECKING:
    from planverify.opponents.base import OpponentPolicy

log = logging.getLogger(__name__)

# slack for comparisons of accumulated float times (far below dt/2)
TIME_EPS = 1e-9


# ---------------------------------------------------------------------------
# hit model
# ---------------------------------------------------------------------------


def effective_hit_probability(p_base: float, d: float, R: float, alpha: float, beta: float) -> float:
    """Distance-decayed hit probability ``p_base * (alpha + beta * (1 - d/R))``; 0 beyond R."""
    if not (0.0 <= p_base <= 1.0):
        raise DomainError(f"p_base must lie in [0, 1], got {p_base}")
    if not (R > 0 and math.isfinite(R)):
        raise DomainError(f"R must be positive and finite, got {R}")
    if not (d >= 0 and math.isfinite(d)):
        raise DomainError(f"d must be non-negative and finite, got {d}")
    if not (math.isfinite(alpha) and math.isfinite(beta)) or abs(alpha + beta - 1.0) > 1e-12:
        raise DomainError(f"alpha+beta must equal 1, got {alpha}+{beta}")
    if d > R:
        return 0.0
    p = p_base * (alpha + beta * (1.0 - d / R))
    return min(1.0, max(0.0, p))


def suppressed_fire_params(
    rof_base: float, p_eff: float, gamma_rof: float, lambda_hit: float
) -> tuple[float, float]:
    """Firing interval and hit probability of a suppressed unit."""
    if not gamma_rof > 1:
        raise DomainError(f"gamma_rof must be > 1, got {gamma_rof}")
    if not 0 < lambda_hit < 1:
        raise DomainError(f"lambda_hit must lie in (0, 1), got {lambda_hit}")
    if not rof_base > 0:
        raise DomainError(f"rof_base must be > 0, got {rof_base}")
    if not 0.0 <= p_eff <= 1.0:
        raise DomainError(f"p_eff must lie in [0, 1], got {p_eff}")
    return rof_base * gamma_rof, p_eff * lambda_hit


def fire_interval(entity: EntityState, config: SimConfig) -> float:
    assert entity.weapon is not None
    if entity.suppressed_until is not None:
        return entity.weapon.rof_base * config.gamma_rof
    return entity.weapon.rof_base


def can_fire(entity: EntityState, now: float, config: SimConfig) -> bool:
    """Alive, armed, loaded and the firing interval has elapsed at ``now``."""
    if entity.health <= 0 or entity.weapon is None or entity.ammo <= 0:
        return False
    if entity.last_fire_time is None:
        return True
    return now - entity.last_fire_time >= fire_interval(entity, config) - TIME_EPS


@dataclass
class FireOutcome:
    events: list[Event]
    shooter: EntityState
    target: EntityState
    fired: bool = False
    hit: bool = False


def resolve_fire(
    shooter: EntityState,
    target: EntityState,
    now: float,
    config: SimConfig,
    rng: RngStream,
    *,
    tick: int | None = None,
    effect: str = "damage",
) -> FireOutcome:
    """One shot from ``shooter`` at ``target``.

    Infeasible fire (dead, unarmed, empty, firing interval not elapsed, out of
    range) is a silent no-op that consumes no draw.  ``effect="suppress"``
    turns a hit into a suppression window on an anti-air unit instead of
    damage (plus damage when ``config.suppress_damage`` is set).
    """
    out = FireOutcome([], shooter, target)
    if target.health <= 0 or not can_fire(shooter, now, config):
        return out
    weapon = shooter.weapon
    assert weapon is not None
    d = math.hypot(shooter.position.x - target.position.x, shooter.position.y - target.position.y)
    if d > weapon.range_r:
        return out
    if tick is None:
        tick = int(round(now / config.dt))
    p_unsup = effective_hit_probability(weapon.p_base, d, weapon.range_r, config.alpha, config.beta)
    suppressed = shooter.suppressed_until is not None
    if suppressed:
        _, p = suppressed_fire_params(weapon.rof_base, p_unsup, config.gamma_rof, config.lambda_hit)
    else:
        p = p_unsup
    ammo_after = shooter.ammo - 1
    shooter = evolve(shooter, ammo=ammo_after, last_fire_time=now)
    out.fired = True
    out.events.append(Event(tick, EventKind.FIRE, shooter.id, target.id, {
        "weapon": weapon.name, "distance": d, "p_eff": p, "p_unsuppressed": p_unsup,
        "suppressed": suppressed, "ammo_after": ammo_after, "effect": effect,
    }))
    u = rng.uniform()
    if u < p:
        out.hit = True
        out.events.append(Event(tick, EventKind.HIT, shooter.id, target.id, {"roll": u, "p_eff": p}))
        damage = effect == "damage" or config.suppress_damage
        if effect == "suppress" and target.cls is EntityClass.ANTI_AIR_THREAT:
            refresh = target.suppressed_until is not None
            until = now + config.tau_sup
            target = evolve(target, suppressed_until=until)
            out.events.append(Event(tick, EventKind.SUPPRESS_START, target.id, shooter.id,
                                    {"until": until, "refresh": refresh}))
        if damage:
            health = max(0.0, target.health - weapon.damage)
            destroyed = target.health > 0 and health == 0
            target = evolve(target, health=health)
            if destroyed:
                out.events.append(Event(tick, EventKind.DESTROYED, target.id, shooter.id, {}))
    else:
        out.events.append(Event(tick, EventKind.MISS, shooter.id, target.id, {"roll": u, "p_eff": p}))
    out.shooter = shooter
    out.target = target
    return out


# ---------------------------------------------------------------------------
# movement
# ---------------------------------------------------------------------------


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _advance(e: EntityState, tx: float, ty: float, speed: float, dt: float,
             width: float, height: float) -> tuple[float, float, float, bool]:
    x, y = e.position.x, e.position.y
    dx, dy = tx - x, ty - y
    dist = math.hypot(dx, dy)
    reach = speed * dt
    heading = e.heading
    if dist <= reach + 1e-12:
        nx, ny, arrived = tx, ty, True
        if dist > 0:
            heading = math.atan2(dy, dx)
    else:
        nx, ny, arrived = x + dx / dist * reach, y + dy / dist * reach, False
        heading = math.atan2(dy, dx)
    return _clamp(nx, 0.0, width), _clamp(ny, 0.0, height), heading, arrived


def _apply_orders(
    ents: list[EntityState],
    index: Mapping[str, int],
    actions: Iterable[AtomicAction],
    side: Side,
    bounds: tuple[float, float],
    dropped: list[tuple[AtomicAction, str]],
    launches: list[tuple[int, int, AtomicAction]],
) -> None:
    width, height = bounds
    for a in actions:
        i = index.get(a.actor_id)
        if i is None:
            dropped.append((a, "UnknownActor"))
            continue
        actor = ents[i]
        if actor.side is not side:
            dropped.append((a, "WrongSide"))
            continue
        if actor.health <= 0:
            dropped.append((a, "StaleAction"))
            log.debug("dropping %s for dead actor %s", a.kind, a.actor_id)
            continue
        o = a.order
        if isinstance(o, MoveTo):
            wp = Vec2(_clamp(o.waypoint.x, 0.0, width), _clamp(o.waypoint.y, 0.0, height))
            ents[i] = evolve(actor, waypoint=wp, move_speed=min(o.speed, actor.speed_max), escort=None)
        elif isinstance(o, Escort):
            ents[i] = evolve(actor, escort=EscortOrder(o.ally_id, o.offset), waypoint=None)
        else:
            ti = index.get(o.target_id)
            if ti is None or ents[ti].health <= 0:
                dropped.append((a, "StaleAction"))
                continue
            if isinstance(o, Suppress):
                ents[i] = evolve(actor, suppress=SuppressOrder(o.target_id, a.t_start, a.t_start + o.duration))
            else:
                launches.append((i, len(launches), a))


def _move_phase(ents: list[EntityState], index: Mapping[str, int], dt: float,
                bounds: tuple[float, float], tick: int, events: list[Event] | None) -> None:
    width, height = bounds
    for i, e in enumerate(ents):
        if e.waypoint is None or e.health <= 0:
            continue
        nx, ny, heading, arrived = _advance(e, e.waypoint.x, e.waypoint.y, e.move_speed, dt, width, height)
        if arrived:
            ents[i] = evolve(e, position=Vec2(nx, ny), heading=heading, waypoint=None, move_speed=0.0)
            if events is not None:
                events.append(Event(tick, EventKind.MOVE_COMPLETED, e.id, None, {"x": nx, "y": ny}))
        else:
            ents[i] = evolve(e, position=Vec2(nx, ny), heading=heading)
    for i, e in enumerate(ents):
        if e.escort is None or e.health <= 0:
            continue
        ai = index.get(e.escort.ally_id)
        if ai is None or ents[ai].health <= 0:
            continue
        ally = ents[ai].position
        tx = _clamp(ally.x + e.escort.offset.x, 0.0, width)
        ty = _clamp(ally.y + e.escort.offset.y, 0.0, height)
        nx, ny, heading, _ = _advance(e, tx, ty, e.speed_max, dt, width, height)
        if nx != e.position.x or ny != e.position.y:
            ents[i] = evolve(e, position=Vec2(nx, ny), heading=heading)


def _nearest_patrol(ents: Sequence[EntityState], shooter: EntityState) -> int | None:
    """Index of the nearest live opponent AirPatrol inside the shooter's range."""
    assert shooter.weapon is not None
    best, best_d = None, math.inf
    for j, t in enumerate(ents):
        if t.side is Side.OPPONENT and t.cls is EntityClass.AIR_PATROL and t.health > 0:
            d = math.hypot(t.position.x - shooter.position.x, t.position.y - shooter.position.y)
            if d <= shooter.weapon.range_r and d < best_d:
                best, best_d = j, d
    return best


def step(
    state: GlobalState,
    blue_actions: Sequence[AtomicAction],
    red_actions: Sequence[AtomicAction],
    config: SimConfig,
    rng: RngStream,
    *,
    bounds: tuple[float, float] = (260.0, 160.0),
) -> GlobalState:
    """Advance the battlefield one tick (see the module docstring for phase order)."""
    tick = state.tick + 1
    now = tick * config.dt
    ents = list(state.entities)
    index = state.index
    events: list[Event] = []
    dropped: list[tuple[AtomicAction, str]] = []
    launches: list[tuple[int, int, AtomicAction]] = []

    # 0. orders
    _apply_orders(ents, index, blue_actions, Side.PLAN_EXECUTING, bounds, dropped, launches)
    _apply_orders(ents, index, red_actions, Side.OPPONENT, bounds, dropped, launches)

    # 1. suppression expiry
    for i, e in enumerate(ents):
        if e.suppressed_until is not None and now >= e.suppressed_until - TIME_EPS:
            ents[i] = evolve(e, suppressed_until=None)
            events.append(Event(tick, EventKind.SUPPRESS_END, e.id, None, {}))

    # 2. movement
    _move_phase(ents, index, config.dt, bounds, tick, events)

    # 3. standing suppression orders
    for i, e in enumerate(ents):
        order = e.suppress
        if order is None or e.health <= 0:
            continue
        if now > order.end + TIME_EPS:
            ents[i] = evolve(e, suppress=None)
            continue
        if now < order.start - TIME_EPS:
            continue
        ti = index.get(order.target_id)
        if ti is None:
            continue
        res = resolve_fire(e, ents[ti], now, config, rng, tick=tick, effect="suppress")
        if res.fired:
            ents[i], ents[ti] = res.shooter, res.target
            events.extend(res.events)

    # 4. launches, opponent fire and escort self-defence, in entity order
    shots: list[tuple[int, int, str | None]] = [(i, k, a.target_id) for i, k, a in launches]
    for i, e in enumerate(ents):
        if e.escort is not None and e.health > 0 and e.weapon is not None and e.ammo > 0:
            j = _nearest_patrol(ents, e)
            if j is not None:
                shots.append((i, len(launches) + i, ents[j].id))
    shots.sort()
    for i, _, target_id in shots:
        ti = index.get(target_id) if target_id is not None else None
        if ti is None:
            continue
        res = resolve_fire(ents[i], ents[ti], now, config, rng, tick=tick)
        if res.fired:
            ents[i], ents[ti] = res.shooter, res.target
            events.extend(res.events)

    return GlobalState(tick=tick, time=now, entities=tuple(ents), transient_events=tuple(events),
                       dropped_actions=tuple(dropped), index=index)


# ---------------------------------------------------------------------------
# termination
# ---------------------------------------------------------------------------


class Status(str, Enum):
    CONTINUE = "Continue"
    SUCCESS = "Success"
    FAILURE = "Failure"


@dataclass(frozen=True)
class Termination:
    status: Status
    reason: str | None = None


CONTINUE = Termination(Status.CONTINUE)


def check_termination(state: GlobalState, scenario: Scenario) -> Termination:
    """Success, then all-friendly-lost, then horizon, in that precedence."""
    if state.get(scenario.core_target_id).health <= 0:
        return Termination(Status.SUCCESS)
    if not any(e.health > 0 for e in state.entities if e.side is Side.PLAN_EXECUTING):
        return Termination(Status.FAILURE, "AllFriendlyLost")
    if state.tick >= scenario.sim_config.horizon_ticks:
        return Termination(Status.FAILURE, "HorizonExceeded")
    return CONTINUE


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RolloutRecord:
    seed: SeedInfo
    plan_id: str
    opponent: str
    scenario_name: str
    scenario_digest: str
    core_target_id: str
    outcome: Status
    reason: str | None
    end_tick: int
    dt: float
    events: tuple[Event, ...]
    entity_ids: tuple[str, ...]
    sides: Mapping[str, Side]
    value_classes: Mapping[str, str]
    trajectories: Mapping[str, tuple[tuple[float, float], ...]]
    health: Mapping[str, tuple[float, ...]]
    ammo: Mapping[str, tuple[int, ...]]
    suppressed: Mapping[str, tuple[bool, ...]]
    ammo_spent: Mapping[str, int]
    entities_lost: Mapping[str, int]
    dropped_actions: int
    log_hash: str
    draws: int = 0
    extra: Mapping[str, object] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome is Status.SUCCESS

    def ids_of(self, side: Side) -> list[str]:
        return [i for i in self.entity_ids if self.sides[i] is side]

    def summary(self) -> dict:
        return {
            "seed": self.seed.to_dict(), "plan_id": self.plan_id, "opponent": self.opponent,
            "scenario": self.scenario_name, "scenario_digest": self.scenario_digest,
            "outcome": self.outcome.value, "reason": self.reason, "end_tick": self.end_tick,
            "ammo_spent": dict(self.ammo_spent), "entities_lost": dict(self.entities_lost),
            "dropped_actions": self.dropped_actions, "draws": self.draws,
            "log_hash": self.log_hash,
        }


def event_log_bytes(events: Iterable[Event]) -> bytes:
    """Line-delimited canonical JSON, one event per line."""
    return canonical.jsonl_bytes([e.to_dict() for e in events])


def event_log_hash(events: Iterable[Event]) -> str:
    return canonical.sha256_hex(event_log_bytes(events))


def trajectory_csv(record: RolloutRecord) -> str:
    lines = ["tick,entity_id,x,y,health,suppressed"]
    for t in range(record.end_tick + 1):
        for eid in record.entity_ids:
            x, y = record.trajectories[eid][t]
            lines.append(f"{t},{eid},{x!r},{y!r},{record.health[eid][t]!r},"
                         f"{int(record.suppressed[eid][t])}")
    return "\n".join(lines) + "\n"


def schedule_by_tick(actions: Iterable[AtomicAction], dt: float) -> dict[int, list[AtomicAction]]:
    """Group plan actions by the tick whose step applies them (tick 0 orders run in step 1)."""
    due: dict[int, list[AtomicAction]] = {}
    for a in actions:
        due.setdefault(max(1, int(round(a.t_start / dt))), []).append(a)
    return due


def run_rollout(
    scenario: Scenario,
    plan: CandidatePlan,
    opponent: OpponentPolicy,
    seed: SeedInfo | int,
    *,
    scenario_digest: str | None = None,
) -> RolloutRecord:
    """Execute ``plan`` verbatim against ``opponent`` until termination."""
    if isinstance(seed, int):
        seed = SeedInfo(seed)
    config = scenario.sim_config
    rng = RngStream(seed)
    due = schedule_by_tick(plan.actions, config.dt)
    bounds = scenario.bounds
    opponent.reset(seed)

    state = GlobalState.initial(scenario)
    history = [state]
    ids = tuple(e.id for e in state.entities)
    traj = {e.id: [e.position.as_tuple()] for e in state.entities}
    health = {e.id: [e.health] for e in state.entities}
    ammo = {e.id: [e.ammo] for e in state.entities}
    supp = {e.id: [e.suppressed_until is not None] for e in state.entities}
    events: list[Event] = []
    dropped = 0

    term = check_termination(state, scenario)
    while term.status is Status.CONTINUE:
        try:
            red = opponent.decide(history, scenario)
        except OpponentFault:
            raise
        except Exception as exc:  # adapter bugs surface as faults, never silently degrade
            raise OpponentFault(f"{type(exc).__name__}: {exc}") from exc
        state = step(state, due.get(state.tick + 1, ()), red, config, rng, bounds=bounds)
        history.append(state)
        events.extend(state.transient_events)
        dropped += len(state.dropped_actions)
        for e in state.entities:
            traj[e.id].append(e.position.as_tuple())
            health[e.id].append(e.health)
            ammo[e.id].append(e.ammo)
            supp[e.id].append(e.suppressed_until is not None)
        term = check_termination(state, scenario)

    sides = {e.id: e.side for e in scenario.entities}
    spent = {s.value: 0 for s in Side}
    lost = {s.value: 0 for s in Side}
    for e0, e1 in zip(scenario.entities, state.entities):
        spent[e0.side.value] += e0.ammo - e1.ammo
        if e0.health > 0 and e1.health <= 0:
            lost[e0.side.value] += 1

    return RolloutRecord(
        seed=seed,
        plan_id=plan.plan_id,
        opponent=getattr(opponent, "name", type(opponent).__name__),
        scenario_name=scenario.name,
        scenario_digest=scenario_digest or _digest(scenario),
        core_target_id=scenario.core_target_id,
        outcome=term.status,
        reason=term.reason,
        end_tick=state.tick,
        dt=config.dt,
        events=tuple(events),
        entity_ids=ids,
        sides=sides,
        value_classes={e.id: e.value_class.value for e in scenario.entities},
        trajectories={k: tuple(v) for k, v in traj.items()},
        health={k: tuple(v) for k, v in health.items()},
        ammo={k: tuple(v) for k, v in ammo.items()},
        suppressed={k: tuple(v) for k, v in supp.items()},
        ammo_spent=spent,
        entities_lost=lost,
        dropped_actions=dropped,
        log_hash=event_log_hash(events),
        draws=rng.draw_counter,
    )


# ---------------------------------------------------------------------------
# plan kinematics (no opponent, no randomness)
# ---------------------------------------------------------------------------


def simulate_kinematics(
    scenario: Scenario, actions: Sequence[AtomicAction], n_ticks: int | None = None
) -> dict[str, list[tuple[float, float]]]:
    """Positions of every plan-executing entity at ticks 0..n_ticks under ``actions``.

    Uses the engine's own order and movement phases, so an unopposed rollout
    reproduces these positions exactly.
    """
    config = scenario.sim_config
    if n_ticks is None:
        n_ticks = config.horizon_ticks
    ents = list(scenario.entities)
    index = {e.id: i for i, e in enumerate(ents)}
    due = schedule_by_tick(actions, config.dt)
    blue = [i for i, e in enumerate(ents) if e.side is Side.PLAN_EXECUTING]
    out = {ents[i].id: [ents[i].position.as_tuple()] for i in blue}
    scratch_dropped: list = []
    scratch_launch: list = []
    for tick in range(1, n_ticks + 1):
        acts = [a for a in due.get(tick, ()) if not isinstance(a.order, Launch)]
        _apply_orders(ents, index, acts, Side.PLAN_EXECUTING, scenario.bounds, scratch_dropped, scratch_launch)
        _move_phase(ents, index, config.dt, scenario.bounds, tick, None)
        for i in blue:
            out[ents[i].id].append(ents[i].position.as_tuple())
    return out
