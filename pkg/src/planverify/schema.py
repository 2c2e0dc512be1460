"""JSON file formats for scenarios, plans and intents.

Documents are UTF-8 JSON.  Unknown fields are rejected and every error names
the offending JSON path (``$.entities[2].weapon.p_base``).  Writers emit the
canonical form (sorted keys, 17 significant digits) so a load/save round
trip is byte-stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

from planverify import canonical
from planverify.errors import InvariantError, ParseError, SchemaError
from planverify.model import (
    AtomicAction,
    CandidatePlan,
    ConstraintSet,
    Difficulty,
    EntityClass,
    EntityState,
    Escort,
    EscortOrder,
    Intent,
    Launch,
    MoveTo,
    NoFlyZone,
    Scenario,
    Side,
    SimConfig,
    Suppress,
    SuppressOrder,
    ValueClass,
    Vec2,
    WeaponSpec,
)

_MISSING = object()


# ---------------------------------------------------------------------------
# primitive readers
# ---------------------------------------------------------------------------


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", path)
    if not math.isfinite(value):
        raise InvariantError("number must be finite", path)
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise SchemaError(f"expected an integer, got {type(value).__name__}", path)
    return value


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError("expected a non-empty string", path)
    return value


def _bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError("expected a boolean", path)
    return value


def _vec(value: Any, path: str) -> Vec2:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError("expected [x, y]", path)
    return Vec2(_num(value[0], f"{path}[0]"), _num(value[1], f"{path}[1]"))


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError("expected a list", path)
    return value


def _enum(enum_cls):
    def read(value: Any, path: str):
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(m.value for m in enum_cls)
            raise SchemaError(f"unknown value {value!r} (allowed: {allowed})", path) from None

    return read


def _fields(
    data: Any,
    path: str,
    required: Mapping[str, Callable[[Any, str], Any]],
    optional: Mapping[str, Callable[[Any, str], Any]] | None = None,
) -> dict[str, Any]:
    optional = optional or {}
    if not isinstance(data, dict):
        raise SchemaError("expected an object", path)
    unknown = sorted(set(data) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"unknown field {unknown[0]!r}", f"{path}.{unknown[0]}")
    out: dict[str, Any] = {}
    for name, reader in required.items():
        if name not in data:
            raise SchemaError(f"missing required field {name!r}", f"{path}.{name}")
        out[name] = reader(data[name], f"{path}.{name}")
    for name, reader in optional.items():
        if name in data and data[name] is not None:
            out[name] = reader(data[name], f"{path}.{name}")
    return out


def _guard(build: Callable[[], Any], path: str) -> Any:
    """Re-raise construction-time invariant failures with the document path."""
    try:
        return build()
    except InvariantError as exc:
        sub = exc.path if exc.path and exc.path != "$" else ""
        raise InvariantError(exc.reason, f"{path}.{sub}" if sub else path) from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), path) from None


def parse_seed_list(value: Any, path: str = "$") -> tuple[int, ...]:
    """Accept ``[1, 2, 3]``, the comma form ``"1,2,3"`` or the inclusive range ``"1..100"``."""
    if isinstance(value, str):
        lo, sep, hi = value.partition("..")
        if not sep:
            try:
                seeds = tuple(int(v) for v in value.split(","))
            except ValueError:
                raise SchemaError("seeds must be 'a..b' or a comma list of integers", path) from None
            if len(set(seeds)) != len(seeds):
                raise SchemaError("duplicate seed", path)
            return seeds
        try:
            a, b = int(lo), int(hi)
        except ValueError:
            raise SchemaError("seed range bounds must be integers", path) from None
        if b < a:
            raise SchemaError("seed range is empty", path)
        return tuple(range(a, b + 1))
    return tuple(_int(v, f"{path}[{i}]") for i, v in enumerate(_list(value, path)))


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


def weapon_from_dict(data: Any, path: str) -> WeaponSpec:
    f = _fields(
        data,
        path,
        {"name": _str, "p_base": _num, "range_R": _num, "rof_base": _num, "damage": _num,
         "ammo_capacity": _int},
    )
    return _guard(
        lambda: WeaponSpec(f["name"], f["p_base"], f["range_R"], f["rof_base"], f["damage"],
                           f["ammo_capacity"]),
        path,
    )


def weapon_to_dict(w: WeaponSpec) -> dict[str, Any]:
    return {"name": w.name, "p_base": w.p_base, "range_R": w.range_r, "rof_base": w.rof_base,
            "damage": w.damage, "ammo_capacity": w.ammo_capacity}


def _patrol(value: Any, path: str) -> tuple[Vec2, ...]:
    return tuple(_vec(v, f"{path}[{i}]") for i, v in enumerate(_list(value, path)))


def _escort_order(value: Any, path: str) -> EscortOrder:
    f = _fields(value, path, {"ally_id": _str, "offset": _vec})
    return EscortOrder(f["ally_id"], f["offset"])


def _suppress_order(value: Any, path: str) -> SuppressOrder:
    f = _fields(value, path, {"target_id": _str, "start": _num, "end": _num})
    return SuppressOrder(f["target_id"], f["start"], f["end"])


def entity_from_dict(data: Any, path: str) -> EntityState:
    f = _fields(
        data,
        path,
        {"id": _str, "side": _enum(Side), "class": _enum(EntityClass), "position": _vec,
         "speed_max": _num, "health": _num},
        {"heading": _num, "weapon": weapon_from_dict, "ammo": _int,
         "value_class": _enum(ValueClass), "patrol_route": _patrol,
         "suppressed_until": _num, "last_fire_time": _num, "waypoint": _vec,
         "move_speed": _num, "escort": _escort_order, "suppress": _suppress_order},
    )
    weapon = f.get("weapon")
    ammo = f.get("ammo", weapon.ammo_capacity if weapon else 0)
    return _guard(
        lambda: EntityState(
            id=f["id"], side=f["side"], cls=f["class"], position=f["position"],
            speed_max=f["speed_max"], health=f["health"], heading=f.get("heading", 0.0),
            weapon=weapon, ammo=ammo, suppressed_until=f.get("suppressed_until"),
            last_fire_time=f.get("last_fire_time"), value_class=f.get("value_class"),
            patrol_route=f.get("patrol_route", ()), waypoint=f.get("waypoint"),
            move_speed=f.get("move_speed", 0.0), escort=f.get("escort"),
            suppress=f.get("suppress"),
        ),
        path,
    )


def entity_to_dict(e: EntityState, *, runtime: bool = False) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": e.id,
        "side": e.side.value,
        "class": e.cls.value,
        "position": [e.position.x, e.position.y],
        "speed_max": e.speed_max,
        "health": e.health,
        "heading": e.heading,
        "ammo": e.ammo,
        "value_class": e.value_class.value,
    }
    if e.weapon is not None:
        out["weapon"] = weapon_to_dict(e.weapon)
    if e.patrol_route:
        out["patrol_route"] = [[p.x, p.y] for p in e.patrol_route]
    if e.suppressed_until is not None:
        out["suppressed_until"] = e.suppressed_until
    if e.last_fire_time is not None:
        out["last_fire_time"] = e.last_fire_time
    if runtime or e.waypoint is not None:
        if e.waypoint is not None:
            out["waypoint"] = [e.waypoint.x, e.waypoint.y]
            out["move_speed"] = e.move_speed
    if e.escort is not None:
        out["escort"] = {"ally_id": e.escort.ally_id, "offset": [e.escort.offset.x, e.escort.offset.y]}
    if e.suppress is not None:
        out["suppress"] = {"target_id": e.suppress.target_id, "start": e.suppress.start,
                           "end": e.suppress.end}
    return out


def _zone(value: Any, path: str) -> NoFlyZone:
    f = _fields(value, path, {"center": _vec, "radius": _num})
    return _guard(lambda: NoFlyZone(f["center"], f["radius"]), path)


def _budget(value: Any, path: str) -> dict[str, int]:
    if not isinstance(value, dict):
        raise SchemaError("expected an object", path)
    return {k: _int(v, f"{path}.{k}") for k, v in value.items()}


def _limits(value: Any, path: str) -> dict[str, float]:
    if not isinstance(value, dict):
        raise SchemaError("expected an object", path)
    out = {}
    for k, v in value.items():
        _enum(EntityClass)(k, f"{path}.{k}")
        out[k] = _num(v, f"{path}.{k}")
    return out


CONSTRAINT_READERS = {
    "ammo_budget": _budget,
    "speed_limits": _limits,
    "no_fly_zones": lambda v, p: tuple(_zone(z, f"{p}[{i}]") for i, z in enumerate(_list(v, p))),
    "launch_standoff": _num,
    "max_plan_duration": _num,
    "max_launches_per_tick": _int,
}


def constraints_from_dict(data: Any, path: str) -> ConstraintSet:
    f = _fields(data, path, {}, CONSTRAINT_READERS)
    return _guard(lambda: ConstraintSet(**f), path)


def constraints_to_dict(c: ConstraintSet) -> dict[str, Any]:
    return {
        "ammo_budget": dict(c.ammo_budget),
        "speed_limits": dict(c.speed_limits),
        "no_fly_zones": [{"center": [z.center.x, z.center.y], "radius": z.radius}
                         for z in c.no_fly_zones],
        "launch_standoff": c.launch_standoff,
        "max_plan_duration": c.max_plan_duration,
        "max_launches_per_tick": c.max_launches_per_tick,
    }


SIM_READERS = {
    "dt": _num, "horizon": _num, "mc_repetitions": _int, "seed_list": parse_seed_list,
    "alpha": _num, "beta": _num, "gamma_rof": _num, "lambda_hit": _num, "tau_sup": _num,
    "suppress_damage": _bool,
}


def sim_config_from_dict(data: Any, path: str) -> SimConfig:
    f = _fields(data, path, {}, SIM_READERS)
    return _guard(lambda: SimConfig(**f), path)


def sim_config_to_dict(c: SimConfig) -> dict[str, Any]:
    return {
        "dt": c.dt, "horizon": c.horizon, "mc_repetitions": c.mc_repetitions,
        "seed_list": list(c.seed_list), "alpha": c.alpha, "beta": c.beta,
        "gamma_rof": c.gamma_rof, "lambda_hit": c.lambda_hit, "tau_sup": c.tau_sup,
        "suppress_damage": c.suppress_damage,
    }


def scenario_from_dict(data: Any, path: str = "$") -> Scenario:
    f = _fields(
        data,
        path,
        {"core_target_id": _str, "entities": _list},
        {"name": _str, "map_width": _num, "map_height": _num, "difficulty": _enum(Difficulty),
         "constraint_set": constraints_from_dict, "sim_config": sim_config_from_dict},
    )
    entities = tuple(
        entity_from_dict(e, f"{path}.entities[{i}]") for i, e in enumerate(f["entities"])
    )
    kwargs = {k: v for k, v in f.items() if k not in ("entities",)}
    return _guard(lambda: Scenario(entities=entities, **kwargs), path)


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "name": s.name,
        "map_width": s.map_width,
        "map_height": s.map_height,
        "difficulty": s.difficulty.value,
        "core_target_id": s.core_target_id,
        "entities": [entity_to_dict(e) for e in s.entities],
        "constraint_set": constraints_to_dict(s.constraint_set),
        "sim_config": sim_config_to_dict(s.sim_config),
    }


def scenario_digest(s: Scenario) -> str:
    return canonical.digest(scenario_to_dict(s))


def read_json(path: str | Path) -> Any:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", str(p)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                         str(p)) from None


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file; absent sim_config fields take defaults."""
    return scenario_from_dict(read_json(path))


def write_canonical(path: str | Path, obj: Any) -> bytes:
    data = canonical.dump_bytes(obj) + b"\n"
    Path(path).write_bytes(data)
    return data


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    write_canonical(path, scenario_to_dict(scenario))


# ---------------------------------------------------------------------------
# actions / plans / intents
# ---------------------------------------------------------------------------


def action_from_dict(data: Any, path: str = "$") -> AtomicAction:
    if not isinstance(data, dict):
        raise SchemaError("expected an object", path)
    kind = data.get("kind")
    base = {"actor_id": _str, "t_start": _num, "kind": _str}
    if kind == "MOVE_TO":
        f = _fields(data, path, {**base, "waypoint": _vec, "speed": _num})
        order = lambda: MoveTo(f["waypoint"], f["speed"])  # noqa: E731
    elif kind == "LAUNCH":
        f = _fields(data, path, {**base, "weapon": _str, "target_id": _str})
        order = lambda: Launch(f["weapon"], f["target_id"])  # noqa: E731
    elif kind == "SUPPRESS":
        f = _fields(data, path, {**base, "target_id": _str, "duration": _num})
        order = lambda: Suppress(f["target_id"], f["duration"])  # noqa: E731
    elif kind == "ESCORT":
        f = _fields(data, path, {**base, "ally_id": _str, "offset": _vec})
        order = lambda: Escort(f["ally_id"], f["offset"])  # noqa: E731
    else:
        raise SchemaError(f"unknown action kind {kind!r}", f"{path}.kind")
    return _guard(lambda: AtomicAction(f["actor_id"], f["t_start"], order()), path)


def action_to_dict(a: AtomicAction) -> dict[str, Any]:
    out: dict[str, Any] = {"actor_id": a.actor_id, "t_start": a.t_start, "kind": a.kind}
    o = a.order
    if isinstance(o, MoveTo):
        out.update(waypoint=[o.waypoint.x, o.waypoint.y], speed=o.speed)
    elif isinstance(o, Launch):
        out.update(weapon=o.weapon, target_id=o.target_id)
    elif isinstance(o, Suppress):
        out.update(target_id=o.target_id, duration=o.duration)
    else:
        out.update(ally_id=o.ally_id, offset=[o.offset.x, o.offset.y])
    return out


def _trajectories(value: Any, path: str) -> dict[str, tuple[tuple[float, float], ...]]:
    if not isinstance(value, dict):
        raise SchemaError("expected an object of entity_id -> [[x, y], ...]", path)
    out = {}
    for eid, samples in value.items():
        p = f"{path}.{eid}"
        out[eid] = tuple(_vec(s, f"{p}[{i}]").as_tuple() for i, s in enumerate(_list(samples, p)))
    return out


def plan_from_dict(data: Any, path: str = "$") -> CandidatePlan:
    f = _fields(
        data,
        path,
        {"plan_id": _str, "actions": _list},
        {"trajectories": _trajectories, "metadata": lambda v, p: v},
    )
    actions = tuple(action_from_dict(a, f"{path}.actions[{i}]") for i, a in enumerate(f["actions"]))
    meta = f.get("metadata", {})
    if not isinstance(meta, dict):
        raise SchemaError("metadata must be an object", f"{path}.metadata")
    return CandidatePlan(f["plan_id"], actions, f.get("trajectories", {}), meta)


def plan_to_dict(plan: CandidatePlan) -> dict[str, Any]:
    return {
        "plan_id": plan.plan_id,
        "actions": [action_to_dict(a) for a in plan.actions],
        "trajectories": {eid: [list(p) for p in traj]
                         for eid, traj in plan.planned_trajectories.items()},
        "metadata": dict(plan.metadata),
    }


def load_plan(path: str | Path) -> CandidatePlan:
    return plan_from_dict(read_json(path))


def save_plan(plan: CandidatePlan, path: str | Path) -> None:
    write_canonical(path, plan_to_dict(plan))


def intent_from_dict(data: Any, path: str = "$") -> Intent:
    f = _fields(
        data,
        path,
        {"core_target_id": _str},
        {"objective": _str,
         "priority_weights": lambda v, p: tuple(_num(x, f"{p}[{i}]") for i, x in enumerate(_list(v, p))),
         "hard_constraints": lambda v, p: _fields(v, p, {}, CONSTRAINT_READERS)},
    )
    return _guard(lambda: Intent(**f), path)


def intent_to_dict(intent: Intent) -> dict[str, Any]:
    hc = dict(intent.hard_constraints)
    if "no_fly_zones" in hc:
        hc["no_fly_zones"] = [{"center": [z.center.x, z.center.y], "radius": z.radius}
                              for z in hc["no_fly_zones"]]
    return {
        "core_target_id": intent.core_target_id,
        "objective": intent.objective,
        "priority_weights": list(intent.priority_weights),
        "hard_constraints": hc,
    }


def load_intent(path: str | Path) -> Intent:
    return intent_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# structural plan checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Defect:
    @property
    def code(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class UnknownActor(Defect):
    actor_id: str


@dataclass(frozen=True)
class WrongSide(Defect):
    actor_id: str


@dataclass(frozen=True)
class UnknownTarget(Defect):
    actor_id: str
    target_id: str


@dataclass(frozen=True)
class UnknownWeapon(Defect):
    actor_id: str
    weapon: str


@dataclass(frozen=True)
class InvalidSuppressTarget(Defect):
    actor_id: str
    target_id: str


@dataclass(frozen=True)
class ActionsUnsorted(Defect):
    index: int


@dataclass(frozen=True)
class ActionBeyondHorizon(Defect):
    actor_id: str
    t_start: float
    horizon: float


@dataclass(frozen=True)
class MissingTrajectory(Defect):
    entity_id: str


@dataclass(frozen=True)
class IncompleteTrajectory(Defect):
    entity_id: str
    samples: int
    expected: int


def validate_plan_shape(plan: CandidatePlan, scenario: Scenario) -> list[Defect]:
    """Structural defects of ``plan`` against ``scenario`` (empty list when well formed)."""
    defects: list[Defect] = []
    by_id = {e.id: e for e in scenario.entities}
    horizon = scenario.sim_config.horizon
    for i, a in enumerate(plan.actions):
        actor = by_id.get(a.actor_id)
        if actor is None:
            defects.append(UnknownActor(a.actor_id))
            continue
        if actor.side is not Side.PLAN_EXECUTING:
            defects.append(WrongSide(a.actor_id))
        if a.t_start > horizon + 1e-9:
            defects.append(ActionBeyondHorizon(a.actor_id, a.t_start, horizon))
        o = a.order
        if isinstance(o, (Launch, Suppress)):
            target = by_id.get(o.target_id)
            if target is None or target.side is not Side.OPPONENT:
                defects.append(UnknownTarget(a.actor_id, o.target_id))
            elif isinstance(o, Suppress) and target.cls is not EntityClass.ANTI_AIR_THREAT:
                defects.append(InvalidSuppressTarget(a.actor_id, o.target_id))
            if actor.weapon is None or (isinstance(o, Launch) and o.weapon != actor.weapon.name):
                defects.append(UnknownWeapon(a.actor_id, getattr(o, "weapon", "")))
        elif isinstance(o, Escort):
            ally = by_id.get(o.ally_id)
            if ally is None or ally.side is not Side.PLAN_EXECUTING or ally.id == a.actor_id:
                defects.append(UnknownTarget(a.actor_id, o.ally_id))
    for i in range(len(plan.actions) - 1):
        if plan.actions[i].sort_key() > plan.actions[i + 1].sort_key():
            defects.append(ActionsUnsorted(i + 1))
    need = scenario.sim_config.horizon_ticks + 1
    for e in scenario.blue:
        traj = plan.planned_trajectories.get(e.id)
        if traj is None:
            defects.append(MissingTrajectory(e.id))
        elif len(traj) < need:
            defects.append(IncompleteTrajectory(e.id, len(traj), need))
    return defects
