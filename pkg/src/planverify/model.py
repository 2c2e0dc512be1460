"""Shared domain types: entities, weapons, scenarios, plans and intents.

Everything here is immutable after construction except :class:`GlobalState`,
which a single rollout owns while it steps.  Invariants are checked in
``__post_init__`` and raise :class:`~planverify.errors.InvariantError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Mapping, Union

from planverify.errors import InvariantError

MAP_WIDTH = 260.0
MAP_HEIGHT = 160.0


class Side(str, Enum):
    PLAN_EXECUTING = "PlanExecuting"
    OPPONENT = "Opponent"


class EntityClass(str, Enum):
    BOMBER = "Bomber"
    FIGHTER = "Fighter"
    COMMAND_CENTER = "CommandCenter"
    ANTI_AIR_THREAT = "AntiAirThreat"
    MISSILE_THREAT_REGION = "MissileThreatRegion"
    AIR_PATROL = "AirPatrol"


class ValueClass(str, Enum):
    HIGH_VALUE = "HighValue"
    ORDINARY = "Ordinary"


class Difficulty(str, Enum):
    EASY = "Easy"
    DIFFICULT = "Difficult"


DEFAULT_VALUE_CLASS = {
    EntityClass.BOMBER: ValueClass.HIGH_VALUE,
    EntityClass.COMMAND_CENTER: ValueClass.HIGH_VALUE,
}


def _finite(value: float, name: str) -> None:
    if not math.isfinite(value):
        raise InvariantError(f"{name} must be finite, got {value!r}", name)


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvariantError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def dist(self, other: Vec2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)

    def within(self, width: float, height: float) -> bool:
        return 0.0 <= self.x <= width and 0.0 <= self.y <= height


@dataclass(frozen=True, slots=True)
class WeaponSpec:
    name: str
    p_base: float
    range_r: float
    rof_base: float
    damage: float
    ammo_capacity: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_base <= 1.0:
            raise InvariantError(f"p_base must lie in [0, 1], got {self.p_base}", "p_base")
        if not self.range_r > 0:
            raise InvariantError(f"range_R must be > 0, got {self.range_r}", "range_R")
        if not self.rof_base > 0:
            raise InvariantError(f"rof_base must be > 0, got {self.rof_base}", "rof_base")
        if not self.damage > 0:
            raise InvariantError(f"damage must be > 0, got {self.damage}", "damage")
        if self.ammo_capacity < 0:
            raise InvariantError("ammo_capacity must be non-negative", "ammo_capacity")
        for name in ("p_base", "range_r", "rof_base", "damage"):
            _finite(getattr(self, name), name)


@dataclass(frozen=True, slots=True)
class SuppressOrder:
    """Standing order: engage ``target_id`` with soft-kill fire during [start, end]."""

    target_id: str
    start: float
    end: float


@dataclass(frozen=True, slots=True)
class EscortOrder:
    ally_id: str
    offset: Vec2


@dataclass(frozen=True, slots=True)
class EntityState:
    id: str
    side: Side
    cls: EntityClass
    position: Vec2
    speed_max: float
    health: float
    heading: float = 0.0
    weapon: WeaponSpec | None = None
    ammo: int = 0
    suppressed_until: float | None = None
    last_fire_time: float | None = None
    value_class: ValueClass | None = None
    patrol_route: tuple[Vec2, ...] = ()
    # active movement / standing orders (engine-managed)
    waypoint: Vec2 | None = None
    move_speed: float = 0.0
    escort: EscortOrder | None = None
    suppress: SuppressOrder | None = None

    def __post_init__(self) -> None:
        if self.value_class is None:
            object.__setattr__(
                self, "value_class", DEFAULT_VALUE_CLASS.get(self.cls, ValueClass.ORDINARY)
            )
        if self.health < 0 or not math.isfinite(self.health):
            raise InvariantError(f"{self.id}: health must be a non-negative finite number", "health")
        if self.speed_max < 0 or not math.isfinite(self.speed_max):
            raise InvariantError(f"{self.id}: speed_max must be >= 0", "speed_max")
        if self.ammo < 0:
            raise InvariantError(f"{self.id}: ammo must be non-negative", "ammo")
        if self.weapon is None:
            if self.ammo != 0:
                raise InvariantError(f"{self.id}: ammo must be 0 without a weapon", "ammo")
        elif self.ammo > self.weapon.ammo_capacity:
            raise InvariantError(f"{self.id}: ammo exceeds weapon.ammo_capacity", "ammo")
        if not math.isfinite(self.heading):
            raise InvariantError(f"{self.id}: heading must be finite", "heading")

    @property
    def alive(self) -> bool:
        return self.health > 0.0

    def is_suppressed(self) -> bool:
        return self.suppressed_until is not None


_ENTITY_FIELDS = tuple(f.name for f in fields(EntityState))


def evolve(e: EntityState, **changes: Any) -> EntityState:
    """``dataclasses.replace`` without re-validation, for engine updates of already-valid state."""
    new = object.__new__(EntityState)
    for name in _ENTITY_FIELDS:
        object.__setattr__(new, name, changes[name] if name in changes else getattr(e, name))
    return new


# ---------------------------------------------------------------------------
# actions and plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class MoveTo:
    waypoint: Vec2
    speed: float
    kind = "MOVE_TO"


@dataclass(frozen=True, slots=True)
class Launch:
    weapon: str
    target_id: str
    kind = "LAUNCH"


@dataclass(frozen=True, slots=True)
class Suppress:
    target_id: str
    duration: float
    kind = "SUPPRESS"


@dataclass(frozen=True, slots=True)
class Escort:
    ally_id: str
    offset: Vec2
    kind = "ESCORT"


Order = Union[MoveTo, Launch, Suppress, Escort]
ACTION_KINDS = ("MOVE_TO", "LAUNCH", "SUPPRESS", "ESCORT")


@dataclass(frozen=True, slots=True)
class AtomicAction:
    actor_id: str
    t_start: float
    order: Order

    def __post_init__(self) -> None:
        if not math.isfinite(self.t_start) or self.t_start < 0:
            raise InvariantError(f"t_start must be finite and >= 0, got {self.t_start}", "t_start")
        o = self.order
        if isinstance(o, MoveTo) and (o.speed < 0 or not math.isfinite(o.speed)):
            raise InvariantError("MOVE_TO speed must be >= 0", "speed")
        if isinstance(o, Suppress) and not o.duration > 0:
            raise InvariantError("SUPPRESS duration must be > 0", "duration")

    @property
    def kind(self) -> str:
        return self.order.kind

    @property
    def target_id(self) -> str | None:
        return getattr(self.order, "target_id", None)

    def sort_key(self) -> tuple[float, str]:
        return (self.t_start, self.actor_id)


Trajectory = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class CandidatePlan:
    """Timestamped atomic actions plus the per-tick planned positions.

    Ordering and completeness are deliberately *not* enforced here: broken
    plans are the input of the plan validator, which reports them as data.
    """

    plan_id: str
    actions: tuple[AtomicAction, ...]
    planned_trajectories: Mapping[str, Trajectory] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def is_sorted(self) -> bool:
        keys = [a.sort_key() for a in self.actions]
        return all(keys[i] <= keys[i + 1] for i in range(len(keys) - 1))

    def actions_of(self, actor_id: str) -> list[AtomicAction]:
        return [a for a in self.actions if a.actor_id == actor_id]


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class NoFlyZone:
    center: Vec2
    radius: float

    def __post_init__(self) -> None:
        if not self.radius >= 0:
            raise InvariantError("no-fly zone radius must be non-negative", "radius")

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.center.x, y - self.center.y) < self.radius


@dataclass(frozen=True)
class ConstraintSet:
    """Hard limits checked by the plan validator.

    ``launch_standoff`` caps the launch distance to the target below the
    weapon range; 0 means the weapon range alone governs.  Budgets absent
    from ``ammo_budget`` default to the entity's loaded ammunition.
    """

    ammo_budget: Mapping[str, int] = field(default_factory=dict)
    speed_limits: Mapping[str, float] = field(default_factory=dict)
    no_fly_zones: tuple[NoFlyZone, ...] = ()
    launch_standoff: float = 0.0
    max_plan_duration: float = 20.0
    max_launches_per_tick: int = 4

    def __post_init__(self) -> None:
        for eid, budget in self.ammo_budget.items():
            if budget < 0:
                raise InvariantError(f"ammo budget for {eid} is negative", f"ammo_budget.{eid}")
        for cls, limit in self.speed_limits.items():
            if limit < 0:
                raise InvariantError(f"speed limit for {cls} is negative", f"speed_limits.{cls}")
            EntityClass(cls)
        for name in ("launch_standoff", "max_plan_duration", "max_launches_per_tick"):
            if getattr(self, name) < 0:
                raise InvariantError(f"{name} must be non-negative", name)

    def speed_limit(self, entity: EntityState) -> float:
        limit = self.speed_limits.get(entity.cls.value)
        return entity.speed_max if limit is None else min(entity.speed_max, limit)

    def budget(self, entity: EntityState) -> int:
        budget = self.ammo_budget.get(entity.id)
        return entity.ammo if budget is None else min(entity.ammo, budget)

    def launch_range(self, weapon: WeaponSpec) -> float:
        if self.launch_standoff > 0:
            return min(weapon.range_r, self.launch_standoff)
        return weapon.range_r


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    horizon: float = 20.0
    mc_repetitions: int = 100
    seed_list: tuple[int, ...] = tuple(range(1, 101))
    alpha: float = 0.3
    beta: float = 0.7
    gamma_rof: float = 2.0
    lambda_hit: float = 0.5
    tau_sup: float = 3.0
    suppress_damage: bool = False

    def __post_init__(self) -> None:
        for name in ("dt", "horizon", "alpha", "beta", "gamma_rof", "lambda_hit", "tau_sup"):
            _finite(getattr(self, name), name)
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise InvariantError(
                f"alpha+beta must equal 1 (got {self.alpha}+{self.beta})", "sim_config.alpha"
            )
        if self.alpha < 0 or self.beta < 0:
            raise InvariantError("alpha and beta must be non-negative", "sim_config.alpha")
        if not self.dt > 0:
            raise InvariantError("dt must be > 0", "sim_config.dt")
        if not self.horizon > 0:
            raise InvariantError("horizon must be > 0", "sim_config.horizon")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvariantError("horizon/dt must be an integer number of ticks", "sim_config.horizon")
        if not self.gamma_rof > 1:
            raise InvariantError("gamma_rof must be > 1", "sim_config.gamma_rof")
        if not 0 < self.lambda_hit < 1:
            raise InvariantError("lambda_hit must lie in (0, 1)", "sim_config.lambda_hit")
        if not self.tau_sup > 0:
            raise InvariantError("tau_sup must be > 0", "sim_config.tau_sup")
        if self.mc_repetitions < 1:
            raise InvariantError("mc_repetitions must be >= 1", "sim_config.mc_repetitions")

    @property
    def horizon_ticks(self) -> int:
        return int(round(self.horizon / self.dt))

    def tick_of(self, t: float) -> int:
        """Tick index whose state a timestamp ``t`` refers to."""
        return int(round(t / self.dt))


@dataclass(frozen=True)
class Scenario:
    entities: tuple[EntityState, ...]
    core_target_id: str
    constraint_set: ConstraintSet = field(default_factory=ConstraintSet)
    sim_config: SimConfig = field(default_factory=SimConfig)
    difficulty: Difficulty = Difficulty.EASY
    map_width: float = MAP_WIDTH
    map_height: float = MAP_HEIGHT
    name: str = "scenario"

    def __post_init__(self) -> None:
        ids = [e.id for e in self.entities]
        if len(set(ids)) != len(ids):
            raise InvariantError("entity ids must be unique", "entities")
        centers = [
            e for e in self.entities
            if e.cls is EntityClass.COMMAND_CENTER and e.side is Side.OPPONENT
        ]
        if len(centers) != 1:
            raise InvariantError(
                f"exactly one CommandCenter on the Opponent side is required, found {len(centers)}",
                "entities",
            )
        if centers[0].id != self.core_target_id:
            raise InvariantError(
                f"core_target_id {self.core_target_id!r} must name the CommandCenter {centers[0].id!r}",
                "core_target_id",
            )
        if not (self.map_width > 0 and self.map_height > 0):
            raise InvariantError("map dimensions must be positive", "map_width")
        for i, e in enumerate(self.entities):
            if not e.position.within(self.map_width, self.map_height):
                raise InvariantError(f"{e.id} starts outside the map", f"entities[{i}].position")
            for j, wp in enumerate(e.patrol_route):
                if not wp.within(self.map_width, self.map_height):
                    raise InvariantError(
                        f"{e.id} patrol waypoint outside the map", f"entities[{i}].patrol_route[{j}]"
                    )

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.map_width, self.map_height)

    def entity(self, entity_id: str) -> EntityState:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(entity_id)

    def index_of(self, entity_id: str) -> int:
        for i, e in enumerate(self.entities):
            if e.id == entity_id:
                return i
        raise KeyError(entity_id)

    def side(self, side: Side) -> list[EntityState]:
        return [e for e in self.entities if e.side is side]

    @property
    def blue(self) -> list[EntityState]:
        return self.side(Side.PLAN_EXECUTING)

    @property
    def red(self) -> list[EntityState]:
        return self.side(Side.OPPONENT)

    @property
    def core_target(self) -> EntityState:
        return self.entity(self.core_target_id)


@dataclass(frozen=True)
class Intent:
    core_target_id: str
    objective: str = "DestroyCoreTarget"
    priority_weights: tuple[float, float, float] = (1.0, 0.5, 0.2)
    hard_constraints: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.objective != "DestroyCoreTarget":
            raise InvariantError(f"unsupported objective {self.objective!r}", "objective")
        if len(self.priority_weights) != 3:
            raise InvariantError("priority_weights needs (w_success, w_loss, w_time)", "priority_weights")
        if any(w < 0 for w in self.priority_weights):
            raise InvariantError("priority_weights must be non-negative", "priority_weights")
        if not any(w > 0 for w in self.priority_weights):
            raise InvariantError("priority_weights must not all be zero", "priority_weights")

    def constraints_for(self, scenario: Scenario) -> ConstraintSet:
        """Scenario constraints with the intent's hard overrides applied."""
        if not self.hard_constraints:
            return scenario.constraint_set
        return replace(scenario.constraint_set, **dict(self.hard_constraints))


# ---------------------------------------------------------------------------
# runtime state
# ---------------------------------------------------------------------------


class EventKind(str, Enum):
    FIRE = "Fire"
    HIT = "Hit"
    MISS = "Miss"
    SUPPRESS_START = "SuppressStart"
    SUPPRESS_END = "SuppressEnd"
    DESTROYED = "Destroyed"
    MOVE_COMPLETED = "MoveCompleted"


@dataclass(frozen=True, slots=True)
class Event:
    tick: int
    kind: EventKind
    actor_id: str
    target_id: str | None = None
    payload: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "kind": self.kind.value,
            "actor_id": self.actor_id,
            "target_id": self.target_id,
            "payload": dict(self.payload),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Event:
        return cls(
            tick=int(data["tick"]),
            kind=EventKind(data["kind"]),
            actor_id=data["actor_id"],
            target_id=data.get("target_id"),
            payload=dict(data.get("payload", {})),
        )


@dataclass
class GlobalState:
    """S_t: positions, health, ammunition and this tick's transient events."""

    tick: int
    time: float
    entities: tuple[EntityState, ...]
    transient_events: tuple[Event, ...] = ()
    dropped_actions: tuple[tuple[AtomicAction, str], ...] = ()
    index: Mapping[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {e.id: i for i, e in enumerate(self.entities)}

    def get(self, entity_id: str) -> EntityState:
        return self.entities[self.index[entity_id]]

    @classmethod
    def initial(cls, scenario: Scenario) -> GlobalState:
        return cls(tick=0, time=0.0, entities=tuple(scenario.entities))
