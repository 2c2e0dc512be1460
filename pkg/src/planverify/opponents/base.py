"""Opponent-policy contract and helpers shared by the built-in policies."""

from __future__ import annotations

import math
from typing import Protocol, Sequence, runtime_checkable

from planverify.engine import TIME_EPS
from planverify.model import AtomicAction, EntityState, GlobalState, Launch, Scenario, Side, SimConfig
from planverify.rng import SeedInfo


@runtime_checkable
class OpponentPolicy(Protocol):
    """Decides opponent-side actions from the full state history.

    ``decide`` sees S_0..S_t and returns orders for the step that produces
    tick t+1.  Implementations must only command live opponent entities.
    """

    name: str

    def reset(self, seed: SeedInfo) -> None: ...

    def decide(self, history: Sequence[GlobalState], scenario: Scenario) -> list[AtomicAction]: ...


def exec_time(state: GlobalState, config: SimConfig) -> float:
    """Simulation time at which orders issued on ``state`` are resolved."""
    return (state.tick + 1) * config.dt


def ready_to_fire(e: EntityState, now: float, config: SimConfig) -> bool:
    """ROF and ammo gating as the engine will see it at time ``now``.

    Suppression that will have expired by ``now`` is ignored, matching the
    expiry phase that runs before fire resolution.
    """
    if e.health <= 0 or e.weapon is None or e.ammo <= 0:
        return False
    if e.last_fire_time is None:
        return True
    suppressed = e.suppressed_until is not None and now < e.suppressed_until - TIME_EPS
    interval = e.weapon.rof_base * (config.gamma_rof if suppressed else 1.0)
    return now - e.last_fire_time >= interval - TIME_EPS


def live_blue(state: GlobalState) -> list[tuple[int, EntityState]]:
    return [(i, e) for i, e in enumerate(state.entities)
            if e.side is Side.PLAN_EXECUTING and e.health > 0]


def distance(a: EntityState, b: EntityState) -> float:
    return math.hypot(a.position.x - b.position.x, a.position.y - b.position.y)


def launch(shooter: EntityState, target_id: str, t: float) -> AtomicAction:
    assert shooter.weapon is not None
    return AtomicAction(shooter.id, t, Launch(shooter.weapon.name, target_id))
