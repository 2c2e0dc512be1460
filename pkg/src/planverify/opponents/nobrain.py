"""Static scripted opponent: nearest-target fire and fixed patrol loops."""

from __future__ import annotations

from typing import Sequence

from planverify.model import AtomicAction, EntityState, GlobalState, MoveTo, Scenario, Side
from planverify.opponents.base import distance, exec_time, launch, live_blue, ready_to_fire
from planverify.rng import SeedInfo


def nearest_in_range(shooter: EntityState, state: GlobalState) -> EntityState | None:
    """Nearest live plan-executing entity inside the shooter's range; ties by index."""
    assert shooter.weapon is not None
    best, best_d = None, float("inf")
    for _, target in live_blue(state):
        d = distance(shooter, target)
        if d <= shooter.weapon.range_r and d < best_d:
            best, best_d = target, d
    return best


def patrol_order(e: EntityState, t: float) -> AtomicAction | None:
    """Next leg of a patrol loop, issued only when the entity has no active waypoint.

    The loop position is recovered from the entity's own position (arrival
    snaps exactly onto the waypoint), so the policy stays stateless.
    """
    route = e.patrol_route
    if not route or e.waypoint is not None or e.health <= 0:
        return None
    nxt = 0
    for k, wp in enumerate(route):
        if wp == e.position:
            nxt = (k + 1) % len(route)
            break
    if route[nxt] == e.position:
        return None
    return AtomicAction(e.id, t, MoveTo(route[nxt], e.speed_max))


def nobrain_decide(history: Sequence[GlobalState], scenario: Scenario) -> list[AtomicAction]:
    state = history[-1]
    config = scenario.sim_config
    t = exec_time(state, config)
    actions: list[AtomicAction] = []
    for e in state.entities:
        if e.side is not Side.OPPONENT or e.health <= 0:
            continue
        move = patrol_order(e, t)
        if move is not None:
            actions.append(move)
        if ready_to_fire(e, t, config):
            target = nearest_in_range(e, state)
            if target is not None:
                actions.append(launch(e, target.id, t))
    return actions


class NoBrainOpponent:
    name = "nobrain"

    def reset(self, seed: SeedInfo) -> None:
        pass

    def decide(self, history: Sequence[GlobalState], scenario: Scenario) -> list[AtomicAction]:
        return nobrain_decide(history, scenario)
