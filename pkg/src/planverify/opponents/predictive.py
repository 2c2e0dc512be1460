"""Predictive value-aware opponent.

Stands in for a learned world model: it extrapolates plan-executing
entities with a constant-velocity model, ranks targets by value-weighted
proximity over the predicted window, allocates fire accordingly and sends
air patrols to intercept the most valuable target nobody else covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from planverify.model import (
    AtomicAction,
    EntityClass,
    EntityState,
    GlobalState,
    MoveTo,
    Scenario,
    Side,
    ValueClass,
    Vec2,
)
from planverify.opponents.base import distance, exec_time, launch, ready_to_fire
from planverify.opponents.nobrain import patrol_order
from planverify.rng import SeedInfo

DEFAULT_H_PRED = 20
DEFAULT_K = 3


@dataclass(frozen=True)
class PredictionSet:
    """Predicted positions of live plan-executing entities.

    ``positions[id]`` holds exactly ``horizon`` future samples (ticks t+1..t+H);
    ``current[id]`` is the last observed position.
    """

    horizon: int
    current: Mapping[str, tuple[float, float]]
    positions: Mapping[str, tuple[tuple[float, float], ...]]
    confidence: Mapping[str, float]


@dataclass(frozen=True)
class TargetPriority:
    entries: tuple[tuple[str, float], ...]

    @property
    def order(self) -> list[str]:
        return [tid for tid, _ in self.entries]

    def score(self, target_id: str) -> float:
        return dict(self.entries)[target_id]


def _turn_total(points: Sequence[tuple[float, float]]) -> float:
    """Sum of absolute heading changes between consecutive non-zero displacements."""
    headings = []
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x1 != x0 or y1 != y0:
            headings.append(math.atan2(y1 - y0, x1 - x0))
    total = 0.0
    for a, b in zip(headings, headings[1:]):
        diff = (b - a + math.pi) % (2 * math.pi) - math.pi
        total += abs(diff)
    return total


def predict_trajectories(
    history: Sequence[GlobalState],
    horizon: int = DEFAULT_H_PRED,
    *,
    k: int = DEFAULT_K,
    bounds: tuple[float, float] = (260.0, 160.0),
) -> PredictionSet:
    """Constant-velocity extrapolation from the last ``k`` observations.

    Velocity is the mean per-tick displacement over the window.  Confidence
    is ``1 / (1 + total absolute turn angle in radians)`` over the window, so
    a straight or stationary track scores 1.
    """
    if not history:
        raise ValueError("history must contain at least one state")
    if horizon < 1 or k < 1:
        raise ValueError("horizon and k must be >= 1")
    width, height = bounds
    last = history[-1]
    window = history[-k:]
    current, positions, confidence = {}, {}, {}
    for i, e in enumerate(last.entities):
        if e.side is not Side.PLAN_EXECUTING or e.health <= 0:
            continue
        pts = [s.entities[i].position.as_tuple() for s in window]
        x, y = pts[-1]
        m = len(pts) - 1
        vx = (x - pts[0][0]) / m if m else 0.0
        vy = (y - pts[0][1]) / m if m else 0.0
        current[e.id] = (x, y)
        positions[e.id] = tuple(
            (min(width, max(0.0, x + vx * h)), min(height, max(0.0, y + vy * h)))
            for h in range(1, horizon + 1)
        )
        confidence[e.id] = 1.0 / (1.0 + _turn_total(pts))
    return PredictionSet(horizon, current, positions, confidence)


def value_of(e: EntityState, w_B: float, w_F: float) -> float:
    return w_B if e.value_class is ValueClass.HIGH_VALUE else w_F


def prioritize_targets(
    predictions: PredictionSet,
    shooter: EntityState,
    scenario: Scenario | Sequence[EntityState],
    w_B: float = 2.0,
    w_F: float = 1.0,
) -> TargetPriority:
    """Rank predicted targets for one shooter.

    ``score = v(value_class) * max over {current} + predicted window of
    [d <= R] * (1 - d/R)``.  Sorted by score descending, ties by entity index.
    """
    entities = scenario.entities if isinstance(scenario, Scenario) else scenario
    if shooter.weapon is None:
        raise ValueError(f"{shooter.id} carries no weapon")
    R = shooter.weapon.range_r
    ids = [e.id for e in entities if e.id in predictions.positions]
    if not ids:
        return TargetPriority(())
    by_id = {e.id: e for e in entities}
    pts = np.array([[predictions.current[i], *predictions.positions[i]] for i in ids], dtype=float)
    d = np.hypot(pts[..., 0] - shooter.position.x, pts[..., 1] - shooter.position.y)
    prox = np.where(d <= R, 1.0 - d / R, 0.0).max(axis=1)
    scored = [(tid, value_of(by_id[tid], w_B, w_F) * float(p), n) for n, (tid, p) in enumerate(zip(ids, prox))]
    scored.sort(key=lambda s: (-s[1], s[2]))
    return TargetPriority(tuple((tid, score) for tid, score, _ in scored))


def _intercept_target(
    patrol: EntityState, state: GlobalState, w_B: float, w_F: float
) -> EntityState | None:
    """Most valuable live blue entity not already inside another armed opponent's range."""
    blues = [e for e in state.entities if e.side is Side.PLAN_EXECUTING and e.health > 0]
    if not blues:
        return None
    guards = [e for e in state.entities
              if e.side is Side.OPPONENT and e.health > 0 and e.weapon is not None
              and e.ammo > 0 and e.id != patrol.id]
    unengaged = [b for b in blues
                 if not any(distance(g, b) <= g.weapon.range_r for g in guards)]  # type: ignore[union-attr]
    pool = unengaged or blues
    order = {e.id: i for i, e in enumerate(state.entities)}
    return min(pool, key=lambda b: (-value_of(b, w_B, w_F), distance(patrol, b), order[b.id]))


def predictive_decide(
    history: Sequence[GlobalState],
    scenario: Scenario,
    *,
    w_B: float = 2.0,
    w_F: float = 1.0,
    horizon: int = DEFAULT_H_PRED,
    k: int = DEFAULT_K,
) -> list[AtomicAction]:
    state = history[-1]
    config = scenario.sim_config
    t = exec_time(state, config)
    if not any(e.side is Side.PLAN_EXECUTING and e.health > 0 for e in state.entities):
        return []
    preds: PredictionSet | None = None
    actions: list[AtomicAction] = []
    for e in state.entities:
        if e.side is not Side.OPPONENT or e.health <= 0:
            continue
        if e.cls is EntityClass.AIR_PATROL:
            if preds is None:
                preds = predict_trajectories(history, horizon, k=k, bounds=scenario.bounds)
            target = _intercept_target(e, state, w_B, w_F)
            if target is not None:
                lead = max(1, horizon // 2)
                ax, ay = preds.positions[target.id][lead - 1]
                aim = Vec2(ax, ay)
                if aim != e.position:
                    actions.append(AtomicAction(e.id, t, MoveTo(aim, e.speed_max)))
            else:
                move = patrol_order(e, t)
                if move is not None:
                    actions.append(move)
        if not ready_to_fire(e, t, config):
            continue
        assert e.weapon is not None
        in_range = {b.id for b in state.entities
                    if b.side is Side.PLAN_EXECUTING and b.health > 0
                    and distance(e, b) <= e.weapon.range_r}
        if not in_range:
            continue
        if preds is None:
            preds = predict_trajectories(history, horizon, k=k, bounds=scenario.bounds)
        for tid in prioritize_targets(preds, e, state.entities, w_B, w_F).order:
            if tid in in_range:
                actions.append(launch(e, tid, t))
                break
    return actions


class PredictiveOpponent:
    name = "predictive"

    def __init__(self, w_B: float = 2.0, w_F: float = 1.0, horizon: int = DEFAULT_H_PRED,
                 k: int = DEFAULT_K) -> None:
        if w_B <= 0 or w_F <= 0:
            raise ValueError("value weights must be positive")
        self.w_B, self.w_F, self.horizon, self.k = w_B, w_F, horizon, k

    def reset(self, seed: SeedInfo) -> None:
        pass

    def decide(self, history: Sequence[GlobalState], scenario: Scenario) -> list[AtomicAction]:
        return predictive_decide(history, scenario, w_B=self.w_B, w_F=self.w_F,
                                 horizon=self.horizon, k=self.k)
