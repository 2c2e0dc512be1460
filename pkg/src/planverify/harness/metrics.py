"""Plan-quality metrics computed from rollout records.

All aggregates are means over records, so they do not depend on record order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from planverify.engine import RolloutRecord
from planverify.errors import EmptyInput, MissingPlannedTrajectory
from planverify.model import MAP_HEIGHT, MAP_WIDTH, CandidatePlan, EventKind, Side

DEFAULT_X0 = math.hypot(MAP_WIDTH, MAP_HEIGHT) / 10.0
BLUE = Side.PLAN_EXECUTING.value
RED = Side.OPPONENT.value


@dataclass(frozen=True)
class MetricWeights:
    eta1: float = 1.0
    eta2: float = 0.1
    lambda1: float = 1.0
    lambda2: float = 0.2
    lambda3: float = 0.1
    norm_x0: float = DEFAULT_X0

    def __post_init__(self) -> None:
        for k, v in asdict(self).items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{k} must be non-negative and finite")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be > 0")
        if not self.norm_x0 > 0:
            raise ValueError("norm_x0 must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _nonempty(records: Sequence[RolloutRecord]) -> None:
    if not records:
        raise EmptyInput("no rollout records")


def compute_msr(records: Sequence[RolloutRecord]) -> float:
    _nonempty(records)
    return sum(1 for r in records if r.success) / len(records)


def compute_cla(records: Sequence[RolloutRecord], weights: MetricWeights | None = None) -> float:
    """Mean of ``eta1 * friendly platforms lost + eta2 * friendly ammunition spent``."""
    _nonempty(records)
    w = weights or MetricWeights()
    return sum(w.eta1 * r.entities_lost[BLUE] + w.eta2 * r.ammo_spent[BLUE] for r in records) / len(records)


def compute_ade(records: Sequence[RolloutRecord], plan: CandidatePlan) -> tuple[float, float]:
    """(ADE, FDE) of simulated against planned positions of plan-executing entities.

    ADE averages over every record, every tick 1..end_tick of that record and
    every plan-executing entity.  FDE averages the displacement at each
    record's final tick.  Dead entities keep their death position, which the
    simulator already freezes.
    """
    _nonempty(records)
    total = 0.0
    count = 0
    final = 0.0
    n_final = 0
    for r in records:
        for eid in r.ids_of(Side.PLAN_EXECUTING):
            planned = plan.planned_trajectories.get(eid)
            if planned is None:
                raise MissingPlannedTrajectory(f"plan {plan.plan_id} has no trajectory for {eid}")
            sim = r.trajectories[eid]
            if len(planned) <= r.end_tick:
                raise MissingPlannedTrajectory(
                    f"plan {plan.plan_id} trajectory for {eid} stops before tick {r.end_tick}")
            for t in range(1, r.end_tick + 1):
                total += math.hypot(sim[t][0] - planned[t][0], sim[t][1] - planned[t][1])
                count += 1
            t = r.end_tick
            final += math.hypot(sim[t][0] - planned[t][0], sim[t][1] - planned[t][1])
            n_final += 1
    ade = total / count if count else 0.0
    fde = final / n_final if n_final else 0.0
    return ade, fde


def phi_norm(x: float, x0: float = DEFAULT_X0) -> float:
    return x / (x + x0)


def compute_pqs(msr: float, cla: float, ade: float, weights: MetricWeights | None = None) -> float:
    w = weights or MetricWeights()
    return w.lambda1 * msr - w.lambda2 * cla - w.lambda3 * phi_norm(ade, w.norm_x0)


def success_aggregates(easy_msr: float, difficult_msr: float) -> tuple[float, float]:
    """(overall, robust) = (mean, min) of the two difficulty success rates."""
    return (easy_msr + difficult_msr) / 2.0, min(easy_msr, difficult_msr)


def suppression_rate_outcome(msr: float) -> float:
    return 1.0 - msr


@dataclass(frozen=True)
class ProcessMetrics:
    n_records: int
    avg_platform_attrition: float
    attrition_fraction: float
    avg_opponent_fire_hits: float
    avg_opponent_fire_fired: float
    missiles_launched: float
    missile_hits: float
    missile_misses: float
    ttk_mean: float | None
    sr_process: dict

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.ttk_mean is None:
            del out["ttk_mean"]
        return out


def process_metrics(records: Sequence[RolloutRecord]) -> ProcessMetrics:
    """Event-log engagement statistics, averaged per record.

    Missile counts cover every plan-executing Fire/Hit/Miss event.  TTK is
    the core-target destruction time averaged over successful records only
    and is ``None`` when no record succeeded.  ``sr_process`` is total hits
    over total fires per side (``None`` for a side that never fired).
    """
    _nonempty(records)
    n = len(records)
    fires = {BLUE: 0, RED: 0}
    hits = {BLUE: 0, RED: 0}
    misses = {BLUE: 0, RED: 0}
    lost = 0
    frac = 0.0
    ttk = []
    for r in records:
        for ev in r.events:
            side = r.sides[ev.actor_id].value
            if ev.kind is EventKind.FIRE:
                fires[side] += 1
            elif ev.kind is EventKind.HIT:
                hits[side] += 1
            elif ev.kind is EventKind.MISS:
                misses[side] += 1
            elif ev.kind is EventKind.DESTROYED and ev.actor_id == r.core_target_id and r.success:
                ttk.append(ev.tick * r.dt)
        n_blue = len(r.ids_of(Side.PLAN_EXECUTING))
        lost += r.entities_lost[BLUE]
        frac += r.entities_lost[BLUE] / n_blue if n_blue else 0.0
    return ProcessMetrics(
        n_records=n,
        avg_platform_attrition=lost / n,
        attrition_fraction=frac / n,
        avg_opponent_fire_hits=hits[RED] / n,
        avg_opponent_fire_fired=fires[RED] / n,
        missiles_launched=fires[BLUE] / n,
        missile_hits=hits[BLUE] / n,
        missile_misses=misses[BLUE] / n,
        ttk_mean=sum(ttk) / len(ttk) if ttk else None,
        sr_process={s: (hits[s] / fires[s] if fires[s] else None) for s in (BLUE, RED)},
    )
