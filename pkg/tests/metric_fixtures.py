"""Twenty hand-written rollout records and brute-force metric oracles.

Every fixture lists its engagements explicitly.  The oracles read only the
raw event logs and trajectories, never the record's summary counters, so
they check the harness against an independent path.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from builders import ev, plan, record

BLUE_IDS = ("B-1", "B-2", "F-1")
RED_IDS = ("CC-01", "AAT-1")

# (end_tick, blue shots [(tick, hit)], red shots [(tick, target, hit)],
#  destroyed [(tick, id)], per-entity drift (dx, dy) per tick)
SPECS = [
    (10, [(1, True), (3, True)], [], [(3, "CC-01")], (0.0, 0.0)),
    (20, [(2, False), (5, True), (9, True)], [(4, "F-1", True)], [(9, "CC-01")], (0.1, 0.0)),
    (40, [(2, False), (12, False)], [(5, "B-1", True), (15, "B-2", True)],
     [(5, "B-1"), (15, "B-2")], (0.0, 0.2)),
    (200, [], [], [], (0.0, 0.0)),
    (200, [(10, False)], [(20, "F-1", False), (30, "F-1", True)], [(30, "F-1")], (0.05, 0.05)),
    (15, [(1, True), (11, True)], [(2, "B-2", False)], [(11, "CC-01")], (0.3, -0.4)),
    (50, [(5, True), (15, False), (25, True)], [(6, "B-1", True), (16, "B-1", True)],
     [(16, "B-1"), (25, "CC-01")], (0.0, 0.0)),
    (60, [(5, False)], [(10, "B-1", True), (20, "B-2", True), (30, "F-1", True)],
     [(10, "B-1"), (20, "B-2"), (30, "F-1")], (1.0, 0.0)),
    (8, [(1, True), (2, True), (3, True)], [], [(3, "CC-01")], (0.0, 1.0)),
    (120, [(10, True)], [(40, "F-1", False)], [], (0.2, 0.2)),
    (33, [(3, True), (13, True)], [(4, "F-1", True), (14, "F-1", False)], [(13, "CC-01")], (0.0, 0.0)),
    (200, [(20, False), (30, False), (40, False)], [(50, "B-2", True)], [(50, "B-2")], (0.01, 0.0)),
    (77, [(7, True), (17, True)], [(8, "B-1", False), (18, "B-2", False)], [(17, "CC-01")], (0.5, 0.5)),
    (90, [(9, True)], [(10, "B-1", True)], [(10, "B-1")], (0.0, -0.3)),
    (25, [(5, True), (15, True)], [(5, "F-1", True), (6, "B-2", True)],
     [(5, "F-1"), (6, "B-2"), (15, "CC-01")], (0.25, 0.0)),
    (140, [], [(14, "B-1", False)], [], (0.0, 0.0)),
    (66, [(6, True), (16, False), (26, True)], [], [(26, "CC-01")], (2.0, -1.0)),
    (12, [(2, True), (4, True)], [(3, "F-1", True)], [(3, "F-1"), (4, "CC-01")], (0.0, 0.0)),
    (180, [(30, False), (60, True)], [(31, "B-1", True), (61, "B-2", False)], [(31, "B-1")], (0.1, 0.1)),
    (45, [(15, True), (25, True)], [(16, "B-2", False)], [(25, "CC-01")], (0.0, 0.5)),
]


def _events(spec):
    _, blue, red, destroyed, _ = spec
    out = []
    for tick, hit in blue:
        out.append(ev(tick, "Fire", "B-1", "CC-01"))
        out.append(ev(tick, "Hit" if hit else "Miss", "B-1", "CC-01"))
    for tick, target, hit in red:
        out.append(ev(tick, "Fire", "AAT-1", target))
        out.append(ev(tick, "Hit" if hit else "Miss", "AAT-1", target))
    for tick, eid in destroyed:
        out.append(ev(tick, "Destroyed", eid))
    return sorted(out, key=lambda e: e.tick)


def _traj(spec, k):
    end, *_, (dx, dy) = spec
    out = {}
    for n, eid in enumerate(BLUE_IDS):
        scale = n + 1
        out[eid] = tuple((dx * t * scale, dy * t * scale + k) for t in range(end + 1))
    return out


def build_record(k: int, spec=None):
    spec = spec or SPECS[k]
    end, blue, _, destroyed, _ = spec
    success = any(eid == "CC-01" for _, eid in destroyed)
    lost = sum(1 for _, eid in destroyed if eid in BLUE_IDS)
    return record(success=success, end_tick=end, events=_events(spec), lost=lost, ammo=len(blue),
                  blue=BLUE_IDS, red=RED_IDS, traj=_traj(spec, k), seed=k + 1)


def build_plan(horizon_ticks: int = 200):
    """Planned positions: everyone parked at the origin; record k drifts away from y = k."""
    return plan(trajectories={eid: tuple((0.0, 0.0) for _ in range(horizon_ticks + 1))
                              for eid in BLUE_IDS})


def all_records():
    return [build_record(k) for k in range(len(SPECS))]


# -- oracles -------------------------------------------------------------------

def _kind(r, kind, side=None):
    return [e for e in r.events if e.kind.value == kind
            and (side is None or r.sides[e.actor_id].value == side)]


def oracle_msr(records) -> Fraction:
    wins = sum(1 for r in records if any(e.actor_id == r.core_target_id for e in _kind(r, "Destroyed")))
    return Fraction(wins, len(records))


def oracle_lost(r) -> int:
    return sum(1 for e in _kind(r, "Destroyed", "PlanExecuting"))


def oracle_cla(records, eta1=1.0, eta2=0.1) -> float:
    total = sum(eta1 * oracle_lost(r) + eta2 * len(_kind(r, "Fire", "PlanExecuting")) for r in records)
    return total / len(records)


def oracle_ade_fde(records, p) -> tuple[float, float]:
    disp, finals = [], []
    for r in records:
        blue = [i for i in r.entity_ids if r.sides[i].value == "PlanExecuting"]
        sim = np.array([r.trajectories[i][1:r.end_tick + 1] for i in blue])
        ref = np.array([p.planned_trajectories[i][1:r.end_tick + 1] for i in blue])
        d = np.linalg.norm(sim - ref, axis=-1)
        disp.append(d.ravel())
        finals.extend(d[:, -1])
    return float(np.concatenate(disp).mean()), float(np.mean(finals))


def oracle_process(records) -> dict:
    n = len(records)
    succ = [r for r in records if any(e.actor_id == r.core_target_id for e in _kind(r, "Destroyed"))]
    ttk = [next(e.tick for e in _kind(r, "Destroyed") if e.actor_id == r.core_target_id) * r.dt
           for r in succ]
    fires = {s: sum(len(_kind(r, "Fire", s)) for r in records) for s in ("PlanExecuting", "Opponent")}
    hits = {s: sum(len(_kind(r, "Hit", s)) for r in records) for s in ("PlanExecuting", "Opponent")}
    return {
        "n_records": n,
        "avg_platform_attrition": sum(oracle_lost(r) for r in records) / n,
        "attrition_fraction": sum(oracle_lost(r) / len(BLUE_IDS) for r in records) / n,
        "avg_opponent_fire_hits": hits["Opponent"] / n,
        "avg_opponent_fire_fired": fires["Opponent"] / n,
        "missiles_launched": fires["PlanExecuting"] / n,
        "missile_hits": hits["PlanExecuting"] / n,
        "missile_misses": sum(len(_kind(r, "Miss", "PlanExecuting")) for r in records) / n,
        "ttk_mean": sum(ttk) / len(ttk) if ttk else None,
        "sr_process": {s: (hits[s] / fires[s] if fires[s] else None) for s in ("PlanExecuting", "Opponent")},
    }
