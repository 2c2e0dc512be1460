from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import RED, FixedRng, aat, bomber, cc, ent, fighter, fire, move, plan, scenario, weapon
from planverify.engine import (
    Status,
    check_termination,
    effective_hit_probability,
    event_log_bytes,
    event_log_hash,
    resolve_fire,
    run_rollout,
    simulate_kinematics,
    step,
    suppressed_fire_params,
    trajectory_csv,
)
from planverify.errors import DomainError
from planverify.model import (
    AtomicAction,
    EntityClass,
    EventKind,
    GlobalState,
    Launch,
    MoveTo,
    SimConfig,
    Suppress,
    Vec2,
)
from planverify.opponents import NoBrainOpponent
from planverify.rng import RngStream, SeedInfo


class Passive:
    name = "passive"

    def reset(self, seed):
        pass

    def decide(self, history, scenario):
        return []


# -- hit model --------------------------------------------------------------------


def test_hit_probability_examples():
    assert effective_hit_probability(0.8, 0, 10, 0.3, 0.7) == 0.8
    assert effective_hit_probability(0.8, 10, 10, 0.3, 0.7) == pytest.approx(0.24, abs=1e-15)
    assert effective_hit_probability(0.8, 10.01, 10, 0.3, 0.7) == 0.0


@pytest.mark.parametrize("args", [
    (1.1, 1, 10, 0.3, 0.7), (-0.1, 1, 10, 0.3, 0.7), (0.5, 1, 0, 0.3, 0.7),
    (0.5, -1, 10, 0.3, 0.7), (0.5, 1, 10, 0.5, 0.6), (0.5, math.nan, 10, 0.3, 0.7),
])
def test_hit_probability_domain_errors(args):
    with pytest.raises(DomainError):
        effective_hit_probability(*args)


def test_suppressed_params_examples():
    assert suppressed_fire_params(1.0, 0.5, 2.0, 0.5) == (2.0, 0.25)
    with pytest.raises(DomainError):
        suppressed_fire_params(1.0, 0.5, 1.0, 0.5)
    with pytest.raises(DomainError):
        suppressed_fire_params(1.0, 0.5, 2.0, 1.0)


@settings(max_examples=300, deadline=None)
@given(p=st.floats(0, 1), d=st.floats(0, 100), R=st.floats(0.1, 100), a=st.floats(0, 1))
def test_hit_probability_bounded_and_monotone_in_distance(p, d, R, a):
    b = 1.0 - a
    v = effective_hit_probability(p, d, R, a, b)
    assert 0.0 <= v <= 1.0
    assert effective_hit_probability(p, d / 2, R, a, b) >= v


# -- resolve_fire --------------------------------------------------------------------

CFG = SimConfig()


def test_empty_shooter_consumes_no_draw():
    rng = FixedRng()
    out = resolve_fire(bomber(w=weapon(), ammo=0), cc(x=15, y=80), 0.0, CFG, rng)
    assert out.events == [] and not out.fired and rng.draw_counter == 0


def test_certain_hit_destroys_target():
    shooter = bomber(w=weapon(p=1.0, damage=100))
    out = resolve_fire(shooter, cc(x=10, y=80, health=100), 0.0, CFG, FixedRng(0.999))
    assert [e.kind for e in out.events] == [EventKind.FIRE, EventKind.HIT, EventKind.DESTROYED]
    assert out.target.health == 0.0
    assert out.shooter.ammo == shooter.ammo - 1


def test_tie_draw_is_a_miss():
    # p_eff = 0.8 * 0.3 = 0.24 at d = R
    shooter = bomber(w=weapon(p=0.8, R=10))
    target = cc(x=20, y=80)
    out = resolve_fire(shooter, target, 0.0, CFG, FixedRng(0.24))
    assert out.events[0].payload["p_eff"] == 0.8 * 0.3
    assert [e.kind for e in out.events] == [EventKind.FIRE, EventKind.MISS]
    assert resolve_fire(shooter, target, 0.0, CFG, FixedRng(0.2399)).hit


def test_out_of_range_and_rof_gating_are_silent():
    rng = FixedRng()
    shooter = bomber(w=weapon(R=10))
    assert resolve_fire(shooter, cc(x=20.5, y=80), 0.0, CFG, rng).events == []
    cooling = bomber(w=weapon(rof=1.0), last_fire_time=0.5)
    assert resolve_fire(cooling, cc(x=15, y=80), 1.0, CFG, rng).events == []
    assert rng.draw_counter == 0


def test_suppressed_shooter_uses_scaled_probability():
    shooter = aat(x=10, y=80, w=weapon(p=0.8, R=10), suppressed_until=5.0)
    out = resolve_fire(shooter, bomber(x=10, y=85), 0.0, CFG, FixedRng(0.9))
    fire_ev = out.events[0]
    assert fire_ev.payload["p_eff"] == fire_ev.payload["p_unsuppressed"] * 0.5
    assert fire_ev.payload["suppressed"] is True


def test_suppress_effect_sets_window_without_damage():
    f = fighter(x=100, y=85, w=weapon(p=1.0))
    target = aat(x=100, y=80, w=weapon())
    out = resolve_fire(f, target, 2.0, CFG, FixedRng(0.1), effect="suppress")
    kinds = [e.kind for e in out.events]
    assert kinds == [EventKind.FIRE, EventKind.HIT, EventKind.SUPPRESS_START]
    assert out.target.suppressed_until == 2.0 + CFG.tau_sup
    assert out.target.health == target.health


# -- step -------------------------------------------------------------------------------


def _state(*ents):
    return GlobalState(0, 0.0, tuple(ents))


def test_quiet_step_changes_nothing_and_draws_nothing():
    s = _state(bomber(), cc())
    rng = RngStream(1)
    nxt = step(s, [], [], CFG, rng)
    assert nxt.entities == s.entities
    assert nxt.tick == 1 and nxt.time == 0.1
    assert rng.draw_counter == 0 and nxt.transient_events == ()


def test_move_to_advances_speed_times_dt():
    s = _state(ent("M", RED, EntityClass.AIR_PATROL, 0, 0, speed=10), cc())
    order = AtomicAction("M", 0.0, MoveTo(Vec2(10, 0), 5))
    nxt = step(s, [], [order], CFG, RngStream(1))
    assert nxt.get("M").position == Vec2(0.5, 0.0)


def test_move_completed_on_arrival():
    s = _state(bomber(x=10, y=80), cc())
    st_ = step(s, [move("B-1", 0.0, 11, 80, 25)], [], CFG, RngStream(1))
    assert st_.get("B-1").position == Vec2(11, 80)
    assert [e.kind for e in st_.transient_events] == [EventKind.MOVE_COMPLETED]


def test_suppressed_aat_waits_the_stretched_interval():
    gun = aat(x=100, y=80, w=weapon(rof=1.0, p=0.5, R=20), last_fire_time=0.0, suppressed_until=100.0)
    s = _state(gun, bomber(x=100, y=90, speed=0), cc())
    rng = RngStream(3)
    fire_ticks = []
    for _ in range(25):
        s = step(s, [], [AtomicAction("AAT-1", s.time, Launch("W", "B-1"))], CFG, rng)
        fire_ticks += [e.tick for e in s.transient_events if e.kind is EventKind.FIRE]
    assert 10 not in fire_ticks
    assert fire_ticks[0] == 20


def test_dead_actor_orders_are_dropped():
    s = _state(bomber(health=0.0), cc())
    nxt = step(s, [move("B-1", 0.0, 50, 80, 10)], [], CFG, RngStream(1))
    assert len(nxt.dropped_actions) == 1
    assert nxt.get("B-1").position == Vec2(10, 80)


def test_positions_clamped_to_map():
    s = _state(ent("AP", RED, EntityClass.AIR_PATROL, 259.9, 10, speed=10), cc())
    order = AtomicAction("AP", 0.0, MoveTo(Vec2(260, 10), 10))
    for _ in range(3):
        s = step(s, [], [order], CFG, RngStream(1))
    assert s.get("AP").position.x <= 260.0


# -- termination -------------------------------------------------------------------------


def test_termination_precedence_and_horizon():
    scn = scenario(bomber())
    fresh = GlobalState.initial(scn)
    assert check_termination(fresh, scn).status is Status.CONTINUE
    ents = [e if e.id != "CC-01" else ent("CC-01", RED, EntityClass.COMMAND_CENTER, 250, 150, health=0.0)
            for e in scn.entities]
    ents = [ent("B-1", e.side, e.cls, 10, 80, health=0.0) if e.id == "B-1" else e for e in ents]
    both = GlobalState(5, 0.5, tuple(ents))
    assert check_termination(both, scn).status is Status.SUCCESS
    late = GlobalState(200, 20.0, scn.entities)
    t = check_termination(late, scn)
    assert (t.status, t.reason) == (Status.FAILURE, "HorizonExceeded")
    lost = GlobalState(3, 0.3, tuple(ents[:1]) + (scn.entities[1],))
    assert check_termination(lost, scn).reason == "AllFriendlyLost"


# -- rollouts -------------------------------------------------------------------------------


def _duel():
    """Bomber 90 units from the CC, closing at 2 units/tick, certain hit inside R=30."""
    b = bomber(x=10, y=80, speed=20, w=weapon("ASM", p=1.0, R=30, damage=100, cap=5))
    scn = scenario(b, cc(x=100, y=80, health=100), alpha=1.0, beta=0.0)
    actions = [move("B-1", 0.0, 100, 80, 20)] + [fire("B-1", t / 10, "CC-01", "ASM") for t in range(0, 200, 10)]
    traj = simulate_kinematics(scn, actions)
    return scn, plan(*actions, trajectories=traj)


def test_scripted_duel_succeeds_at_first_permitted_fire_tick():
    scn, p = _duel()
    rec = run_rollout(scn, p, Passive(), 1)
    # first tick with 90 - 2k <= 30 that also carries a scheduled launch (every 10 ticks)
    k = math.ceil((90 - 30) / 2)
    k = 10 * math.ceil(k / 10)
    assert k == 30
    assert rec.outcome is Status.SUCCESS
    assert rec.end_tick == k
    fires = [e for e in rec.events if e.kind is EventKind.FIRE]
    assert len(fires) == 1 and fires[0].tick == k


def test_rollout_is_deterministic_and_logs_hash():
    scn, p = _duel()
    a = run_rollout(scn, p, NoBrainOpponent(), 4)
    b = run_rollout(scn, p, NoBrainOpponent(), 4)
    assert a.log_hash == b.log_hash == event_log_hash(a.events)
    assert event_log_bytes(a.events).count(b"\n") == len(a.events)


def test_no_launch_plan_runs_out_the_clock():
    scn = scenario(bomber())
    p = plan(trajectories=simulate_kinematics(scn, []))
    rec = run_rollout(scn, p, Passive(), 1)
    assert (rec.outcome, rec.reason) == (Status.FAILURE, "HorizonExceeded")
    assert rec.ammo_spent["PlanExecuting"] == 0
    assert rec.end_tick == 200
    assert all(len(t) == rec.end_tick + 1 for t in rec.trajectories.values())


def test_trajectory_csv_shape():
    scn, p = _duel()
    rec = run_rollout(scn, p, Passive(), 1)
    lines = trajectory_csv(rec).splitlines()
    assert lines[0] == "tick,entity_id,x,y,health,suppressed"
    assert len(lines) == 1 + (rec.end_tick + 1) * len(rec.entity_ids)


def test_seed_streams_are_keyed_by_rollout_index():
    a, b, c = RngStream(SeedInfo(5, 0)), RngStream(SeedInfo(5, 0)), RngStream(SeedInfo(5, 1))
    sa = [a.uniform() for _ in range(5)]
    assert sa == [b.uniform() for _ in range(5)]
    assert sa != [c.uniform() for _ in range(5)]
    assert a.draw_counter == 5


def _skirmish(seed_layout: int):
    """Random small engagement used for the property tests."""
    r = random.Random(seed_layout)
    blue = [bomber("B-1", r.uniform(5, 40), r.uniform(20, 140), w=weapon("ASM", 0.8, 30, 1.0, 40, 4)),
            fighter("F-1", r.uniform(5, 40), r.uniform(20, 140), w=weapon("AAM", 0.7, 25, 0.8, 20, 4))]
    red = [aat("AAT-1", r.uniform(80, 200), r.uniform(20, 140), w=weapon("SAM", 0.6, 35, 0.8, 30, 10)),
           ent("AP-1", RED, EntityClass.AIR_PATROL, r.uniform(80, 200), r.uniform(20, 140), speed=20,
               health=50, w=weapon("GUN", 0.6, 15, 0.5, 20, 8),
               patrol_route=(Vec2(150, 40), Vec2(150, 120))),
           cc(x=r.uniform(200, 250), y=r.uniform(40, 120), health=80)]
    scn = scenario(*blue, *red, horizon=12.0)
    tgt = scn.core_target.position
    actions = [move("B-1", 0.0, tgt.x, tgt.y, 25), move("F-1", 0.0, tgt.x, tgt.y, 30),
               AtomicAction("F-1", 1.0, Suppress("AAT-1", 5.0))]
    actions += [fire("B-1", t / 2, "CC-01", "ASM") for t in range(2, 24)]
    actions.sort(key=lambda a: a.sort_key())
    return scn, plan(*actions, trajectories=simulate_kinematics(scn, actions))


@settings(max_examples=25, deadline=None)
@given(layout=st.integers(0, 10_000), seed=st.integers(1, 1000))
def test_rollout_invariants(layout, seed):
    scn, p = _skirmish(layout)
    rec = run_rollout(scn, p, NoBrainOpponent(), seed)
    w, h = scn.bounds
    fires = {i: 0 for i in rec.entity_ids}
    destroyed = {}
    for e in rec.events:
        if e.kind is EventKind.FIRE:
            fires[e.actor_id] += 1
        if e.kind is EventKind.DESTROYED:
            destroyed[e.actor_id] = destroyed.get(e.actor_id, 0) + 1
    for eid in rec.entity_ids:
        assert len(rec.trajectories[eid]) == rec.end_tick + 1
        assert all(0 <= x <= w and 0 <= y <= h for x, y in rec.trajectories[eid])
        hp = rec.health[eid]
        assert all(hp[t + 1] <= hp[t] for t in range(len(hp) - 1))
        assert rec.ammo[eid][0] - rec.ammo[eid][-1] == fires[eid]
    assert all(n == 1 for n in destroyed.values())
    assert rec.success == (destroyed.get(scn.core_target_id) == 1)
    assert rec.draws == sum(fires.values())
    # Hit/Miss always follows a Fire by the same pair at the same tick
    for i, e in enumerate(rec.events):
        if e.kind in (EventKind.HIT, EventKind.MISS):
            prev = rec.events[i - 1]
            assert (prev.kind, prev.tick, prev.actor_id, prev.target_id) == \
                (EventKind.FIRE, e.tick, e.actor_id, e.target_id)


@settings(max_examples=10, deadline=None)
@given(layout=st.integers(0, 10_000))
def test_suppression_window_gaps_and_probabilities(layout):
    scn, p = _skirmish(layout)
    cfg = scn.sim_config
    rec = run_rollout(scn, p, NoBrainOpponent(), 1)
    until = None
    last_fire = None
    for e in rec.events:
        if e.actor_id != "AAT-1":
            continue
        if e.kind is EventKind.SUPPRESS_START:
            until = e.payload["until"]
        elif e.kind is EventKind.SUPPRESS_END:
            until = None
        elif e.kind is EventKind.FIRE:
            if until is not None:
                assert e.payload["suppressed"]
                assert e.payload["p_eff"] == e.payload["p_unsuppressed"] * cfg.lambda_hit
                if last_fire is not None:
                    assert (e.tick - last_fire) * cfg.dt >= 0.8 * cfg.gamma_rof - cfg.dt / 2
            last_fire = e.tick
