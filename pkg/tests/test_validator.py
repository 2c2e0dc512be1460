from __future__ import annotations

import pytest

from builders import aat, bomber, cc, fighter, fire, move, plan, scenario, weapon
from planverify.errors import IrreparableViolation
from planverify.model import AtomicAction, Intent, Suppress
from planverify.mpha import generate_candidates
from planverify.mpha.validator import (
    CODES,
    Violation,
    repair_plan,
    validate_and_repair,
    validator_check,
    violation_counts,
)
from planverify.scenarios import load_template

GUN = weapon("W", p=0.9, R=30, rof=1.0, damage=50, cap=4)


def field_scene(**constraints):
    """Two bombers well outside range of a CC at (100, 80); a zone sits on B-1's straight line."""
    return scenario(bomber("B-1", 10, 80, w=GUN), bomber("B-2", 10, 100, w=GUN),
                    fighter("F-1", 10, 60), aat("AAT-1", 60, 140), cc(100, 80),
                    zones=[((50, 80), 10)], constraints=constraints)


def strike_scene(**constraints):
    """Both bombers start inside launch range (d=25) of the CC."""
    return scenario(bomber("B-1", 75, 80, w=GUN), bomber("B-2", 100, 55, w=GUN), cc(100, 80),
                    constraints=constraints)


def suppress(actor, t, target, duration):
    return AtomicAction(actor, t, Suppress(target, duration))


def as_tuples(vs):
    return [(v.code, v.actor_id, round(v.t, 9), round(v.detail, 9)) for v in vs]


# Each entry: name, scenario, plan, expected (code, actor, t, detail) list in validator order.
# Tick of an action is max(1, round(t/dt)); bombers move 2.0 per tick at speed 20.
CORPUS = [
    ("disorder", field_scene(),
     plan(move("B-1", 1.0, 20, 80, 10), move("B-2", 0.5, 20, 100, 10)),
     [("TimestampDisorder", "B-2", 0.5, 0.5)]),
    ("commanded-speed", field_scene(),
     plan(move("B-2", 0.0, 40, 100, 40)),
     [("SpeedExceeded", "B-2", 0.0, 15.0)]),
    ("class-speed-limit", field_scene(speed_limits={"Bomber": 20.0}),
     plan(move("B-2", 0.0, 40, 100, 25)),
     [("SpeedExceeded", "B-2", 0.0, 5.0)]),
    # x(t) = 10 + 2t; first segment within 10 of (50, 80) is 40->42 at tick 16; deepest at the centre
    ("no-fly", field_scene(),
     plan(move("B-1", 0.0, 90, 80, 20)),
     [("NoFlyIncursion", "B-1", 1.6, 10.0)]),
    ("late-move", field_scene(),
     plan(move("B-2", 25.0, 20, 100, 10)),
     [("DurationExceeded", "B-2", 25.0, 5.0)]),
    ("long-suppress", field_scene(),
     plan(suppress("F-1", 18.0, "AAT-1", 5.0)),
     [("DurationExceeded", "F-1", 18.0, 3.0)]),
    ("out-of-range", field_scene(),
     plan(fire("B-1", 0.1, "CC-01")),
     [("OutOfRangeLaunch", "B-1", 0.1, 60.0)]),
    ("standoff", strike_scene(launch_standoff=20.0),
     plan(fire("B-1", 0.1, "CC-01")),
     [("OutOfRangeLaunch", "B-1", 0.1, 5.0)]),
    ("ammo-budget", strike_scene(ammo_budget={"B-1": 2}),
     plan(fire("B-1", 0.1, "CC-01"), fire("B-1", 1.1, "CC-01"), fire("B-1", 2.1, "CC-01")),
     [("AmmoExceeded", "B-1", 0.0, 1.0)]),
    ("salvo", strike_scene(max_launches_per_tick=1),
     plan(fire("B-1", 0.1, "CC-01"), fire("B-2", 0.1, "CC-01")),
     [("SalvoLimit", "B-2", 0.1, 1.0)]),
    # the engine caps at speed_max 25, so x(t) = 10 + 2.5t and tick 13 is the first inside
    ("speed-and-no-fly", field_scene(),
     plan(move("B-1", 0.0, 90, 80, 30)),
     [("SpeedExceeded", "B-1", 0.0, 5.0), ("NoFlyIncursion", "B-1", 1.3, 10.0)]),
    ("range-ammo-salvo", strike_scene(ammo_budget={"B-2": 0}, max_launches_per_tick=1),
     plan(fire("B-1", 0.1, "CC-01"), fire("B-2", 0.1, "CC-01"), fire("B-2", 30.0, "CC-01")),
     [("DurationExceeded", "B-2", 30.0, 10.0), ("AmmoExceeded", "B-2", 0.0, 2.0),
      ("SalvoLimit", "B-2", 0.1, 1.0)]),
]


def test_corpus_covers_every_code():
    seen = {code for *_, expected in CORPUS for code, *_ in expected}
    assert seen == set(CODES)
    assert len(CORPUS) == 12


@pytest.mark.parametrize("name, s, p, expected", CORPUS, ids=[c[0] for c in CORPUS])
def test_broken_plan_yields_expected_violations(name, s, p, expected):
    assert as_tuples(validator_check(p, s)) == expected


@pytest.mark.parametrize("name, s, p, expected", CORPUS, ids=[c[0] for c in CORPUS])
def test_repair_converges_or_gives_up(name, s, p, expected):
    try:
        out = validate_and_repair(p, s, r_max=3)
    except IrreparableViolation:
        return
    assert out.iterations <= 3
    assert validator_check(out.plan, s) == []
    counts = [violation_counts(h) for h in out.history]
    assert all(b < a for a, b in zip(counts, counts[1:]))


def test_clean_plan_has_no_violations_and_needs_no_repair():
    s = strike_scene()
    p = plan(fire("B-1", 0.1, "CC-01"), fire("B-2", 0.2, "CC-01"), fire("B-1", 1.1, "CC-01"))
    assert validator_check(p, s) == []
    out = validate_and_repair(p, s)
    assert out.iterations == 0 and out.plan is p


def test_specific_repairs():
    s = field_scene()
    detoured = validate_and_repair(plan(move("B-1", 0.0, 90, 80, 20)), s).plan
    moves = [a for a in detoured.actions if a.actor_id == "B-1"]
    assert len(moves) == 2 and moves[-1].order.waypoint.as_tuple() == (90.0, 80.0)

    slowed = validate_and_repair(plan(move("B-2", 0.0, 40, 100, 40)), s).plan
    assert slowed.actions[0].order.speed == 25.0

    spread = validate_and_repair(plan(fire("B-1", 0.1, "CC-01"), fire("B-2", 0.1, "CC-01")),
                                 strike_scene(max_launches_per_tick=1)).plan
    assert sorted(a.t_start for a in spread.actions) == [0.1, 0.2]


def test_waypoint_inside_zone_is_irreparable():
    s = field_scene()
    with pytest.raises(IrreparableViolation, match="inside a no-fly zone"):
        validate_and_repair(plan(move("B-1", 0.0, 50, 80, 20)), s)


def test_zero_iteration_budget_raises_on_any_violation():
    s = field_scene()
    with pytest.raises(IrreparableViolation):
        validate_and_repair(plan(fire("B-1", 0.1, "CC-01")), s, r_max=0)


def test_repair_requires_violations_and_known_codes():
    with pytest.raises(ValueError):
        repair_plan(plan(), [], field_scene())
    with pytest.raises(ValueError):
        Violation("Bogus", "B-1", 0.0, 0.0)


@pytest.mark.parametrize("template", ["easy", "difficult"])
@pytest.mark.parametrize("ablate", [None, "single", "no_pf", "no_an", "no_pl"])
def test_generated_candidates_pass_validator(template, ablate):
    s = load_template(template)
    for p in generate_candidates(Intent(s.core_target_id), s, 2, ablate=ablate):
        assert validator_check(p, s) == []
