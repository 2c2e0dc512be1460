from __future__ import annotations

import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import BLUE, RED, bomber, ent, move, plan, scenario, weapon
from planverify import canonical
from planverify.errors import InvariantError, ParseError, SchemaError
from planverify.model import EntityClass, Intent, ValueClass, Vec2, WeaponSpec
from planverify.scenarios import TEMPLATES, load_template, scenario_suite, template_dict
from planverify.schema import (
    ActionBeyondHorizon,
    ActionsUnsorted,
    IncompleteTrajectory,
    MissingTrajectory,
    UnknownActor,
    load_plan,
    load_scenario,
    parse_seed_list,
    plan_from_dict,
    plan_to_dict,
    save_plan,
    scenario_digest,
    scenario_from_dict,
    scenario_to_dict,
    validate_plan_shape,
)

MINIMAL = {
    "core_target_id": "CC",
    "entities": [
        {"id": "CC", "side": "Opponent", "class": "CommandCenter", "position": [200, 80],
         "speed_max": 0, "health": 100},
        {"id": "B-1", "side": "PlanExecuting", "class": "Bomber", "position": [10, 80],
         "speed_max": 20, "health": 100},
    ],
}


def write(tmp_path, doc) -> str:
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_minimal_file_gets_protocol_defaults(tmp_path):
    s = load_scenario(write(tmp_path, MINIMAL))
    assert s.sim_config.dt == 0.1
    assert s.sim_config.horizon == 20.0
    assert s.sim_config.mc_repetitions == 100
    assert s.sim_config.seed_list == tuple(range(1, 101))
    assert (s.map_width, s.map_height) == (260.0, 160.0)


def test_alpha_beta_must_sum_to_one(tmp_path):
    doc = dict(MINIMAL, sim_config={"alpha": 0.5, "beta": 0.6})
    with pytest.raises(InvariantError, match="alpha\\+beta must equal 1") as exc:
        load_scenario(write(tmp_path, doc))
    assert "sim_config" in exc.value.path


def test_zero_command_centers_rejected(tmp_path):
    doc = dict(MINIMAL, entities=MINIMAL["entities"][1:], core_target_id="B-1")
    with pytest.raises(InvariantError, match="exactly one CommandCenter"):
        load_scenario(write(tmp_path, doc))


def test_two_command_centers_rejected(tmp_path):
    second = dict(MINIMAL["entities"][0], id="CC2")
    doc = dict(MINIMAL, entities=MINIMAL["entities"] + [second])
    with pytest.raises(InvariantError, match="exactly one CommandCenter"):
        load_scenario(write(tmp_path, doc))


def test_malformed_json_is_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(str(p))


def test_missing_and_unknown_fields_are_schema_errors(tmp_path):
    with pytest.raises(SchemaError, match="core_target_id"):
        load_scenario(write(tmp_path, {"entities": MINIMAL["entities"]}))
    with pytest.raises(SchemaError) as exc:
        load_scenario(write(tmp_path, dict(MINIMAL, colour="red")))
    assert "colour" in str(exc.value)


def test_error_path_names_offending_entity(tmp_path):
    ents = [dict(MINIMAL["entities"][0]), dict(MINIMAL["entities"][1], position=[300, 80])]
    with pytest.raises(InvariantError) as exc:
        load_scenario(write(tmp_path, dict(MINIMAL, entities=ents)))
    assert "entities[1]" in exc.value.path


def test_value_class_default_mapping_and_override():
    assert bomber().value_class is ValueClass.HIGH_VALUE
    assert ent("F", BLUE, EntityClass.FIGHTER, 0, 0).value_class is ValueClass.ORDINARY
    assert ent("C", RED, EntityClass.COMMAND_CENTER, 0, 0).value_class is ValueClass.HIGH_VALUE
    over = ent("F", BLUE, EntityClass.FIGHTER, 0, 0, value_class=ValueClass.HIGH_VALUE)
    assert over.value_class is ValueClass.HIGH_VALUE


def test_entity_and_weapon_invariants():
    with pytest.raises(InvariantError):
        WeaponSpec("W", 1.2, 10, 1, 1, 1)
    with pytest.raises(InvariantError):
        WeaponSpec("W", 0.5, 0, 1, 1, 1)
    with pytest.raises(InvariantError):
        WeaponSpec("W", 0.5, 10, 0, 1, 1)
    with pytest.raises(InvariantError):
        ent("X", BLUE, EntityClass.BOMBER, 0, 0, w=weapon(cap=2), ammo=3)
    with pytest.raises(InvariantError):
        ent("X", BLUE, EntityClass.BOMBER, 0, 0, ammo=1)
    with pytest.raises(InvariantError):
        Vec2(math.nan, 0)
    with pytest.raises(InvariantError):
        ent("X", BLUE, EntityClass.BOMBER, 0, 0, health=-1)


def test_intent_invariants():
    with pytest.raises(InvariantError):
        Intent("CC", priority_weights=(0, 0, 0))
    with pytest.raises(InvariantError):
        Intent("CC", priority_weights=(1, -1, 0))


def test_horizon_must_be_whole_ticks():
    with pytest.raises(InvariantError):
        scenario(bomber(), horizon=20.05)


@pytest.mark.parametrize("name", TEMPLATES)
def test_template_round_trip_is_canonical(name, tmp_path):
    s = load_template(name)
    again = scenario_from_dict(json.loads(canonical.dumps(scenario_to_dict(s))))
    assert again == s
    assert [e.id for e in again.entities] == [e.id for e in s.entities]
    assert scenario_digest(again) == scenario_digest(s)
    p = tmp_path / "t.json"
    p.write_text(json.dumps(template_dict(name)))
    assert load_scenario(str(p)) == s


def test_suite_has_ten_distinct_scenarios():
    suite = scenario_suite()
    assert len(suite) == 10
    assert len({scenario_digest(s) for s in suite}) == 10
    assert replace(suite[0], name="easy") == load_template("easy")


def test_canonical_floats_use_17_significant_digits():
    assert canonical.dumps({"b": 0.1, "a": 1}) == '{"a":1,"b":0.10000000000000001}'
    assert canonical.dumps([1.0, -2.5]) == "[1.0,-2.5]"


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_canonical_float_round_trips_exactly(x):
    assert json.loads(canonical.dumps(x)) == x


def test_seed_list_forms():
    assert parse_seed_list("1..100") == tuple(range(1, 101))
    assert parse_seed_list([3, 1]) == (3, 1)
    assert parse_seed_list("4,2,9") == (4, 2, 9)
    assert parse_seed_list("7") == (7,)
    with pytest.raises(SchemaError):
        parse_seed_list("1,1")
    with pytest.raises(SchemaError):
        parse_seed_list("5..1")
    with pytest.raises(SchemaError):
        parse_seed_list("1-5")


def _full_traj(s, *ids):
    n = s.sim_config.horizon_ticks + 1
    return {i: tuple((0.0, 0.0) for _ in range(n)) for i in ids}


def test_validate_plan_shape_examples():
    s = scenario(bomber())
    good = plan(move("B-1", 0.0, 50, 80, 20), trajectories=_full_traj(s, "B-1"))
    assert validate_plan_shape(good, s) == []

    unknown = plan(move("B-99", 0.0, 50, 80, 20), trajectories=_full_traj(s, "B-1"))
    assert validate_plan_shape(unknown, s) == [UnknownActor("B-99")]

    late = plan(move("B-1", 25.0, 50, 80, 20), trajectories=_full_traj(s, "B-1"))
    assert validate_plan_shape(late, s) == [ActionBeyondHorizon("B-1", 25.0, s.sim_config.horizon)]


def test_validate_plan_shape_order_and_trajectories():
    s = scenario(bomber(), bomber("B-2", y=90))
    p = plan(move("B-1", 2.0, 50, 80, 20), move("B-1", 1.0, 60, 80, 20),
             trajectories={"B-1": ((0.0, 0.0),)})
    defects = validate_plan_shape(p, s)
    assert ActionsUnsorted(1) in defects
    assert IncompleteTrajectory("B-1", 1, 201) in defects
    assert MissingTrajectory("B-2") in defects


def test_plan_file_round_trip(tmp_path):
    s = scenario(bomber())
    p = plan(move("B-1", 0.0, 50, 80, 20), trajectories=_full_traj(s, "B-1"), plan_id="x")
    path = tmp_path / "plan.json"
    save_plan(p, path)
    assert load_plan(path) == p
    assert plan_from_dict(plan_to_dict(p)) == p
    doc = json.loads(path.read_text())
    assert set(doc) >= {"plan_id", "actions", "trajectories"}
