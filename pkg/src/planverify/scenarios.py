"""Packaged scenario templates and the fixed evaluation suite.

The suite holds five variants of each difficulty template.  Variant 1 is
the template itself; variants 2..5 shift every opponent unit except the
command center by a seeded offset of at most ``JITTER`` map units per axis.
"""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources

import numpy as np

from planverify.model import Difficulty, EntityClass, Scenario, Side, Vec2
from planverify.schema import scenario_from_dict

TEMPLATES = ("easy", "difficult")
JITTER = 6.0
SUITE_SEED = 2024


def template_dict(name: str) -> dict:
    if name not in TEMPLATES:
        raise ValueError(f"unknown template {name!r}; expected one of {TEMPLATES}")
    text = resources.files("planverify.data.scenarios").joinpath(f"{name}.json").read_text("utf-8")
    return json.loads(text)


def load_template(name: str) -> Scenario:
    return scenario_from_dict(template_dict(name), f"{name}.json")


def _clamp(v: float, hi: float) -> float:
    return min(hi, max(0.0, v))


def jitter_scenario(base: Scenario, variant: int, *, seed: int = SUITE_SEED, jitter: float = JITTER) -> Scenario:
    """Deterministic variant of ``base``; ``variant`` 1 returns it unchanged (renamed)."""
    name = f"{base.name}-{variant}"
    if variant == 1:
        return replace(base, name=name)
    rng = np.random.Generator(np.random.Philox(key=[seed, variant]))
    W, H = base.bounds
    ents = []
    for e in base.entities:
        if e.side is Side.OPPONENT and e.cls is not EntityClass.COMMAND_CENTER:
            dx, dy = (float(v) for v in rng.uniform(-jitter, jitter, size=2))
            pos = Vec2(_clamp(e.position.x + dx, W), _clamp(e.position.y + dy, H))
            route = tuple(Vec2(_clamp(p.x + dx, W), _clamp(p.y + dy, H)) for p in e.patrol_route)
            if route and e.position == e.patrol_route[0]:
                pos = route[0]
            e = replace(e, position=pos, patrol_route=route)
        ents.append(e)
    return replace(base, entities=tuple(ents), name=name)


def scenario_suite(n_variants: int = 5) -> list[Scenario]:
    """The fixed evaluation suite: ``n_variants`` of each template (10 by default)."""
    out = []
    for name in TEMPLATES:
        base = load_template(name)
        out.extend(jitter_scenario(base, v) for v in range(1, n_variants + 1))
    return out


def by_difficulty(suite: list[Scenario], difficulty: Difficulty) -> list[Scenario]:
    return [s for s in suite if s.difficulty is difficulty]
