"""Hierarchical plan generation: pathfinder, analyst, planner and validator."""

from __future__ import annotations

from planverify.mpha.analyst import AssessmentVector, analyst_assess, draft_plan
from planverify.mpha.pathfinder import (
    PathfinderConfig,
    RouteSkeleton,
    ThreatField,
    pathfinder_topk,
    threat_field,
)
from planverify.mpha.pipeline import ABLATIONS, GeneratorConfig, generate_candidates
from planverify.mpha.planner import PlannerConfig, planner_compose, v_global
from planverify.mpha.validator import CODES, Violation, repair_plan, validate_and_repair, validator_check

__all__ = [
    "ABLATIONS", "AssessmentVector", "CODES", "GeneratorConfig", "PathfinderConfig", "PlannerConfig",
    "RouteSkeleton", "ThreatField", "Violation", "analyst_assess", "draft_plan", "generate_candidates",
    "pathfinder_topk", "planner_compose", "repair_plan", "threat_field", "v_global",
    "validate_and_repair", "validator_check",
]
