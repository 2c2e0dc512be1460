"""Opponent policies: scripted, predictive and externally served."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

from planverify.opponents.base import OpponentPolicy
from planverify.opponents.external import ExternalOpponent
from planverify.opponents.nobrain import NoBrainOpponent, nobrain_decide
from planverify.opponents.predictive import (
    PredictionSet,
    PredictiveOpponent,
    TargetPriority,
    predict_trajectories,
    predictive_decide,
    prioritize_targets,
)

ENDPOINT_ENV = "PLANVERIFY_OPPONENT_ENDPOINT"
KINDS = ("nobrain", "predictive", "external")


@dataclass(frozen=True)
class OpponentConfig:
    """Picklable description of an opponent; ``build`` makes a fresh instance per rollout."""

    kind: str = "nobrain"
    w_B: float = 2.0
    w_F: float = 1.0
    horizon_pred: int = 20
    k_history: int = 3
    endpoint: str | None = None
    timeout: float = 2.0
    history_tail: int = 20

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown opponent kind {self.kind!r}; expected one of {KINDS}")

    def build(self) -> OpponentPolicy:
        if self.kind == "nobrain":
            return NoBrainOpponent()
        if self.kind == "predictive":
            return PredictiveOpponent(self.w_B, self.w_F, self.horizon_pred, self.k_history)
        endpoint = self.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValueError(f"external opponent needs an endpoint (flag or ${ENDPOINT_ENV})")
        return ExternalOpponent(endpoint, self.timeout, self.history_tail)

    def to_dict(self) -> dict:
        return asdict(self)


__all__ = [
    "ENDPOINT_ENV", "ExternalOpponent", "KINDS", "NoBrainOpponent", "OpponentConfig", "OpponentPolicy",
    "PredictionSet", "PredictiveOpponent", "TargetPriority", "nobrain_decide",
    "predict_trajectories", "predictive_decide", "prioritize_targets",
]
