"""Trajectory-prediction datasets and the entity-value-weighted NLL reference.

Serialized state format, one entity per line, fixed width::

    00042 B-1             57.500        80.000     100.00   6 -

``tick`` (5 digits), ``entity_id`` (left-justified, 8 wide), ``x`` and ``y``
(13.3f), ``health`` (10.2f), ``ammo`` (3 wide) and one flag character:
``D`` destroyed, ``S`` suppressed, ``-`` neither.  History lines cover the
window; target lines cover the horizon.  Each target line is one token and
its owner is the entity on that line, so annotations are positional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from planverify import canonical
from planverify.engine import RolloutRecord
from planverify.errors import (
    DomainError,
    InsufficientLength,
    LengthMismatch,
    NonPositiveProbability,
    ShapeMismatch,
    UnannotatedToken,
)
from planverify.model import ValueClass

DATASET_FILE = "dataset.jsonl"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class EvaConfig:
    """Token weights.  Equal weights are allowed so the unweighted loss is reachable."""

    w_B: float = 2.0
    w_F: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.w_B) and math.isfinite(self.w_F)):
            raise DomainError("EVA weights must be finite")
        if not self.w_B >= self.w_F > 0:
            raise DomainError(f"EVA weights need w_B >= w_F > 0, got ({self.w_B}, {self.w_F})")


@dataclass(frozen=True)
class DatasetConfig:
    window: int = 20
    horizon: int = 10
    stride: int = 10

    def __post_init__(self) -> None:
        if self.window < 1 or self.horizon < 1 or self.stride < 1:
            raise DomainError("window, horizon and stride must be positive")

    def to_dict(self) -> dict:
        return {"window": self.window, "horizon": self.horizon, "stride": self.stride}


@dataclass(frozen=True)
class TokenAnnotation:
    entity_id: str
    value_class: str


@dataclass(frozen=True)
class PredictionSample:
    sample_id: str
    source_hash: str
    cut_tick: int
    entity_ids: tuple[str, ...]
    history: str
    target: str
    target_positions: tuple[tuple[tuple[float, float], ...], ...]  # [tick][entity]
    annotations: tuple[TokenAnnotation, ...]

    @property
    def n_tokens(self) -> int:
        return len(self.annotations)

    def target_array(self) -> np.ndarray:
        return np.asarray(self.target_positions, dtype=float).reshape(
            len(self.target_positions), len(self.entity_ids), 2)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id, "source_hash": self.source_hash,
            "cut_tick": self.cut_tick, "entity_ids": list(self.entity_ids),
            "history": self.history, "target": self.target,
            "target_positions": [[list(p) for p in row] for row in self.target_positions],
            "annotations": [{"entity_id": a.entity_id, "value_class": a.value_class}
                            for a in self.annotations],
        }


@dataclass
class DatasetBuild:
    samples: list[PredictionSample]
    skipped: list[dict] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)


def state_line(tick: int, eid: str, x: float, y: float, health: float, ammo: int,
               suppressed: bool) -> str:
    flag = "D" if health <= 0 else ("S" if suppressed else "-")
    return f"{tick:05d} {eid:<8s} {x:13.3f} {y:13.3f} {health:10.2f} {ammo:3d} {flag}"


def _lines(record: RolloutRecord, ticks: range) -> list[str]:
    return [state_line(t, eid, *record.trajectories[eid][t], record.health[eid][t],
                       record.ammo[eid][t], record.suppressed[eid][t])
            for t in ticks for eid in record.entity_ids]


def cut_points(n_snapshots: int, cfg: DatasetConfig) -> range:
    """Start ticks of every window+horizon slice that fits in the snapshot range."""
    need = cfg.window + cfg.horizon
    if n_snapshots < need:
        return range(0)
    return range(0, n_snapshots - need + 1, cfg.stride)


def samples_for_record(record: RolloutRecord, cfg: DatasetConfig) -> list[PredictionSample]:
    n = record.end_tick + 1
    starts = cut_points(n, cfg)
    if not starts:
        raise InsufficientLength(
            f"rollout {record.log_hash[:12]} has {n} snapshots, needs {cfg.window + cfg.horizon}")
    ids = tuple(record.entity_ids)
    annotations = tuple(TokenAnnotation(eid, record.value_classes[eid])
                        for _ in range(cfg.horizon) for eid in ids)
    out = []
    for s in starts:
        cut = s + cfg.window
        hist = range(s, cut)
        tgt = range(cut, cut + cfg.horizon)
        out.append(PredictionSample(
            sample_id=f"{record.log_hash[:16]}-{cut:05d}",
            source_hash=record.log_hash, cut_tick=cut, entity_ids=ids,
            history="\n".join(_lines(record, hist)),
            target="\n".join(_lines(record, tgt)),
            target_positions=tuple(tuple(tuple(record.trajectories[e][t]) for e in ids) for t in tgt),
            annotations=annotations,
        ))
    return out


def build_prediction_dataset(records: Iterable[RolloutRecord],
                             config: DatasetConfig | None = None) -> DatasetBuild:
    """Slide a window+horizon cut over each record; too-short records are skipped and reported."""
    cfg = config or DatasetConfig()
    build = DatasetBuild(samples=[])
    for rec in records:
        try:
            build.samples.extend(samples_for_record(rec, cfg))
        except InsufficientLength as exc:
            build.skipped.append({"source_hash": rec.log_hash, "end_tick": rec.end_tick,
                                  "reason": str(exc)})
    return build


def write_dataset(build: DatasetBuild, out_dir: str | Path, config: DatasetConfig,
                  eva: EvaConfig | None = None, extra: dict[str, Any] | None = None) -> list[Path]:
    """Write ``dataset.jsonl`` and ``manifest.json``; both are byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = canonical.jsonl_bytes([s.to_dict() for s in build.samples])
    eva = eva or EvaConfig()
    manifest = {
        "config": config.to_dict(),
        "eva": {"w_B": eva.w_B, "w_F": eva.w_F},
        "n_samples": len(build.samples),
        "skipped": build.skipped,
        "sources": sorted({s.source_hash for s in build.samples}),
        "dataset_sha256": canonical.sha256_hex(data),
        **(extra or {}),
    }
    paths = [out / DATASET_FILE, out / MANIFEST_FILE]
    paths[0].write_bytes(data)
    paths[1].write_bytes(canonical.dump_bytes(manifest) + b"\n")
    return paths


# -- EVA weighting ---------------------------------------------------------------


def eva_token_weights(sample: PredictionSample, config: EvaConfig) -> np.ndarray:
    """w_B for tokens owned by HighValue entities, w_F otherwise."""
    n_lines = len(sample.target.splitlines()) if sample.target else 0
    if len(sample.annotations) != n_lines:
        raise UnannotatedToken(
            f"{sample.sample_id}: {n_lines} target tokens but {len(sample.annotations)} annotations")
    weights = np.empty(len(sample.annotations))
    for j, ann in enumerate(sample.annotations):
        if ann.value_class == ValueClass.HIGH_VALUE.value:
            weights[j] = config.w_B
        elif ann.value_class == ValueClass.ORDINARY.value:
            weights[j] = config.w_F
        else:
            raise UnannotatedToken(f"{sample.sample_id}: token {j} has value class {ann.value_class!r}")
    return weights


def weighted_nll_from_weights(weights: Sequence[float], token_log_probs: Sequence[float]) -> float:
    """-(1/|Y|) * sum_j w_j log p_j.  Normalized by token count, not by weight sum."""
    w = np.asarray(weights, dtype=float)
    lp = np.asarray(token_log_probs, dtype=float)
    if w.shape != lp.shape or lp.ndim != 1:
        raise LengthMismatch(f"{lp.size} log-probs for {w.size} tokens")
    if lp.size == 0:
        raise LengthMismatch("sample has no target tokens")
    if np.isnan(lp).any() or np.isneginf(lp).any():
        raise NonPositiveProbability("token probability must be > 0")
    if (lp > 0).any():
        raise DomainError("token log-probability above 0 (probability > 1)")
    return float(-np.dot(w, lp) / lp.size)


def weighted_nll(sample: PredictionSample, token_log_probs: Sequence[float],
                 config: EvaConfig) -> float:
    return weighted_nll_from_weights(eva_token_weights(sample, config), token_log_probs)


def batch_weighted_nll(samples: Sequence[PredictionSample],
                       log_probs: Sequence[Sequence[float]], config: EvaConfig) -> float:
    """Mean of the per-sample losses over the batch."""
    if len(samples) != len(log_probs):
        raise LengthMismatch(f"{len(log_probs)} log-prob rows for {len(samples)} samples")
    if not samples:
        raise LengthMismatch("empty batch")
    return float(np.mean([weighted_nll(s, lp, config) for s, lp in zip(samples, log_probs)]))


# -- predictor evaluation ------------------------------------------------------------


def eval_predictor(predictions: Sequence[Any], samples: Sequence[PredictionSample]) -> tuple[float, float]:
    """ADE over all predicted positions; FDE as the per-sample mean final-tick displacement."""
    if len(predictions) != len(samples):
        raise ShapeMismatch(f"{len(predictions)} predictions for {len(samples)} samples")
    if not samples:
        raise ShapeMismatch("no samples")
    all_d: list[np.ndarray] = []
    finals = []
    for pred, s in zip(predictions, samples):
        target = s.target_array()
        p = np.asarray(pred, dtype=float)
        if p.shape != target.shape:
            raise ShapeMismatch(f"{s.sample_id}: prediction shape {p.shape} != target {target.shape}")
        d = np.linalg.norm(p - target, axis=-1)
        all_d.append(d.ravel())
        finals.append(float(d[-1].mean()))
    return float(np.concatenate(all_d).mean()), float(np.mean(finals))
