"""Seeded random streams for rollouts.

Each stream is a Philox4x64-10 counter-based generator (numpy's
implementation) keyed by ``(base_seed, rollout_index)``.  The draw sequence
depends only on the key, never on the worker that runs the rollout, and
the global ``random``/``numpy.random`` state is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALGORITHM_ID = "philox4x64-10"


@dataclass(frozen=True)
class SeedInfo:
    base_seed: int
    rollout_index: int = 0
    algorithm_id: str = ALGORITHM_ID

    def to_dict(self) -> dict:
        return {"base_seed": self.base_seed, "rollout_index": self.rollout_index,
                "algorithm_id": self.algorithm_id}


class RngStream:
    """Uniform [0, 1) draws with an auditable draw counter."""

    __slots__ = ("seed", "draw_counter", "_gen")

    def __init__(self, seed: SeedInfo | int, rollout_index: int = 0) -> None:
        if isinstance(seed, int):
            seed = SeedInfo(seed, rollout_index)
        if seed.algorithm_id != ALGORITHM_ID:
            raise ValueError(f"unsupported generator {seed.algorithm_id!r}")
        self.seed = seed
        self.draw_counter = 0
        key = np.array([seed.base_seed % 2**64, seed.rollout_index % 2**64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def algorithm_id(self) -> str:
        return self.seed.algorithm_id

    @property
    def base_seed(self) -> int:
        return self.seed.base_seed

    @property
    def rollout_index(self) -> int:
        return self.seed.rollout_index

    def uniform(self) -> float:
        self.draw_counter += 1
        return float(self._gen.random())
