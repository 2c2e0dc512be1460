"""Seeded Monte-Carlo execution of a plan against an opponent configuration."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from planverify.engine import RolloutRecord, run_rollout
from planverify.errors import EmptyInput, OpponentFault
from planverify.model import CandidatePlan, Scenario
from planverify.opponents import OpponentConfig
from planverify.rng import SeedInfo
from planverify.schema import scenario_digest


@dataclass
class VerifyResult:
    """Completed rollouts (sorted by seed) plus the seeds whose opponent faulted."""

    records: list[RolloutRecord] = field(default_factory=list)
    faults: list[tuple[int, str]] = field(default_factory=list)

    @property
    def fault_count(self) -> int:
        return len(self.faults)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _one(args: tuple[Scenario, CandidatePlan, OpponentConfig, int, str]) -> tuple[int, RolloutRecord | str]:
    scenario, plan, opponent, seed, digest = args
    policy = opponent.build()
    try:
        return seed, run_rollout(scenario, plan, policy, SeedInfo(seed, 0), scenario_digest=digest)
    except OpponentFault as exc:
        return seed, f"{type(exc).__name__}: {exc}"
    finally:
        close = getattr(policy, "close", None)
        if close is not None:
            close()


def monte_carlo_verify(plan: CandidatePlan, scenario: Scenario, opponent: OpponentConfig | None = None,
                       seeds: Iterable[int] | None = None, *, workers: int = 1) -> VerifyResult:
    """One rollout per seed; results are independent of worker count and completion order."""
    opponent = opponent or OpponentConfig()
    seed_list: Sequence[int] = tuple(seeds) if seeds is not None else scenario.sim_config.seed_list
    if not seed_list:
        raise EmptyInput("seed list is empty")
    digest = scenario_digest(scenario)
    jobs = [(scenario, plan, opponent, s, digest) for s in seed_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_one(j) for j in jobs]
    out = VerifyResult()
    for seed, res in sorted(results, key=lambda r: r[0]):
        if isinstance(res, str):
            out.faults.append((seed, res))
        else:
            out.records.append(res)
    return out
