"""Monte-Carlo verification, metrics, static rubric and reporting."""

from __future__ import annotations

from planverify.harness.metrics import (
    MetricWeights,
    ProcessMetrics,
    compute_ade,
    compute_cla,
    compute_msr,
    compute_pqs,
    phi_norm,
    process_metrics,
    success_aggregates,
    suppression_rate_outcome,
)
from planverify.harness.report import VerificationReport, rank_and_report, render_rank_table
from planverify.harness.rubric import StaticScore, static_score
from planverify.harness.verify import VerifyResult, monte_carlo_verify

__all__ = [
    "MetricWeights", "ProcessMetrics", "StaticScore", "VerificationReport", "VerifyResult",
    "compute_ade", "compute_cla", "compute_msr", "compute_pqs", "monte_carlo_verify", "phi_norm",
    "process_metrics", "rank_and_report", "render_rank_table", "static_score", "success_aggregates",
    "suppression_rate_outcome",
]
