"""Trajectory overlays (planned vs simulated vs opponent) as SVG plus CSV."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from planverify.engine import RolloutRecord, trajectory_csv
from planverify.model import CandidatePlan, Scenario, Side

SCALE = 4.0
COLORS = {"planned": "#1f77b4", "simulated": "#2ca02c", "opponent": "#d62728", "zone": "#999999"}


def _polyline(pts, height: float, color: str, dash: str = "") -> str:
    coords = " ".join(f"{x * SCALE:.2f},{(height - y) * SCALE:.2f}" for x, y in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'


def trajectory_svg(scenario: Scenario, plan: CandidatePlan, record: RolloutRecord) -> str:
    W, H = scenario.bounds
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * SCALE:.0f}" height="{H * SCALE:.0f}" '
             f'viewBox="0 0 {W * SCALE:.0f} {H * SCALE:.0f}">',
             '<rect width="100%" height="100%" fill="white" stroke="black"/>']
    for z in scenario.constraint_set.no_fly_zones:
        parts.append(f'<circle cx="{z.center.x * SCALE:.2f}" cy="{(H - z.center.y) * SCALE:.2f}" '
                     f'r="{z.radius * SCALE:.2f}" fill="{COLORS["zone"]}" fill-opacity="0.3"/>')
    for eid in record.entity_ids:
        side = record.sides[eid]
        if side is Side.PLAN_EXECUTING:
            if eid in plan.planned_trajectories:
                parts.append(_polyline(plan.planned_trajectories[eid][: record.end_tick + 1], H,
                                       COLORS["planned"], "4,3"))
            parts.append(_polyline(record.trajectories[eid], H, COLORS["simulated"]))
        else:
            parts.append(_polyline(record.trajectories[eid], H, COLORS["opponent"]))
        x, y = record.trajectories[eid][-1]
        parts.append(f'<text x="{x * SCALE + 3:.2f}" y="{(H - y) * SCALE - 3:.2f}" font-size="10">'
                     f'{escape(eid)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_plot(out_dir: str | Path, scenario: Scenario, plan: CandidatePlan,
               record: RolloutRecord) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{plan.plan_id}_seed{record.seed.base_seed}"
    svg = out / f"{stem}.svg"
    csv = out / f"{stem}.csv"
    svg.write_text(trajectory_svg(scenario, plan, record), encoding="utf-8")
    csv.write_text(trajectory_csv(record), encoding="utf-8")
    return [svg, csv]
