"""Threat field and diverse lattice route search.

Routes are shortest paths on an 8-connected lattice whose edge cost is the
euclidean length scaled by ``1 + w_threat * mean endpoint threat``.  Edges
that pass within ``clearance`` of a no-fly zone are removed.  Diversity
comes from re-searching with the cost of already-extracted edges inflated
by ``rho`` (compounding until a new route appears).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from planverify.errors import Unreachable
from planverify.model import EntityClass, Intent, NoFlyZone, Scenario, Side, Vec2


@dataclass(frozen=True)
class PathfinderConfig:
    cell: float = 4.0
    w_len: float = 1.0
    w_threat: float = 50.0
    rho: float = 2.0
    clearance: float = 8.0
    max_inflations: int = 12


class ThreatField:
    """``threat(p) = sum p_base * max(0, 1 - d/R)`` over armed opponent entities."""

    def __init__(self, scenario: Scenario) -> None:
        src = [e for e in scenario.entities
               if e.side is Side.OPPONENT and e.weapon is not None and e.health > 0]
        self.centers = np.array([[e.position.x, e.position.y] for e in src], dtype=float).reshape(-1, 2)
        self.ranges = np.array([e.weapon.range_r for e in src], dtype=float)  # type: ignore[union-attr]
        self.p_base = np.array([e.weapon.p_base for e in src], dtype=float)  # type: ignore[union-attr]

    def many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if not len(self.ranges):
            return np.zeros(len(pts))
        d = np.hypot(pts[:, None, 0] - self.centers[None, :, 0], pts[:, None, 1] - self.centers[None, :, 1])
        return (self.p_base * np.maximum(0.0, 1.0 - d / self.ranges)).sum(axis=1)

    def __call__(self, x: float | Vec2, y: float | None = None) -> float:
        if isinstance(x, Vec2):
            x, y = x.x, x.y
        return float(self.many(np.array([[x, y]]))[0])


def threat_field(scenario: Scenario) -> ThreatField:
    return ThreatField(scenario)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def segment_point_distance(ax: float, ay: float, bx: float, by: float, px: float, py: float) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(ax + t * dx - px, ay + t * dy - py)


def segment_clear(a: Vec2, b: Vec2, zones: Sequence[NoFlyZone], clearance: float = 0.0) -> bool:
    return all(
        segment_point_distance(a.x, a.y, b.x, b.y, z.center.x, z.center.y) >= z.radius + clearance
        for z in zones
    )


def polyline_length(pts: Sequence[Vec2]) -> float:
    return sum(p.dist(q) for p, q in zip(pts, pts[1:]))


def densify(pts: Sequence[Vec2], spacing: float) -> list[Vec2]:
    """Points along the polyline no further apart than ``spacing`` (endpoints included)."""
    out = [pts[0]]
    for p, q in zip(pts, pts[1:]):
        n = max(1, math.ceil(p.dist(q) / spacing))
        for k in range(1, n + 1):
            t = k / n
            out.append(Vec2(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t))
    return out


def route_exposure(field: ThreatField, pts: Sequence[Vec2], step: float) -> float:
    """Trapezoid-rule line integral of the threat field along the polyline."""
    total = 0.0
    for p, q in zip(pts, pts[1:]):
        L = p.dist(q)
        n = max(1, math.ceil(L / step))
        ts = np.linspace(0.0, 1.0, n + 1)
        samples = np.column_stack([p.x + (q.x - p.x) * ts, p.y + (q.y - p.y) * ts])
        vals = field.many(samples)
        total += float(np.sum((vals[:-1] + vals[1:]) * 0.5) * (L / n))
    return total


def simplify(pts: Sequence[Vec2]) -> tuple[Vec2, ...]:
    """Drop repeated points and interior points collinear with both neighbours."""
    out: list[Vec2] = []
    for p in pts:
        if out and out[-1] == p:
            continue
        while len(out) >= 2:
            a, b = out[-2], out[-1]
            cross = (b.x - a.x) * (p.y - b.y) - (b.y - a.y) * (p.x - b.x)
            dot = (b.x - a.x) * (p.x - b.x) + (b.y - a.y) * (p.y - b.y)
            if abs(cross) < 1e-9 and dot > 0:
                out.pop()
            else:
                break
        out.append(p)
    return tuple(out)


# ---------------------------------------------------------------------------
# routes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RouteSkeleton:
    route_id: str
    waypoints: tuple[Vec2, ...]
    length: float
    threat_exposure: float
    score_R: float
    w_len: float = 1.0
    w_threat: float = 50.0

    def recompute_score(self) -> float:
        return -self.w_len * self.length - self.w_threat * self.threat_exposure


def make_route(route_id: str, pts: Sequence[Vec2], field: ThreatField, cfg: PathfinderConfig) -> RouteSkeleton:
    pts = simplify(pts)
    length = polyline_length(pts)
    exposure = route_exposure(field, pts, cfg.cell)
    return RouteSkeleton(route_id, pts, length, exposure,
                         -cfg.w_len * length - cfg.w_threat * exposure, cfg.w_len, cfg.w_threat)


class RouteList(list):
    """Routes found by a search; ``partial`` marks an early stop on an unreachable re-search."""

    partial: bool = False


_STEPS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


@dataclass
class Lattice:
    scenario: Scenario
    cfg: PathfinderConfig = field(default_factory=PathfinderConfig)

    def __post_init__(self) -> None:
        c = self.cfg.cell
        self.nx = int(math.floor(self.scenario.map_width / c)) + 1
        self.ny = int(math.floor(self.scenario.map_height / c)) + 1
        self.zones = tuple(self.scenario.constraint_set.no_fly_zones)
        xs = np.arange(self.nx) * c
        ys = np.arange(self.ny) * c
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        self.field = ThreatField(self.scenario)
        self.threat = self.field.many(np.column_stack([gx.ravel(), gy.ravel()])).reshape(self.nx, self.ny)
        self.node_ok = np.ones((self.nx, self.ny), dtype=bool)
        for z in self.zones:
            d = np.hypot(gx - z.center.x, gy - z.center.y)
            self.node_ok &= d >= z.radius + self.cfg.clearance
        self._edge_ok: dict[tuple[int, int, int, int], bool] = {}

    def point(self, i: int, j: int) -> Vec2:
        return Vec2(i * self.cfg.cell, j * self.cfg.cell)

    def nearest_node(self, p: Vec2) -> tuple[int, int]:
        """Closest admissible lattice node to ``p``."""
        c = self.cfg.cell
        i0 = min(self.nx - 1, max(0, round(p.x / c)))
        j0 = min(self.ny - 1, max(0, round(p.y / c)))
        if self.node_ok[i0, j0]:
            return (i0, j0)
        ok = np.argwhere(self.node_ok)
        if not len(ok):
            raise Unreachable("no admissible lattice node")
        d = np.hypot(ok[:, 0] * c - p.x, ok[:, 1] * c - p.y)
        i, j = ok[int(np.argmin(d))]
        return (int(i), int(j))

    def edge_ok(self, i: int, j: int, k: int, m: int) -> bool:
        key = (i, j, k, m) if (i, j) <= (k, m) else (k, m, i, j)
        ok = self._edge_ok.get(key)
        if ok is None:
            ok = segment_clear(self.point(i, j), self.point(k, m), self.zones, self.cfg.clearance)
            self._edge_ok[key] = ok
        return ok

    def search(self, start: tuple[int, int], goal: tuple[int, int], w_threat: float,
               inflation: dict[tuple[int, int, int, int], float] | None = None) -> list[tuple[int, int]]:
        """Dijkstra from ``start`` to ``goal``; raises Unreachable."""
        inflation = inflation or {}
        c = self.cfg.cell
        threat = self.threat
        dist = {start: 0.0}
        prev: dict[tuple[int, int], tuple[int, int]] = {}
        heap = [(0.0, start)]
        done = set()
        while heap:
            d, node = heapq.heappop(heap)
            if node in done:
                continue
            if node == goal:
                break
            done.add(node)
            i, j = node
            for di, dj in _STEPS:
                k, m = i + di, j + dj
                if not (0 <= k < self.nx and 0 <= m < self.ny) or not self.node_ok[k, m]:
                    continue
                if (k, m) in done:
                    continue
                if self.zones and not self.edge_ok(i, j, k, m):
                    continue
                length = c * (1.4142135623730951 if di and dj else 1.0)
                cost = length * (1.0 + w_threat * 0.5 * (threat[i, j] + threat[k, m]))
                if inflation:
                    key = (i, j, k, m) if (i, j) <= (k, m) else (k, m, i, j)
                    cost *= inflation.get(key, 1.0)
                nd = d + cost
                if nd < dist.get((k, m), math.inf):
                    dist[(k, m)] = nd
                    prev[(k, m)] = node
                    heapq.heappush(heap, (nd, (k, m)))
        if goal not in dist:
            raise Unreachable(f"no lattice path from {start} to {goal}")
        path = [goal]
        while path[-1] != start:
            path.append(prev[path[-1]])
        return path[::-1]


def route_endpoints(scenario: Scenario) -> tuple[Vec2, Vec2]:
    """Start = centroid of live bombers (or all plan-executing entities); goal = core target."""
    movers = [e for e in scenario.blue if e.cls is EntityClass.BOMBER and e.health > 0] or scenario.blue
    if not movers:
        raise Unreachable("no plan-executing entities")
    sx = sum(e.position.x for e in movers) / len(movers)
    sy = sum(e.position.y for e in movers) / len(movers)
    return Vec2(sx, sy), scenario.core_target.position


def lattice_path(scenario: Scenario, start: Vec2, goal: Vec2, *, w_threat: float = 0.0,
                 cfg: PathfinderConfig | None = None, lattice: Lattice | None = None) -> tuple[Vec2, ...]:
    """Shortest admissible polyline from ``start`` to ``goal`` (straight if unobstructed)."""
    cfg = cfg or PathfinderConfig()
    zones = scenario.constraint_set.no_fly_zones
    if w_threat == 0.0 and segment_clear(start, goal, zones, cfg.clearance):
        return (start, goal)
    lat = lattice or Lattice(scenario, cfg)
    nodes = lat.search(lat.nearest_node(start), lat.nearest_node(goal), w_threat)
    pts = [lat.point(*n) for n in nodes]
    return simplify([start, *pts, goal]) if segment_clear(start, pts[0], zones) and segment_clear(pts[-1], goal, zones) else simplify(pts)


def pathfinder_topk(intent: Intent | None, scenario: Scenario, K: int,
                    cfg: PathfinderConfig | None = None) -> RouteList:
    """Up to ``K`` diverse routes to the core target, best ``score_R`` first."""
    if K < 1:
        raise ValueError("K must be >= 1")
    cfg = cfg or PathfinderConfig()
    lat = Lattice(scenario, cfg)
    start, goal = route_endpoints(scenario)
    s_node, g_node = lat.nearest_node(start), lat.nearest_node(goal)
    inflation: dict[tuple[int, int, int, int], float] = {}
    found: list[tuple[Vec2, ...]] = []
    out = RouteList()
    for _ in range(K):
        pts = None
        for _attempt in range(cfg.max_inflations + 1):
            try:
                nodes = lat.search(s_node, g_node, cfg.w_threat, inflation)
            except Unreachable:
                if not found:
                    raise
                out.partial = True
                break
            cand = simplify([lat.point(*n) for n in nodes])
            for a, b in zip(nodes, nodes[1:]):
                key = (*a, *b) if a <= b else (*b, *a)
                inflation[key] = inflation.get(key, 1.0) * cfg.rho
            if cand not in found:
                pts = cand
                break
        if pts is None:
            out.partial = True
            break
        found.append(pts)
    routes = [make_route(f"route-{k + 1}", pts, lat.field, cfg) for k, pts in enumerate(found)]
    routes.sort(key=lambda r: (-r.score_R, r.route_id))
    out.extend(routes)
    return out
