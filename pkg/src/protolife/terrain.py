"""Procedural rock formations: clusters of edge-glued equilateral triangles.

Formations grow from a seed triangle by reflecting a triangle across one of
its free edges. Everything lands on one triangular lattice per formation,
so two triangles overlap only if their centroids coincide.

Passages stay wide: triangles of different formations keep at least
``min_corridor`` apart. Inside one formation, two triangles closer than that
must have rock between them (the midpoint of their closest approach is
covered), so a growing chain may bend back on itself only far enough to
leave a full-width gap. Formation sizes come from a heavy-tailed draw,
giving a mix of lone boulders, snaking chains and part-closed rings.
"""

from __future__ import annotations

import math

from .config import RngStream, SimConfig
from .physics import closest_point_on_segment, point_in_triangle

Tri = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

VERTEX_EPS = 1e-6


def _centroid(t: Tri) -> tuple[float, float]:
    return (t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0


def triangle_distance(t: Tri, u: Tri) -> float:
    """Distance between two non-overlapping triangles (0 if they touch)."""
    return closest_points(t, u)[0]


def closest_points(t: Tri, u: Tri) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """(distance, point on t, point on u) of closest approach for disjoint triangles."""
    best = (math.inf, (0.0, 0.0), (0.0, 0.0))
    for a, b, flip in ((t, u, False), (u, t, True)):
        for px, py in a:
            for i in range(3):
                qx, qy = closest_point_on_segment(px, py, *b[i], *b[(i + 1) % 3])
                d = math.hypot(px - qx, py - qy)
                if d < best[0]:
                    best = (d, (qx, qy), (px, py)) if flip else (d, (px, py), (qx, qy))
    return best


def closest_pairs(t: Tri, u: Tri, tol: float = 1e-9) -> tuple[float, list]:
    """Minimum distance and every vertex/edge pair attaining it (parallel edges tie)."""
    pairs = []
    for a, b, flip in ((t, u, False), (u, t, True)):
        for px, py in a:
            for i in range(3):
                qx, qy = closest_point_on_segment(px, py, *b[i], *b[(i + 1) % 3])
                pq = ((qx, qy), (px, py)) if flip else ((px, py), (qx, qy))
                pairs.append((math.hypot(px - qx, py - qy), pq))
    d = min(p[0] for p in pairs)
    return d, [pq for dist, pq in pairs if dist <= d + tol]


def covered(x: float, y: float, tris: list[Tri]) -> bool:
    return any(point_in_triangle(x, y, t) for t in tris)


def narrow_gap(t: Tri, u: Tri, solid: list[Tri], min_corridor: float) -> bool:
    """True if t and u leave an open passage narrower than ``min_corridor``."""
    d, pairs = closest_pairs(t, u)
    if d >= min_corridor or d < VERTEX_EPS:
        return False
    return any(not covered((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, solid) for p, q in pairs)


def _reflect(t: Tri, edge: int) -> Tri:
    a, b = t[edge], t[(edge + 1) % 3]
    c = t[(edge + 2) % 3]
    mx, my = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return (a, b, (2.0 * mx - c[0], 2.0 * my - c[1]))


def _formation_size(rng: RngStream, cfg: SimConfig) -> int:
    lo, hi = cfg.formation_triangles_min, cfg.formation_triangles_max
    # Pareto(alpha=1.5) tail over [lo, hi]
    u = rng.random()
    x = lo / (1.0 - u) ** (1.0 / 1.5)
    return int(min(hi, math.floor(x)))


def _fits(tri: Tri, mine: list[Tri], others: list[Tri], limit: float, cfg: SimConfig) -> bool:
    if any(math.hypot(*p) > limit for p in tri):
        return False
    c = _centroid(tri)
    solid = mine + [tri]
    for u in mine:
        uc = _centroid(u)
        if math.hypot(c[0] - uc[0], c[1] - uc[1]) < 1e-6 * cfg.rock_edge:
            return False
        if narrow_gap(tri, u, solid, cfg.min_corridor):
            return False
    for u in others:
        if triangle_distance(tri, u) < cfg.min_corridor:
            return False
    return True


def generate_environment(rng: RngStream, cfg: SimConfig) -> list[list[Tri]]:
    """Rock formations inside the arena, as a list of triangle lists."""
    if cfg.world_radius <= 0:
        raise ValueError("world_radius must be positive")
    edge = cfg.rock_edge
    limit = cfg.world_radius - edge
    formations: list[list[Tri]] = []
    placed: list[Tri] = []
    if limit <= edge:
        return formations
    for _ in range(cfg.n_formations):
        target = _formation_size(rng, cfg)
        for _attempt in range(20):
            r = limit * math.sqrt(rng.random())
            phi = rng.uniform(0.0, 2.0 * math.pi)
            cx, cy = r * math.cos(phi), r * math.sin(phi)
            rot = rng.uniform(0.0, 2.0 * math.pi / 3.0)
            circ = edge / math.sqrt(3.0)
            seed = tuple((cx + circ * math.cos(rot + k * 2.0 * math.pi / 3.0),
                          cy + circ * math.sin(rot + k * 2.0 * math.pi / 3.0)) for k in range(3))
            if _fits(seed, [], placed, limit, cfg):
                break
        else:
            continue
        mine = [seed]
        tries = 0
        while len(mine) < target and tries < 40 * target:
            tries += 1
            base = mine[rng.integers(0, len(mine))]
            cand = _reflect(base, rng.integers(0, 3))
            if _fits(cand, mine, placed, limit, cfg):
                mine.append(cand)
        formations.append(mine)
        placed.extend(mine)
    return formations
