"""Scripted scenes shared by unit and acceptance tests."""

from __future__ import annotations

import math

import numpy as np

from real_explore.explore_graph import ExploreGraph
from real_explore.voxel_map import VoxelMap


def square_loop(side=5.0, step=0.5, extra=3, r_max=6.0):
    """Walk counter-clockwise around a square once, then a few steps past the start.

    Node yaw follows the direction of travel. Returns the graph and the open
    map it was built in.
    """
    vmap = VoxelMap((0, 0, 0), (40, 40, 10), resolution=0.3)
    vmap.cells[:] = 1
    origin = np.array([3.0, 3.0, 1.5])
    corners = [np.array(c, dtype=float) for c in ([0, 0, 0], [side, 0, 0], [side, side, 0], [0, side, 0])]
    g = ExploreGraph()
    pts, yaws = [], []
    n_side = int(round(side / step))
    for s in range(4):
        a, b = corners[s], corners[(s + 1) % 4]
        yaw = math.atan2(b[1] - a[1], b[0] - a[0])
        for q in range(n_side):
            pts.append(a + (b - a) * q / n_side)
            yaws.append(yaw)
    for q in range(extra):
        pts.append(np.array([step * q, 0.0, 0.0]) + np.array([0.0, 0.25, 0.0]))
        yaws.append(0.0)
    for k, (p, y) in enumerate(zip(pts, yaws)):
        g.add_node(origin + p, y, float(k), vmap, r_max)
    return g, vmap


def random_scan(rng, vmap, n_rays=40, max_range=6.0):
    upper = vmap.upper
    pos = vmap.origin + rng.uniform(0.05, 0.95, 3) * (upper - vmap.origin)
    yaw = rng.uniform(-math.pi, math.pi)
    d = rng.normal(size=(n_rays, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(0.2, max_range, n_rays)
    miss = rng.random(n_rays) < 0.3
    r[miss] = max_range
    return pos, yaw, d * r[:, None], max_range


def open_fan_map(dims=(40, 40, 20)):
    vmap = VoxelMap((0, 0, 0), dims, resolution=0.3)
    vmap.cells[:] = 1
    return vmap


def cluttered_map(rng, n_blocks=12):
    vmap = open_fan_map()
    for _ in range(n_blocks):
        c = rng.integers(4, 36, 3)
        c[2] = rng.integers(2, 18)
        s = rng.integers(1, 4, 3)
        vmap.cells[c[0] : c[0] + s[0], c[1] : c[1] + s[1], c[2] : c[2] + s[2]] = 2
    # keep the vehicle's own neighborhood clear
    vmap.cells[17:23, 17:23, 7:13] = 1
    return vmap


def random_graph(rng, n, p_edge=0.15):
    """Random positions; edges weighted at distance times a factor >= 1."""
    g = ExploreGraph()
    pts = rng.uniform(0, 10, (n, 3))
    for k in range(n):
        g._append(pts[k], 0.0, float(k), None)
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            if rng.random() < p_edge:
                d = float(np.linalg.norm(pts[a - 1] - pts[b - 1]))
                g.link(a, b, d * rng.choice([1.0, rng.uniform(1.0, 2.0)]))
    return g
