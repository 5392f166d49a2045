"""Active loop closing: find an old node worth revisiting and plan the way back.

A node qualifies when it is far enough back in the graph (index gap at
least ``tau(v) = c_tau / v``), within sensor range, and its stored heading is
close to the current one. The closing trajectory holds the target node's yaw
so the camera sees the place the way it was seen before.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .explore_graph import ExploreGraph, ExploreNode
from .min_snap import Trajectory, hold, refine_path


@dataclass
class LoopParams:
    c_tau: float = 30.0
    kappa0: float = 0.2
    kappa1: float = 0.08
    r_max: float = 6.0

    def __post_init__(self) -> None:
        if not self.c_tau > 0:
            raise ValueError("c_tau must be positive")

    def tau(self, v: float) -> float:
        return self.c_tau / v

    def kappa(self, v: float) -> float:
        return self.kappa0 + self.kappa1 * v


@dataclass
class LoopDecision:
    target: int
    likelihood: float
    trajectory: Trajectory
    terminal_yaw: float
    path: list[int]
    gap: int
    dyaw: float
    path_len: float


def wrap(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (a + math.pi) % (2 * math.pi) - math.pi


def likelihood(K: int, k: int, yaw_K: float, yaw_k: float, v_max: float, params: LoopParams) -> float:
    gate = 1.0 if abs(K - k) - params.tau(v_max) >= 0 else 0.0
    return gate * math.exp(-abs(wrap(yaw_K - yaw_k)))


def candidates(node: ExploreNode, graph: ExploreGraph, v_max: float, params: LoopParams) -> list[int]:
    """Earlier nodes within range whose likelihood beats ``kappa(v_max)``, in id order."""
    thr = params.kappa(v_max)
    K = node.id
    out = []
    if K < 2:
        return out
    dist = np.linalg.norm(graph.positions[: K - 1] - node.position, axis=1)
    for k in np.flatnonzero(dist <= params.r_max) + 1:
        other = graph.node(int(k))
        if likelihood(K, other.id, node.yaw, other.yaw, v_max, params) > thr:
            out.append(other.id)
    return out


def select(
    cands: list[int],
    node: ExploreNode,
    graph: ExploreGraph,
    v_max: float,
    params: LoopParams,
    psi_dot_max: float = 1.0,
) -> LoopDecision | None:
    """Most likely candidate (ties: larger gap, then smaller id) with a refined path to it."""
    if not cands:
        return None
    K = node.id
    scored = [
        (-likelihood(K, k, node.yaw, graph.node(k).yaw, v_max, params), -abs(K - k), k) for k in cands
    ]
    f_neg, _, k = min(scored)
    res = graph.astar(K, k)
    if res is None:
        return None
    path, cost = res
    target = graph.node(k)
    pts = [graph.node(n).position for n in path]
    # drop repeated positions so every refined edge has length
    keep = [pts[0]]
    for p in pts[1:]:
        if np.linalg.norm(p - keep[-1]) > 1e-6:
            keep.append(p)
    dyaw = wrap(target.yaw - node.yaw)
    if len(keep) == 1:
        traj = hold(keep[0], target.yaw, max(abs(dyaw) / psi_dot_max, 0.1))
    else:
        traj = refine_path(np.array(keep), v_max)
        traj.fixed_yaw = target.yaw
        traj.terminal_yaw = target.yaw
    return LoopDecision(k, -f_neg, traj, target.yaw, path, abs(K - k), dyaw, cost)
