"""Flight graph of visited states, A* over it, and the frontier-cluster global planner."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .voxel_map import FrontierCluster, VoxelMap


@dataclass
class ExploreNode:
    id: int
    position: NDArray[np.float64]
    yaw: float
    created_at: float
    drift: NDArray[np.float64] = field(default_factory=lambda: np.zeros(4))  # dx, dy, dz, dyaw


@dataclass
class GlobalPlan:
    path: list[int]  # node ids, current node first
    target_cluster_id: int
    gain: float
    l_tot: float
    target_point: NDArray[np.float64]  # frontier cell the pairing node looks at
    centroid: NDArray[np.float64]
    size: int


def global_gain(size: float, l_tot: float, zeta: float) -> float:
    return size * math.exp(-zeta * l_tot)


class ExploreGraph:
    def __init__(self) -> None:
        self.nodes: list[ExploreNode] = []
        self.adj: dict[int, dict[int, float]] = {}
        self._pos = np.zeros((0, 3))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, k: int) -> ExploreNode:
        return self.nodes[k - 1]

    @property
    def positions(self) -> NDArray[np.float64]:
        """Node positions in id order, shape ``(K, 3)``."""
        return self._pos

    def n_edges(self) -> int:
        return sum(len(v) for v in self.adj.values()) // 2

    def edges(self) -> list[tuple[int, int, float]]:
        return [(a, b, w) for a in sorted(self.adj) for b, w in sorted(self.adj[a].items()) if a < b]

    def _append(self, position: ArrayLike, yaw: float, t: float, drift: ArrayLike | None) -> int:
        k = len(self.nodes) + 1
        p = np.asarray(position, dtype=np.float64).copy()
        d = np.zeros(4) if drift is None else np.asarray(drift, dtype=np.float64).copy()
        self.nodes.append(ExploreNode(k, p, float(yaw), float(t), d))
        self.adj[k] = {}
        self._pos = np.vstack([self._pos, p])
        return k

    def link(self, a: int, b: int, weight: float | None = None) -> None:
        """Connect two nodes; the weight defaults to (and must not undercut) their distance."""
        d = float(np.linalg.norm(self.node(a).position - self.node(b).position))
        w = d if weight is None else float(weight)
        if w < d - 1e-9:
            raise ValueError("edge weight below endpoint distance breaks the A* heuristic")
        self.adj[a][b] = w
        self.adj[b][a] = w

    def unlink(self, a: int, b: int) -> None:
        self.adj[a].pop(b, None)
        self.adj[b].pop(a, None)

    def add_node(
        self,
        position: ArrayLike,
        yaw: float,
        t: float,
        vmap: VoxelMap,
        r_max: float,
        drift: ArrayLike | None = None,
        depart_floor: float | None = None,
    ) -> int:
        """Append a node and connect it to every earlier node closer than ``r_max`` in free line.

        By default an edge must pass :meth:`VoxelMap.is_segment_free`. With
        ``depart_floor`` the finer :meth:`VoxelMap.moves_free` test is used,
        which tolerates endpoints that sit slightly inside the inflation band.
        """
        k = self._append(position, yaw, t, drift)
        if k == 1:
            return k
        p = self._pos[-1]
        dist = np.linalg.norm(self._pos[:-1] - p, axis=1)
        near = np.flatnonzero(dist < r_max)
        if near.size == 0:
            return k
        if depart_floor is not None:
            ok = vmap.moves_free(p, self._pos[near], depart_floor)
            for q in near[ok]:
                self.link(k, int(q) + 1)
            return k
        # batch the segment samples of every candidate into one map query
        chunks, owner = [], []
        for q in near:
            s = vmap.segment_samples(p, self._pos[q])
            chunks.append(s)
            owner.append(np.full(len(s), q))
        ok = vmap.points_free(np.concatenate(chunks))
        owner = np.concatenate(owner)
        blocked = set(owner[~ok].tolist())
        for q in near:
            if q not in blocked:
                self.link(k, int(q) + 1)
        return k

    def astar(self, src: int, dst: int) -> tuple[list[int], float] | None:
        """Shortest path by summed edge length, Euclidean heuristic; ties go to the smaller id."""
        goal = self.node(dst).position
        h = lambda n: float(np.linalg.norm(self.node(n).position - goal))  # noqa: E731
        g = {src: 0.0}
        parent = {src: src}
        heap = [(h(src), src)]
        closed: set[int] = set()
        while heap:
            _, u = heapq.heappop(heap)
            if u in closed:
                continue
            if u == dst:
                path = [u]
                while path[-1] != src:
                    path.append(parent[path[-1]])
                return path[::-1], g[u]
            closed.add(u)
            for v, w in self.adj[u].items():
                if v in closed:
                    continue
                nd = g[u] + w
                if nd < g.get(v, math.inf):
                    g[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd + h(v), v))
        return None

    def path_costs(self, src: int) -> dict[int, float]:
        """Single-source shortest path lengths to every reachable node."""
        dist = {src: 0.0}
        heap = [(0.0, src)]
        done: set[int] = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "x": n.position[0], "y": n.position[1], "z": n.position[2], "yaw": n.yaw, "t": n.created_at}
                for n in self.nodes
            ],
            "edges": [{"a": a, "b": b, "len": w} for a, b, w in self.edges()],
        }

    def export_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def cluster_target(
    vmap: VoxelMap, cluster: FrontierCluster, banned: set[int] | None = None
) -> tuple[int, NDArray[np.float64]] | None:
    """Member cell nearest the centroid (the centroid itself may sit in unknown space).

    Cells in ``banned`` are passed over; None when every member is banned.
    """
    cells = cluster.cells
    if banned:
        cells = cells[~np.isin(cells, np.fromiter(banned, dtype=np.int64, count=len(banned)))]
        if cells.size == 0:
            return None
    centers = vmap.cell_center(cells)
    k = int(np.argmin(np.linalg.norm(centers - cluster.centroid, axis=1)))
    return int(cells[k]), centers[k]


def pairing_node(graph: ExploreGraph, vmap: VoxelMap, target: ArrayLike) -> int | None:
    """Closest node with a clear line of sight to ``target``; ties go to the smaller id."""
    if len(graph) == 0:
        return None
    target = np.asarray(target, dtype=np.float64)
    pos = graph.positions
    dist = np.linalg.norm(pos - target, axis=1)
    order = np.argsort(dist, kind="stable")
    # the same samples as VoxelMap.segment_samples, nearest nodes first, one map query per chunk
    n = np.ceil(dist / (0.5 * vmap.resolution)).astype(np.int64) + 1
    for lo in range(0, len(order), 32):
        chunk = order[lo : lo + 32]
        counts = n[chunk]
        owner = np.repeat(np.arange(len(chunk)), counts)
        i = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        last = counts[owner] - 1
        s = np.where(last > 0, i * (1.0 / np.maximum(last, 1)), 0.0)
        s[(i == last) & (last > 0)] = 1.0
        a = pos[chunk][owner]
        ok = vmap.points_free(a + s[:, None] * (target - a), inflation=0.0)
        blocked = np.zeros(len(chunk), dtype=bool)
        np.logical_or.at(blocked, owner, ~ok)
        free = np.flatnonzero(~blocked)
        if free.size:
            return int(chunk[free[0]]) + 1
    return None


def paired_target(
    graph: ExploreGraph, vmap: VoxelMap, cluster: FrontierCluster, banned: set[int] | None = None
) -> tuple[int, NDArray[np.float64], int] | None:
    """Member cell nearest the centroid that some node can see, with that node.

    Falls back along the members in order of centroid distance, so a cluster
    whose central cell hides behind an obstacle is still reachable.
    """
    cells = cluster.cells
    if banned:
        cells = cells[~np.isin(cells, np.fromiter(banned, dtype=np.int64, count=len(banned)))]
    centers = vmap.cell_center(cells)
    order = np.argsort(np.linalg.norm(centers - cluster.centroid, axis=1), kind="stable")
    for k in order:
        nw = pairing_node(graph, vmap, centers[k])
        if nw is not None:
            return int(cells[k]), centers[k], nw
    return None


def plan_global(
    graph: ExploreGraph,
    clusters: Iterable[FrontierCluster],
    vmap: VoxelMap,
    zeta: float,
    current: int,
    banned: set[int] | None = None,
) -> GlobalPlan | None:
    """Pick the cluster maximizing ``S * exp(-zeta * l_tot)`` over reachable pairings.

    ``l_tot`` is the graph distance to the pairing node plus the straight hop
    from it to the cluster's target cell. Ties favor the larger cluster, then
    the smaller cluster id. Cells in ``banned`` are never targeted.
    """
    costs = graph.path_costs(current)
    best: tuple | None = None
    for c in clusters:
        picked = paired_target(graph, vmap, c, banned)
        if picked is None or picked[2] not in costs:
            continue
        cell, target, nw = picked
        l_tot = costs[nw] + float(np.linalg.norm(graph.node(nw).position - target))
        gain = global_gain(c.size, l_tot, zeta)
        key = (-gain, -c.size, c.id)
        if best is None or key < best[0]:
            best = (key, c, nw, l_tot, gain, target)
    if best is None:
        return None
    _, c, nw, l_tot, gain, target = best
    path, _ = graph.astar(current, nw)
    return GlobalPlan(path, c.id, gain, l_tot, target, np.asarray(c.centroid), c.size)


def abort_global(frontier_new: ArrayLike, next_segment_free: bool) -> bool:
    """Leave global navigation when something new is in view or the path ahead is blocked."""
    return np.asarray(frontier_new).size > 0 or not next_segment_free
