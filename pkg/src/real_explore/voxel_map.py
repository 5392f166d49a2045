"""Fixed-resolution occupancy grid with frontier bookkeeping.

Cells live on a dense ``(nx, ny, nz)`` array addressed either by integer
triples or by flat (C-order) indices. Every cell is Unknown, Free or
Occupied. A frontier cell is a Free cell with at least one Unknown face
neighbor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from ._kernels import carve_kernel, traverse_kernel


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class PoseOutOfBounds(ValueError):
    pass


class PointOutOfBounds(ValueError):
    pass


_FACE_OFFSETS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.int64,
)
_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)
_CUBE_STRUCT = np.ones((3, 3, 3), dtype=bool)


@dataclass
class FrontierCluster:
    id: int
    cells: NDArray[np.int64]  # flat indices, sorted
    centroid: NDArray[np.float64]
    size: int


def traverse_segments(
    starts: NDArray[np.float64], ends: NDArray[np.float64]
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Cells crossed by segments, in grid units (cell ``c`` spans ``[c, c+1)``).

    Computes every grid-plane crossing of each segment, sorts them and takes
    the cell holding the midpoint of each non-empty interval. The result is
    the exact voxel traversal; zero-length intervals (corner touches) are
    skipped.

    Returns:
        ``(ray_id, cells)`` where ``cells`` is ``(m, 3)`` integer coordinates
        and ``ray_id`` the segment each row belongs to. Rows of one segment
        are ordered from start to end.
    """
    starts = np.ascontiguousarray(np.atleast_2d(np.asarray(starts, dtype=np.float64)))
    ends = np.ascontiguousarray(np.atleast_2d(np.asarray(ends, dtype=np.float64)))
    if starts.shape[0] == 0:
        return np.zeros(0, np.int64), np.zeros((0, 3), np.int64)
    lo = np.floor(np.minimum(starts, ends))
    span = int(np.max(np.floor(np.maximum(starts, ends)) - lo)) + 1
    return traverse_kernel(starts, ends, span)


class VoxelMap:
    """Dense occupancy grid over a bounded box.

    Args:
        origin: world coordinates of the minimum corner.
        dims: number of cells along x, y, z.
        resolution: cell edge length in meters.
        inflation_radius: clearance used by :meth:`is_segment_free`.
        occupied_persistence: if True a Free pass-through never demotes an
            Occupied cell; by default the latest scan wins.
    """

    def __init__(
        self,
        origin: ArrayLike,
        dims: tuple[int, int, int],
        resolution: float = 0.3,
        inflation_radius: float = 0.3,
        occupied_persistence: bool = False,
    ) -> None:
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {dims}")
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        self.dims = dims
        self.resolution = float(resolution)
        self.inflation_radius = float(inflation_radius)
        self.occupied_persistence = occupied_persistence
        self.cells = np.zeros(dims, dtype=np.uint8)
        self.frontier = np.zeros(dims, dtype=bool)  # F_map as a mask
        self.frontier_new = np.zeros(0, dtype=np.int64)
        self._scratch: NDArray[np.uint8] | None = None

    @classmethod
    def from_bounds(cls, lo: ArrayLike, hi: ArrayLike, resolution: float = 0.3, **kw) -> VoxelMap:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        dims = tuple(int(math.ceil(e / resolution - 1e-9)) for e in hi - lo)
        return cls(lo, dims, resolution, **kw)

    # -- geometry ---------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return int(self.cells.size)

    @property
    def upper(self) -> NDArray[np.float64]:
        return self.origin + np.asarray(self.dims) * self.resolution

    def contains(self, p: ArrayLike) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.origin) and np.all(p < self.upper))

    def to_grid(self, pts: ArrayLike) -> NDArray[np.float64]:
        """World points to continuous grid coordinates."""
        return (np.asarray(pts, dtype=np.float64) - self.origin) / self.resolution

    def cell_of(self, pts: ArrayLike) -> NDArray[np.int64]:
        return np.floor(self.to_grid(pts)).astype(np.int64)

    def in_grid(self, ijk: NDArray[np.int64]) -> NDArray[np.bool_]:
        ijk = np.asarray(ijk)
        return np.all((ijk >= 0) & (ijk < np.asarray(self.dims)), axis=-1)

    def flat(self, ijk: ArrayLike) -> NDArray[np.int64]:
        ijk = np.asarray(ijk, dtype=np.int64)
        return np.ravel_multi_index(tuple(np.moveaxis(ijk, -1, 0)), self.dims)

    def unflat(self, idx: ArrayLike) -> NDArray[np.int64]:
        return np.stack(np.unravel_index(np.asarray(idx, dtype=np.int64), self.dims), axis=-1)

    def cell_center(self, idx: ArrayLike) -> NDArray[np.float64]:
        """Centers of flat-indexed cells."""
        return self.origin + (self.unflat(idx) + 0.5) * self.resolution

    # -- queries ----------------------------------------------------------

    def state_at(self, p: ArrayLike) -> CellState:
        p = np.asarray(p, dtype=np.float64)
        if not self.contains(p):
            raise PointOutOfBounds(f"{p} outside map bounds")
        i, j, k = self.cell_of(p)
        return CellState(int(self.cells[i, j, k]))

    def coverage_stats(self) -> tuple[int, int, int]:
        counts = np.bincount(self.cells.ravel(), minlength=3)
        return int(counts[0]), int(counts[1]), int(counts[2])

    def known_count(self) -> int:
        return self.n_cells - int(np.count_nonzero(self.cells == CellState.UNKNOWN))

    def frontier_map(self) -> NDArray[np.int64]:
        """Flat indices of F_map, sorted."""
        return np.flatnonzero(self.frontier)

    def points_free(self, pts: ArrayLike, inflation: float | None = None) -> NDArray[np.bool_]:
        """Per point: every cell within ``inflation`` of it is Free.

        A cell counts when the open ball of radius ``inflation`` meets its
        box; with ``inflation == 0`` only the containing cell is checked.
        Cells outside the grid are never free.
        """
        r = self.inflation_radius if inflation is None else float(inflation)
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] == 0:
            return np.ones(0, dtype=bool)
        g = self.to_grid(pts)
        base = np.floor(g).astype(np.int64)
        dims = np.asarray(self.dims)
        if r <= 0.0:
            ok = np.all((base >= 0) & (base < dims), axis=1)
            out = np.zeros(len(pts), dtype=bool)
            b = base[ok]
            out[ok] = self.cells[b[:, 0], b[:, 1], b[:, 2]] == CellState.FREE
            return out
        rc = r / self.resolution
        K = int(math.ceil(rc))
        offs = np.arange(-K, K + 1)
        # distance (in cells) from each point to the slab of cell base+o along each axis
        cell_lo = base[:, :, None] + offs[None, None, :]
        d = np.maximum(np.maximum(cell_lo - g[:, :, None], g[:, :, None] - (cell_lo + 1)), 0.0)
        d2 = d[:, 0, :, None, None] ** 2 + d[:, 1, None, :, None] ** 2 + d[:, 2, None, None, :] ** 2
        touch = d2 < rc * rc
        ci = cell_lo[:, 0, :, None, None]
        cj = cell_lo[:, 1, None, :, None]
        ck = cell_lo[:, 2, None, None, :]
        inside = (
            (ci >= 0) & (ci < dims[0]) & (cj >= 0) & (cj < dims[1]) & (ck >= 0) & (ck < dims[2])
        )
        cells = self.cells
        state = cells[
            np.clip(ci, 0, dims[0] - 1), np.clip(cj, 0, dims[1] - 1), np.clip(ck, 0, dims[2] - 1)
        ]
        bad = touch & ~(inside & (state == CellState.FREE))
        return ~bad.reshape(len(pts), -1).any(axis=1)

    def clearance(self, pts: ArrayLike, cap: float) -> NDArray[np.float64]:
        """Distance from each point to the nearest non-free cell (or the grid edge), capped at ``cap``.

        ``points_free(p, r)`` holds exactly when ``clearance(p, cap) >= r`` for any ``cap >= r``.
        """
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        g = self.to_grid(pts)
        base = np.floor(g).astype(np.int64)
        dims = np.asarray(self.dims)
        rc = cap / self.resolution
        K = max(int(math.ceil(rc)), 1)
        offs = np.arange(-K, K + 1)
        cell_lo = base[:, :, None] + offs[None, None, :]
        d = np.maximum(np.maximum(cell_lo - g[:, :, None], g[:, :, None] - (cell_lo + 1)), 0.0)
        d2 = d[:, 0, :, None, None] ** 2 + d[:, 1, None, :, None] ** 2 + d[:, 2, None, None, :] ** 2
        ci = cell_lo[:, 0, :, None, None]
        cj = cell_lo[:, 1, None, :, None]
        ck = cell_lo[:, 2, None, None, :]
        inside = (ci >= 0) & (ci < dims[0]) & (cj >= 0) & (cj < dims[1]) & (ck >= 0) & (ck < dims[2])
        state = self.cells[
            np.clip(ci, 0, dims[0] - 1), np.clip(cj, 0, dims[1] - 1), np.clip(ck, 0, dims[2] - 1)
        ]
        bad = ~(inside & (state == CellState.FREE))
        d2 = np.where(bad, d2, np.inf).reshape(len(pts), -1).min(axis=1)
        return np.minimum(np.sqrt(d2) * self.resolution, cap)

    def nearest_blocked(self, p: ArrayLike, cap: float) -> NDArray[np.float64] | None:
        """Closest point of the nearest non-free cell (or grid edge) within ``cap`` of ``p``."""
        p = np.asarray(p, dtype=np.float64).reshape(3)
        g = self.to_grid(p[None])[0]
        base = np.floor(g).astype(np.int64)
        K = max(int(math.ceil(cap / self.resolution)), 1)
        offs = np.arange(-K, K + 1)
        lo = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1).reshape(-1, 3) + base
        inside = self.in_grid(lo)
        state = np.full(len(lo), CellState.OCCUPIED)
        state[inside] = self.cells[lo[inside, 0], lo[inside, 1], lo[inside, 2]]
        lo = lo[state != CellState.FREE]
        if len(lo) == 0:
            return None
        near = np.clip(g, lo, lo + 1)
        d2 = ((near - g) ** 2).sum(axis=1)
        k = int(np.argmin(d2))
        if math.sqrt(d2[k]) * self.resolution > cap:
            return None
        return self.origin + near[k] * self.resolution

    def moves_free(
        self,
        a: ArrayLike,
        targets: ArrayLike,
        floor: float,
        inflation: float | None = None,
        zone: float | None = None,
    ) -> NDArray[np.bool_]:
        """Straight moves from ``a`` to each target, sampled at a quarter cell.

        Samples need ``inflation`` clearance, except within ``zone`` (one cell
        by default) of an endpoint, where the endpoint's own clearance clipped
        to ``[floor, inflation]`` is enough. This lets a vehicle that stopped
        slightly inside the inflation band leave it without ever accepting
        less than ``floor`` at a sample.
        """
        r = self.inflation_radius if inflation is None else float(inflation)
        zone = self.resolution if zone is None else float(zone)
        a = np.asarray(a, dtype=np.float64).reshape(3)
        targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
        if targets.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        ends = np.vstack([a[None], targets])
        need_end = np.clip(self.clearance(ends, r), floor, r)
        chunks, owner, req = [], [], []
        for q, b in enumerate(targets):
            n = int(math.ceil(np.linalg.norm(b - a) / (0.25 * self.resolution))) + 1
            s = np.linspace(0.0, 1.0, max(n, 2))[:, None]
            pts = a + s * (b - a)
            need = np.full(len(pts), r)
            da = np.linalg.norm(pts - a, axis=1)
            db = np.linalg.norm(pts - b, axis=1)
            need = np.where(da <= zone, np.minimum(need, need_end[0]), need)
            need = np.where(db <= zone, np.minimum(need, need_end[q + 1]), need)
            chunks.append(pts)
            owner.append(np.full(len(pts), q))
            req.append(need)
        pts = np.concatenate(chunks)
        ok = self.clearance(pts, r) >= np.concatenate(req)
        out = np.ones(targets.shape[0], dtype=bool)
        out[np.concatenate(owner)[~ok]] = False
        return out

    def move_free(self, a: ArrayLike, b: ArrayLike, floor: float, inflation: float | None = None) -> bool:
        return bool(self.moves_free(a, np.asarray(b)[None], floor, inflation)[0])

    def segment_samples(self, a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
        """Evenly spaced samples on [a, b], spacing at most half a cell, endpoints included."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        n = int(math.ceil(np.linalg.norm(b - a) / (0.5 * self.resolution))) + 1
        s = np.linspace(0.0, 1.0, max(n, 1))
        return a + s[:, None] * (b - a)

    def is_segment_free(self, a: ArrayLike, b: ArrayLike, inflation: float | None = None) -> bool:
        return bool(np.all(self.points_free(self.segment_samples(a, b), inflation)))

    # -- mutation ---------------------------------------------------------

    def integrate_scan(
        self,
        est_position: ArrayLike,
        est_yaw: float,
        points: ArrayLike,
        max_range: float,
        hits: ArrayLike | None = None,
    ) -> NDArray[np.int64]:
        """Carve sensor rays into the grid.

        ``points`` are in the sensor frame (x forward, y left, z up); the
        sensor frame is the body frame rotated by ``est_yaw``. A point is a
        hit unless ``hits`` says otherwise or, when ``hits`` is omitted, its
        range reaches ``max_range``.

        Returns:
            Sorted flat indices of cells whose state changed plus their face
            neighbors.
        """
        origin = np.asarray(est_position, dtype=np.float64).reshape(3)
        if not self.contains(origin):
            raise PoseOutOfBounds(f"sensor origin {origin} outside map bounds")
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        rng = np.linalg.norm(pts, axis=1)
        if hits is None:
            hits = rng < max_range - 1e-9
        else:
            hits = np.asarray(hits, dtype=bool).reshape(-1)
        c, s = math.cos(est_yaw), math.sin(est_yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        world = origin + pts @ rot.T

        g0 = np.broadcast_to(self.to_grid(origin), world.shape)
        g1 = self.to_grid(world)
        dirs = g1 - g0
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        unit = np.divide(dirs, norms, out=np.zeros_like(dirs), where=norms > 0)
        # nudge so an endpoint on a cell face lands in the cell beyond the face
        end_cells = np.floor(g1 + 1e-6 * unit).astype(np.int64)

        g0 = np.ascontiguousarray(g0)
        lo = np.floor(np.minimum(g0, g1))
        span = int(np.max(np.floor(np.maximum(g0, g1)) - lo)) + 1
        if self._scratch is None:
            self._scratch = np.full(self.n_cells, 255, dtype=np.uint8)
        if not self.cells.flags.c_contiguous:
            self.cells = np.ascontiguousarray(self.cells)
        changed = carve_kernel(
            self.cells.reshape(-1),
            np.asarray(self.dims, dtype=np.int64),
            g0,
            np.ascontiguousarray(g1),
            end_cells,
            np.ascontiguousarray(hits),
            span,
            self.occupied_persistence,
            self._scratch,
        )
        return self._with_face_neighbors(changed)

    def _with_face_neighbors(self, idx: NDArray[np.int64]) -> NDArray[np.int64]:
        if idx.size == 0:
            return idx.astype(np.int64)
        ijk = self.unflat(idx)
        nb = (ijk[:, None, :] + _FACE_OFFSETS[None, :, :]).reshape(-1, 3)
        nb = nb[self.in_grid(nb)]
        return np.unique(np.concatenate([idx, self.flat(nb)]))

    def mark_free(self, center: ArrayLike, radius: float) -> NDArray[np.int64]:
        """Force cells whose box meets the ball to Free (the vehicle's own volume).

        Returns the changed cells with their face neighbors, like
        :meth:`integrate_scan`.
        """
        center = np.asarray(center, dtype=np.float64)
        lo = np.maximum(self.cell_of(center - radius), 0)
        hi = np.minimum(self.cell_of(center + radius), np.asarray(self.dims) - 1)
        if np.any(hi < lo):
            return np.zeros(0, dtype=np.int64)
        grid = np.stack(
            np.meshgrid(*(np.arange(l, h + 1) for l, h in zip(lo, hi)), indexing="ij"), axis=-1
        ).reshape(-1, 3)
        box_lo = self.origin + grid * self.resolution
        d = np.maximum(np.maximum(box_lo - center, center - (box_lo + self.resolution)), 0.0)
        grid = grid[np.einsum("ij,ij->i", d, d) < radius * radius]
        if grid.size == 0:
            return np.zeros(0, dtype=np.int64)
        idx = self.flat(grid)
        flat = self.cells.reshape(-1)
        changed = idx[flat[idx] != CellState.FREE]
        flat[changed] = CellState.FREE
        return self._with_face_neighbors(np.sort(changed))

    # -- frontier ---------------------------------------------------------

    def frontier_mask(self, region: tuple[slice, slice, slice] | None = None) -> NDArray[np.bool_]:
        """Frontier predicate evaluated on a sub-box (whole grid by default)."""
        if region is None:
            region = (slice(0, self.dims[0]), slice(0, self.dims[1]), slice(0, self.dims[2]))
        # pad by one so face neighbors are available; outside the grid is not Unknown
        pad = tuple(slice(max(r.start - 1, 0), min(r.stop + 1, d)) for r, d in zip(region, self.dims))
        sub = self.cells[pad]
        unk = np.pad(sub == CellState.UNKNOWN, 1, constant_values=False)
        nb = (
            unk[2:, 1:-1, 1:-1] | unk[:-2, 1:-1, 1:-1]
            | unk[1:-1, 2:, 1:-1] | unk[1:-1, :-2, 1:-1]
            | unk[1:-1, 1:-1, 2:] | unk[1:-1, 1:-1, :-2]
        )
        mask = (sub == CellState.FREE) & nb
        inner = tuple(slice(r.start - p.start, r.stop - p.start) for r, p in zip(region, pad))
        return mask[inner]

    def extract_new_frontier(self, updated: ArrayLike) -> NDArray[np.int64]:
        """Refresh F_map around ``updated`` and return F_new.

        F_new is every frontier cell in ``updated`` plus its face neighbors.
        The frontier status of those cells is rewritten in F_map, which both
        adds new frontier cells and drops cells that stopped qualifying.
        """
        updated = np.asarray(updated, dtype=np.int64).reshape(-1)
        if updated.size == 0:
            self.frontier_new = np.zeros(0, dtype=np.int64)
            return self.frontier_new
        region_idx = self._with_face_neighbors(np.unique(updated))
        ijk = self.unflat(region_idx)
        lo, hi = ijk.min(axis=0), ijk.max(axis=0) + 1
        box = tuple(slice(int(l), int(h)) for l, h in zip(lo, hi))
        in_region = np.zeros(tuple(hi - lo), dtype=bool)
        local = ijk - lo
        in_region[local[:, 0], local[:, 1], local[:, 2]] = True
        fm = self.frontier_mask(box)
        sub = self.frontier[box]
        sub[in_region] = fm[in_region]
        new_local = np.argwhere(fm & in_region)
        self.frontier_new = np.sort(self.flat(new_local + lo))
        return self.frontier_new

    def cluster_frontier(self, min_cluster_size: int = 5) -> list[FrontierCluster]:
        """26-connected components of F_map; components smaller than the threshold are dropped."""
        if not self.frontier.any():
            return []
        labels, n = ndimage.label(self.frontier, structure=_CUBE_STRUCT)
        flat_labels = labels.reshape(-1)
        idx = np.flatnonzero(flat_labels)
        lab = flat_labels[idx]
        order = np.argsort(lab, kind="stable")
        idx, lab = idx[order], lab[order]
        bounds = np.searchsorted(lab, np.arange(1, n + 2))
        out: list[FrontierCluster] = []
        for k in range(n):
            members = idx[bounds[k] : bounds[k + 1]]
            if members.size < min_cluster_size:
                continue
            centers = self.cell_center(members)
            out.append(FrontierCluster(len(out), members, centers.mean(axis=0), int(members.size)))
        return out

    # -- export -----------------------------------------------------------

    def export_csv(self, path: str | Path) -> None:
        """One row per known cell: ``x,y,z,state``."""
        idx = np.flatnonzero(self.cells.reshape(-1) != CellState.UNKNOWN)
        centers = self.cell_center(idx)
        states = self.cells.reshape(-1)[idx]
        with open(path, "w") as fh:
            fh.write("x,y,z,state\n")
            for (x, y, z), s in zip(centers, states):
                name = "occupied" if s == CellState.OCCUPIED else "free"
                fh.write(f"{x:.3f},{y:.3f},{z:.3f},{name}\n")
