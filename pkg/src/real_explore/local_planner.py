"""Local exploration: score the two-step fan against the map and pick a first step.

The collision matrix counts, for every first step that is free, how many of
its second steps are free too (times ``lam``); a blocked first step scores
zero. The frontier matrix starts at one and gains ``gam`` for every newly
seen frontier cell whose nearest first-step endpoint is that entry. Their
elementwise product ranks the candidates.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .min_snap import PeacockSet, Trajectory, transform
from .voxel_map import VoxelMap


class GlobalReason(str, enum.Enum):
    DEAD_END_OR_REVISIT = "DeadEndOrRevisit"
    COLLISION = "Collision"


@dataclass
class ScoreMatrix:
    lam: NDArray[np.float64]
    gamma: NDArray[np.float64]

    @property
    def g(self) -> NDArray[np.float64]:
        return self.lam * self.gamma

    def to_json(self, chosen: tuple[int, int] | None = None) -> str:
        return json.dumps(
            {
                "lambda_matrix": self.lam.tolist(),
                "gamma_matrix": self.gamma.tolist(),
                "g_matrix": self.g.tolist(),
                "chosen_ij": list(chosen) if chosen is not None else None,
            }
        )


@dataclass
class Track:
    i: int
    j: int
    trajectory: Trajectory


@dataclass
class GoGlobal:
    reason: GlobalReason


@dataclass
class FanSamples:
    """Body-frame collision samples of every fan segment."""

    first: NDArray[np.float64]  # (n_pitch, n_yaw, S, 3)
    second: NDArray[np.float64]  # (n_pitch, n_yaw, n_yaw2, S, 3)
    spacing: float  # largest distance between consecutive samples


def fan_samples(fan: PeacockSet, resolution: float) -> FanSamples:
    """Sample each segment uniformly in time, finer of ``T/20`` and a quarter cell of travel."""
    key = ("samples", resolution)
    if key in fan.cache:
        return fan.cache[key]
    dense = np.linspace(0.0, fan.T, 401)
    polys = [p for row in fan.first_steps for p in row]
    polys += [p for row in fan.second_steps for fan_ in row for p in fan_]
    peak = max(np.linalg.norm(np.diff(p.positions(dense), axis=0), axis=1).max() for p in polys) / (
        dense[1] - dense[0]
    )
    n = max(20, int(math.ceil(peak * fan.T / (0.25 * resolution)))) + 1
    ts = np.linspace(0.0, fan.T, n)
    first = np.array([[p.positions(ts) for p in row] for row in fan.first_steps])
    second = np.array([[[p.positions(ts) for p in f] for f in row] for row in fan.second_steps])
    spacing = max(
        np.linalg.norm(np.diff(first, axis=-2), axis=-1).max(),
        np.linalg.norm(np.diff(second, axis=-2), axis=-1).max(),
    )
    out = FanSamples(first, second, float(spacing))
    fan.cache[key] = out
    return out


def _rot(yaw: float) -> NDArray[np.float64]:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def world_endpoints(fan: PeacockSet, position: ArrayLike, yaw: float) -> NDArray[np.float64]:
    return np.asarray(position, dtype=np.float64) + fan.endpoints() @ _rot(yaw).T


def score(
    fan: PeacockSet,
    position: ArrayLike,
    yaw: float,
    vmap: VoxelMap,
    frontier_new: ArrayLike,
    lam: float = 1.0,
    gam: float = 1.0,
    depart_floor: float | None = None,
) -> ScoreMatrix:
    """Fill the collision and frontier matrices for the fan placed at ``(position, yaw)``.

    With ``depart_floor``, first-step samples within one cell of the vehicle
    only need the vehicle's own clearance clipped to ``[depart_floor, r]``,
    so a vehicle resting slightly inside the inflation band can move off.
    """
    p = np.asarray(position, dtype=np.float64)
    R = _rot(yaw)
    samples = fan_samples(fan, vmap.resolution)
    n_p, n_y = fan.shape
    first = p + samples.first @ R.T
    if depart_floor is None:
        first_free = vmap.points_free(first.reshape(-1, 3)).reshape(n_p, n_y, -1).all(axis=-1)
    else:
        r = vmap.inflation_radius
        flat = first.reshape(-1, 3)
        near = np.linalg.norm(samples.first.reshape(-1, 3), axis=1) <= vmap.resolution
        need = np.where(near, np.clip(vmap.clearance(p[None], r)[0], depart_floor, r), r)
        first_free = (vmap.clearance(flat, r) >= need).reshape(n_p, n_y, -1).all(axis=-1)
    lam_m = np.zeros((n_p, n_y))
    if first_free.any():
        second = p + samples.second[first_free] @ R.T
        ok = vmap.points_free(second.reshape(-1, 3)).reshape(second.shape[:-1]).all(axis=-1)
        lam_m[first_free] = lam * ok.sum(axis=-1)

    gamma_m = np.ones((n_p, n_y))
    f_new = np.asarray(frontier_new, dtype=np.int64).reshape(-1)
    if f_new.size:
        ends = world_endpoints(fan, p, yaw).reshape(-1, 3)
        cells = vmap.cell_center(f_new)
        d2 = ((cells[:, None, :] - ends[None, :, :]) ** 2).sum(axis=-1)
        nearest = np.argmin(d2, axis=1)  # first minimum: lowest i, then lowest j
        gamma_m += gam * np.bincount(nearest, minlength=n_p * n_y).reshape(n_p, n_y)
    return ScoreMatrix(lam_m, gamma_m)


def fan_direction(fan: PeacockSet, i: int, j: int) -> NDArray[np.float64]:
    th, ps = fan.pitch[i], fan.yaw[j]
    return np.array([math.cos(ps) * math.cos(th), math.sin(ps) * math.cos(th), math.sin(th)])


def select_best(
    fan: PeacockSet,
    scores: ScoreMatrix,
    position: ArrayLike,
    yaw: float,
    current: tuple[int, int] | None = None,
) -> Track | None:
    """Pick the highest-scoring first step, or None when every entry is zero.

    Ties go to the entry deviating least from ``current`` (straight ahead by
    default), then to the lowest pitch index, then the lowest yaw index.
    """
    g = scores.g
    best = g.max()
    if not best > 0:
        return None
    n_p, n_y = fan.shape
    if current is None:
        current = (n_p // 2, n_y // 2)
    ref = fan_direction(fan, *current)
    cands = []
    for i, j in zip(*np.nonzero(g == best)):
        dev = math.acos(max(-1.0, min(1.0, float(fan_direction(fan, i, j) @ ref))))
        cands.append((round(dev, 12), int(i), int(j)))
    _, i, j = min(cands)
    traj = Trajectory([transform(fan.first_steps[i][j], yaw, position)])
    return Track(i, j, traj)


def in_frustum(
    points: ArrayLike, position: ArrayLike, yaw: float, fov_h: float, fov_v: float, r_max: float
) -> NDArray[np.bool_]:
    """Points inside the angular sensor frustum (yaw-only sensor frame) and within range."""
    d = (np.asarray(points, dtype=np.float64).reshape(-1, 3) - np.asarray(position)) @ _rot(yaw)
    rng = np.linalg.norm(d, axis=1)
    az = np.arctan2(d[:, 1], d[:, 0])
    el = np.arctan2(d[:, 2], np.hypot(d[:, 0], d[:, 1]))
    return (rng <= r_max) & (np.abs(az) <= fov_h / 2) & (np.abs(el) <= fov_v / 2)


def visible_frontier(
    vmap: VoxelMap,
    position: ArrayLike,
    yaw: float,
    fov_h: float,
    fov_v: float,
    r_max: float,
    first_only: bool = True,
) -> NDArray[np.int64]:
    """F_map cells inside the frustum with a free line of sight from the sensor.

    Line of sight uses no inflation: every sample on the way must be Free.
    """
    cells = vmap.frontier_map()
    if cells.size == 0:
        return cells
    centers = vmap.cell_center(cells)
    inside = in_frustum(centers, position, yaw, fov_h, fov_v, r_max)
    cand, centers = cells[inside], centers[inside]
    order = np.argsort(np.linalg.norm(centers - np.asarray(position), axis=1), kind="stable")
    out = []
    for k in order:
        if vmap.is_segment_free(position, centers[k], inflation=0.0):
            out.append(cand[k])
            if first_only:
                break
    return np.asarray(out, dtype=np.int64)


def should_go_global(
    frontier_new: ArrayLike,
    scores: ScoreMatrix,
    vmap: VoxelMap,
    position: ArrayLike,
    yaw: float,
    fov_h: float,
    fov_v: float,
    r_max: float,
) -> GlobalReason | None:
    """Hand-off test: nothing new was seen and either no stored frontier is visible or every step collides."""
    if np.asarray(frontier_new).size:
        return None
    if visible_frontier(vmap, position, yaw, fov_h, fov_v, r_max).size == 0:
        return GlobalReason.DEAD_END_OR_REVISIT
    if not scores.g.max() > 0:
        return GlobalReason.COLLISION
    return None
