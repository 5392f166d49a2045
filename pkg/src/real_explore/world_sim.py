"""Headless ground-truth world: box obstacles, a depth sensor, kinematic flight and odometry drift.

Trajectories are expressed in the estimated (odometry) frame: the vehicle's
estimate follows the commanded position exactly, while the true vehicle moves
by the same displacement rotated by the current heading error, minus a random
walk that grows with the square root of the distance flown. With every noise
scale at zero the true and estimated poses coincide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._kernels import ray_boxes_kernel
from .loop_closer import wrap
from .min_snap import Trajectory, evaluate


class ParseError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    pass


class NoActiveTrajectory(RuntimeError):
    pass


class PreconditionNotMet(RuntimeError):
    pass


@dataclass
class Box:
    lo: NDArray[np.float64]
    hi: NDArray[np.float64]

    def __post_init__(self) -> None:
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)

    def distance(self, p: ArrayLike) -> float:
        p = np.asarray(p, dtype=np.float64)
        return float(np.linalg.norm(np.maximum(np.maximum(self.lo - p, 0.0), p - self.hi)))


@dataclass
class World:
    bounds: Box
    obstacles: list[Box]
    start_position: NDArray[np.float64]
    start_yaw: float
    name: str = "world"
    box_lo: NDArray[np.float64] = field(init=False, repr=False)
    box_hi: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.start_position = np.asarray(self.start_position, dtype=np.float64)
        self.box_lo = np.array([b.lo for b in self.obstacles]).reshape(-1, 3)
        self.box_hi = np.array([b.hi for b in self.obstacles]).reshape(-1, 3)

    def validate(self, clearance: float = 0.0) -> None:
        lo, hi = self.bounds.lo, self.bounds.hi
        if np.any(hi <= lo):
            raise ValidationError("bounds must have positive extent")
        for k, b in enumerate(self.obstacles):
            if np.any(b.hi <= b.lo):
                raise ValidationError(f"box {k} has non-positive extent")
            if np.any(b.lo < lo - 1e-9) or np.any(b.hi > hi + 1e-9):
                raise ValidationError(f"box {k} extends past the bounds")
        p = self.start_position
        if np.any(p - clearance < lo) or np.any(p + clearance > hi):
            raise ValidationError("start position outside the bounds")
        if self.obstacles and self.clearance(p) <= clearance:
            raise ValidationError("start position inside an obstacle")

    def clearance(self, p: ArrayLike) -> float:
        """Distance from ``p`` to the nearest obstacle (inf without obstacles)."""
        if not self.obstacles:
            return math.inf
        p = np.asarray(p, dtype=np.float64)
        d = np.maximum(np.maximum(self.box_lo - p, 0.0), p - self.box_hi)
        return float(np.sqrt((d * d).sum(axis=1)).min())

    def collides(self, p: ArrayLike, radius: float) -> bool:
        """Ball of ``radius`` at ``p`` meets an obstacle or pokes out of the bounds."""
        p = np.asarray(p, dtype=np.float64)
        if np.any(p - radius < self.bounds.lo) or np.any(p + radius > self.bounds.hi):
            return True
        return self.clearance(p) < radius


def parse_world(text: str, name: str = "world") -> World:
    bounds = start = None
    boxes: list[Box] = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(n, f"expected 'key: values', got {raw!r}")
        key, rest = (s.strip() for s in line.split(":", 1))
        if key == "name":
            name = rest
            continue
        try:
            vals = [float(v) for v in rest.split()]
        except ValueError:
            raise ParseError(n, f"non-numeric value in {key!r}") from None
        want = {"bounds": 6, "box": 6, "start": 4}.get(key)
        if want is None:
            raise ParseError(n, f"unknown key {key!r}")
        if len(vals) != want:
            raise ParseError(n, f"{key!r} needs {want} numbers, got {len(vals)}")
        if key == "bounds":
            bounds = Box(vals[:3], vals[3:])
        elif key == "box":
            boxes.append(Box(vals[:3], vals[3:]))
        else:
            start = vals
    if bounds is None:
        raise ParseError(0, "missing 'bounds'")
    if start is None:
        raise ParseError(0, "missing 'start'")
    world = World(bounds, boxes, np.array(start[:3]), start[3], name)
    world.validate()
    return world


WORLDS_DIR = Path(__file__).parent / "worlds"


def find_world(name: str | Path) -> Path:
    """A world file path, or the name of a bundled world (``maze_small``)."""
    path = Path(name)
    if path.is_file():
        return path
    bundled = WORLDS_DIR / f"{Path(name).stem}.world"
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"no world file or bundled world named {str(name)!r}")


def bundled_worlds() -> list[str]:
    return sorted(p.stem for p in WORLDS_DIR.glob("*.world"))


def load_world(path: str | Path) -> World:
    path = find_world(path)
    return parse_world(path.read_text(), name=path.stem)


def ray_grid(fov_h: float, fov_v: float, n_u: int, n_v: int) -> NDArray[np.float64]:
    """Unit ray directions in the sensor frame on a uniform azimuth/elevation grid."""
    az = np.linspace(-fov_h / 2, fov_h / 2, n_u) if n_u > 1 else np.zeros(1)
    el = np.linspace(-fov_v / 2, fov_v / 2, n_v) if n_v > 1 else np.zeros(1)
    A, E = np.meshgrid(az, el, indexing="ij")
    return np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1).reshape(-1, 3)


def ray_boxes(origin: ArrayLike, dirs: ArrayLike, lo: ArrayLike, hi: ArrayLike) -> NDArray[np.float64]:
    """Nearest entry distance of each ray into any box (slab method); inf on a miss."""
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    lo = np.asarray(lo, dtype=np.float64).reshape(-1, 3)
    hi = np.asarray(hi, dtype=np.float64).reshape(-1, 3)
    if lo.shape[0] == 0:
        return np.full(d.shape[0], np.inf)
    return ray_boxes_kernel(o, np.ascontiguousarray(d), np.ascontiguousarray(lo), np.ascontiguousarray(hi))


def raycast_depth(
    position: ArrayLike,
    yaw: float,
    world: World,
    fov_h: float,
    fov_v: float,
    r_max: float,
    n_u: int = 64,
    n_v: int = 48,
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Depth points in the sensor frame and hit flags; misses sit at ``r_max``."""
    body = ray_grid(fov_h, fov_v, n_u, n_v)
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    t = ray_boxes(position, body @ rot.T, world.box_lo, world.box_hi)
    hits = t <= r_max
    rng = np.where(hits, t, r_max)
    return body * rng[:, None], hits


@dataclass
class DriftModel:
    sigma_xy: float = 0.008  # m per sqrt(m)
    sigma_z: float = 0.004
    sigma_yaw: float = 0.02  # rad per sqrt(rad)
    yaw_couple: bool = True

    def __post_init__(self) -> None:
        if min(self.sigma_xy, self.sigma_z, self.sigma_yaw) < 0:
            raise ValueError("drift scales must be non-negative")

    @classmethod
    def zero(cls) -> DriftModel:
        return cls(0.0, 0.0, 0.0, True)

    @property
    def enabled(self) -> bool:
        return self.sigma_xy > 0 or self.sigma_z > 0 or self.sigma_yaw > 0


def _rot_z(a: float) -> NDArray[np.float64]:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class Simulator:
    """Owns the true pose, the drift state and the clock.

    ``est = true + drift`` component-wise (position offset and yaw offset).
    """

    def __init__(
        self,
        world: World,
        drift: DriftModel | None = None,
        seed: int = 0,
        body_radius: float = 0.2,
        start_position: ArrayLike | None = None,
        start_yaw: float | None = None,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.world = world
        self.model = drift if drift is not None else DriftModel.zero()
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.body_radius = body_radius
        p = world.start_position if start_position is None else start_position
        self.true_position = np.asarray(p, dtype=np.float64).copy()
        self.true_yaw = float(world.start_yaw if start_yaw is None else start_yaw)
        self.drift = np.zeros(4)
        self.n_steps = 0
        self.traj: Trajectory | None = None
        self.clock = 0.0
        self._traj_steps = 0
        self.crashed = self.world.collides(self.true_position, body_radius)
        self.path_length = 0.0
        self.log: list[tuple[float, ...]] = []
        self._t = 0.0
        self._record()

    @property
    def t(self) -> float:
        return self._t

    @property
    def est_position(self) -> NDArray[np.float64]:
        return self.true_position + self.drift[:3]

    @property
    def est_yaw(self) -> float:
        return self.true_yaw + self.drift[3]

    def odometry(self) -> tuple[NDArray[np.float64], float]:
        return self.est_position, self.est_yaw

    def ground_truth(self) -> tuple[NDArray[np.float64], float]:
        return self.true_position.copy(), self.true_yaw

    def set_trajectory(self, traj: Trajectory) -> None:
        self.traj = traj
        self.clock = 0.0
        self._traj_steps = 0

    @property
    def trajectory_done(self) -> bool:
        return self.traj is None or self.clock >= self.traj.total_duration - 1e-9

    def sense(self, fov_h: float, fov_v: float, r_max: float, n_u: int = 64, n_v: int = 48):
        """Depth points from the TRUE pose, to be integrated at the estimated pose."""
        return raycast_depth(self.true_position, self.true_yaw, self.world, fov_h, fov_v, r_max, n_u, n_v)

    def step(self, dt: float, psi_dot_max: float) -> None:
        if self.traj is None:
            raise NoActiveTrajectory("no trajectory to track")
        self._traj_steps += 1
        self.clock = min(self._traj_steps * dt, self.traj.total_duration)
        cmd = evaluate(self.traj, self.clock)
        m = self.model
        if not m.enabled and not self.drift.any():
            # perfect odometry: keep est == true bit for bit
            true_delta = cmd.position - self.true_position
            self.true_position = cmd.position.copy()
        else:
            delta = cmd.position - self.est_position
            dist = float(np.linalg.norm(delta))
            true_delta = _rot_z(-self.drift[3]) @ delta if m.yaw_couple else delta.copy()
            if dist > 0 and (m.sigma_xy > 0 or m.sigma_z > 0):
                sd = math.sqrt(dist) * np.array([m.sigma_xy, m.sigma_xy, m.sigma_z])
                true_delta -= sd * self.rng.standard_normal(3)
            self.true_position = self.true_position + true_delta
            self.drift[:3] = cmd.position - self.true_position
        self.path_length += float(np.linalg.norm(true_delta))

        # true heading slews toward the commanded heading mapped out of the odometry frame
        want = cmd.yaw - self.drift[3]
        err = wrap(want - self.true_yaw)
        turn = max(-psi_dot_max * dt, min(psi_dot_max * dt, err))
        self.true_yaw = wrap(self.true_yaw + turn)
        if turn != 0.0 and m.sigma_yaw > 0:
            self.drift[3] += m.sigma_yaw * math.sqrt(abs(turn)) * float(self.rng.standard_normal())

        self.n_steps += 1
        self._t = self.n_steps * dt
        if self.world.collides(self.true_position, self.body_radius):
            self.crashed = True
        self._record()

    def closure_ready(self, node, arrival_radius: float = 0.5, yaw_tol: float = 0.3) -> bool:
        """True pose is at the node's true position and heading (node state minus its drift)."""
        p_true = node.position - node.drift[:3]
        yaw_true = node.yaw - node.drift[3]
        return (
            float(np.linalg.norm(self.true_position - p_true)) <= arrival_radius
            and abs(wrap(self.true_yaw - yaw_true)) <= yaw_tol
        )

    def apply_loop_closure(
        self, node, residual_sigma: float = 0.0, arrival_radius: float = 0.5, yaw_tol: float = 0.3
    ) -> None:
        """Reset drift to the node's snapshot (plus optional noise). The trajectory is dropped."""
        if not self.closure_ready(node, arrival_radius, yaw_tol):
            raise PreconditionNotMet("vehicle is not at the loop-closing node")
        noise = residual_sigma * self.rng.standard_normal(4) if residual_sigma > 0 else np.zeros(4)
        self.drift = np.asarray(node.drift, dtype=np.float64) + noise
        self.traj = None
        self.clock = 0.0
        if self.log:
            self.log[-1] = self._row()

    def _row(self) -> tuple[float, ...]:
        tp, ep = self.true_position, self.est_position
        return (self._t, tp[0], tp[1], tp[2], self.true_yaw, ep[0], ep[1], ep[2], self.est_yaw)

    def _record(self) -> None:
        self.log.append(self._row())

    def rmse(self) -> float:
        return rmse_from_log(self.log)

    def export_pose_log(self, path: str | Path) -> None:
        write_pose_log(self.log, path)


POSE_HEADER = ["t", "tx", "ty", "tz", "tyaw", "ex", "ey", "ez", "eyaw"]


def write_pose_log(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_HEADER)
        for r in rows:
            w.writerow([f"{r[0]:.4f}"] + [repr(float(v)) for v in r[1:]])


def read_pose_log(path: str | Path) -> NDArray[np.float64]:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def rmse_from_log(rows: ArrayLike) -> float:
    arr = np.asarray(rows, dtype=np.float64)
    err = arr[:, 5:8] - arr[:, 1:4]
    return float(math.sqrt(np.mean(np.sum(err * err, axis=1))))
