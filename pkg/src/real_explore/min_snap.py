"""Minimum-snap polynomial segments, the precomputed two-step fan, and path refinement.

A minimum-snap segment with fully specified position, velocity,
acceleration and jerk at both ends is the unique degree-7 polynomial
meeting those eight constraints, so each axis reduces to a small linear
solve. Coefficients are solved in the normalized time ``tau = t / T`` and
stored in ascending powers of the local time ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray


class SingularSystem(ValueError):
    pass


class InvalidParams(ValueError):
    pass


class DegenerateEdge(ValueError):
    pass


class TimeOutOfRange(ValueError):
    pass


# FALLING[k, n] = n! / (n - k)!  (k-th derivative factor of t^n), zero for n < k
FALLING = np.array(
    [[factorial(n) / factorial(n - k) if n >= k else 0.0 for n in range(8)] for k in range(8)]
)
# end constraints on the free coefficients c4..c7 at tau = 1
_END = FALLING[:4, 4:]
_END_INV = np.linalg.inv(_END)


@dataclass(frozen=True)
class BoundaryConditions:
    """Start/end position through jerk; each entry is a scalar or a per-axis vector."""

    p0: ArrayLike
    v0: ArrayLike
    a0: ArrayLike
    j0: ArrayLike
    pT: ArrayLike
    vT: ArrayLike
    aT: ArrayLike
    jT: ArrayLike
    T: float

    def start(self) -> NDArray[np.float64]:
        return np.atleast_2d(np.array([self.p0, self.v0, self.a0, self.j0], dtype=np.float64).T)

    def end(self) -> NDArray[np.float64]:
        return np.atleast_2d(np.array([self.pT, self.vT, self.aT, self.jT], dtype=np.float64).T)


@dataclass
class Polynomial7:
    """Per-axis degree-7 polynomials on ``[0, T]``; ``coeffs`` is ``(axes, 8)``, ascending powers."""

    coeffs: NDArray[np.float64]
    T: float

    def derivatives(self, t: float, upto: int = 4) -> NDArray[np.float64]:
        """Rows 0..upto are position, velocity, ... evaluated at local time ``t``."""
        tp = t ** np.arange(8)
        out = np.empty((upto + 1, self.coeffs.shape[0]))
        for k in range(upto + 1):
            out[k] = self.coeffs[:, k:] @ (FALLING[k, k:] * tp[: 8 - k])
        return out

    def position(self, t: float) -> NDArray[np.float64]:
        return self.coeffs @ (t ** np.arange(8))

    def positions(self, ts: ArrayLike) -> NDArray[np.float64]:
        """Positions at many times, shape ``(len(ts), axes)``."""
        ts = np.asarray(ts, dtype=np.float64)
        return (ts[:, None] ** np.arange(8)) @ self.coeffs.T


def solve_segment(bc: BoundaryConditions) -> Polynomial7:
    T = float(bc.T)
    start, end = bc.start(), bc.end()
    if not (T > 0 and math.isfinite(T)) or not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
        raise SingularSystem(f"need finite boundary values and T > 0 (T={T})")
    scale = T ** np.arange(4)
    c = np.zeros((start.shape[0], 8))
    c[:, :4] = start * scale / FALLING[np.arange(4), np.arange(4)]
    rhs = end * scale - c[:, :4] @ FALLING[:4, :4].T
    c[:, 4:] = rhs @ _END_INV.T
    return Polynomial7(c / T ** np.arange(8), T)


def snap_cost(poly: Polynomial7) -> float:
    """Closed-form integral of squared snap over ``[0, T]``, summed over axes."""
    s = poly.coeffs[:, 4:] * FALLING[4, 4:]  # snap coefficients of t^0..t^3
    p = np.arange(4)
    e = p[:, None] + p[None, :] + 1
    gram = poly.T**e / e
    return float(np.einsum("ai,ij,aj->", s, gram, s))


def _angles(fov: float, n: int) -> NDArray[np.float64]:
    return np.linspace(-fov / 2, fov / 2, n) if n > 1 else np.zeros(1)


def _direction(yaw: float, pitch: float) -> NDArray[np.float64]:
    return np.array(
        [math.cos(yaw) * math.cos(pitch), math.sin(yaw) * math.cos(pitch), math.sin(pitch)]
    )


@dataclass
class PeacockSet:
    """The two-step fan in the body frame (origin at the vehicle, +x forward)."""

    first_steps: list[list[Polynomial7]]  # [pitch i][yaw j]
    second_steps: list[list[list[Polynomial7]]]  # [i][j][b]
    pitch: NDArray[np.float64]
    yaw: NDArray[np.float64]
    yaw2: NDArray[np.float64]
    l_traj: float
    v_max: float
    T: float
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.pitch), len(self.yaw)

    def endpoints(self) -> NDArray[np.float64]:
        """First-step end positions, shape ``(n_pitch, n_yaw, 3)``."""
        return np.array([[p.position(self.T) for p in row] for row in self.first_steps])


def build_peacock(
    fov_h: float,
    fov_v: float,
    n_yaw: int = 7,
    n_pitch: int = 5,
    n_yaw2: int = 7,
    l_traj: float = 2.5,
    v_max: float = 1.5,
    second_pitch: float = 0.0,
) -> PeacockSet:
    """Precompute the fan of first steps and, from each end, a horizontal fan of second steps.

    Every segment starts and ends at speed ``v_max`` along its heading with
    zero acceleration and jerk, and lasts ``T = l_traj / v_max``.
    """
    for n in (n_yaw, n_pitch, n_yaw2):
        if n < 1 or n % 2 == 0:
            raise InvalidParams("fan sizes must be odd and >= 1")
    if not (l_traj > 0 and v_max > 0):
        raise InvalidParams("l_traj and v_max must be positive")
    T = l_traj / v_max
    pitch, yaw, yaw2 = _angles(fov_v, n_pitch), _angles(fov_h, n_yaw), _angles(fov_h, n_yaw2)
    zero = np.zeros(3)
    v_fwd = np.array([v_max, 0.0, 0.0])
    first, second = [], []
    for th in pitch:
        row1, row2 = [], []
        for ps in yaw:
            d1 = _direction(ps, th)
            p1 = l_traj * d1
            seg = solve_segment(BoundaryConditions(zero, v_fwd, zero, zero, p1, v_max * d1, zero, zero, T))
            fan = []
            for pb in yaw2:
                d2 = _direction(ps + pb, second_pitch)
                fan.append(
                    solve_segment(
                        BoundaryConditions(
                            p1, v_max * d1, zero, zero, p1 + l_traj * d2, v_max * d2, zero, zero, T
                        )
                    )
                )
            row1.append(seg)
            row2.append(fan)
        first.append(row1)
        second.append(row2)
    return PeacockSet(first, second, pitch, yaw, yaw2, l_traj, v_max, T)


class TrajState(NamedTuple):
    position: NDArray[np.float64]
    velocity: NDArray[np.float64]
    acceleration: NDArray[np.float64]
    jerk: NDArray[np.float64]
    snap: NDArray[np.float64]
    yaw: float


@dataclass
class Trajectory:
    """Chained 3-axis segments.

    Yaw follows the velocity direction unless ``fixed_yaw`` is set.
    ``terminal_yaw`` is the heading to hold once the trajectory has ended.
    """

    segments: list[Polynomial7]
    fixed_yaw: float | None = None
    terminal_yaw: float | None = None
    starts: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        if any(s.T <= 0 for s in self.segments):
            raise ValueError("segment durations must be positive")
        self.starts = np.concatenate([[0.0], np.cumsum([s.T for s in self.segments])])

    @property
    def total_duration(self) -> float:
        return float(self.starts[-1])

    def locate(self, t: float) -> tuple[int, float]:
        k = int(np.searchsorted(self.starts, t, side="right")) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        return k, t - self.starts[k]

    def end_position(self) -> NDArray[np.float64]:
        return self.segments[-1].position(self.segments[-1].T)

    def sample(self, dt: float) -> NDArray[np.float64]:
        """Positions on a time grid of step ``dt`` (end included)."""
        n = int(math.ceil(self.total_duration / dt - 1e-9)) + 1
        ts = np.minimum(np.arange(n) * dt, self.total_duration)
        return np.array([evaluate(self, t).position for t in ts])


def evaluate(traj: Trajectory, t: float) -> TrajState:
    if t < -1e-12 or t > traj.total_duration + 1e-9:
        raise TimeOutOfRange(f"t={t} outside [0, {traj.total_duration}]")
    k, tl = traj.locate(min(max(t, 0.0), traj.total_duration))
    d = traj.segments[k].derivatives(tl)
    if traj.fixed_yaw is not None:
        yaw = traj.fixed_yaw
    elif d[1, 0] ** 2 + d[1, 1] ** 2 > 1e-12:
        yaw = math.atan2(d[1, 1], d[1, 0])
    else:
        yaw = traj.terminal_yaw if traj.terminal_yaw is not None else 0.0
    return TrajState(d[0], d[1], d[2], d[3], d[4], yaw)


def refine_path(waypoints: ArrayLike, v_max: float, t_unit: float | None = None) -> Trajectory:
    """Turn a polyline of graph nodes into a chain of minimum-snap segments.

    Segment ``i`` lasts ``len_i / v_max`` and starts and ends at speed
    ``v_max`` along its own edge with zero acceleration and jerk, so the
    vehicle stays on edges that were checked free. Position is continuous at
    every joint; higher derivatives are continuous only where consecutive
    edges are collinear.
    """
    wp = np.asarray(waypoints, dtype=np.float64)
    if wp.ndim != 2 or wp.shape[0] < 2:
        raise ValueError("need at least two waypoints")
    edges = np.diff(wp, axis=0)
    lengths = np.linalg.norm(edges, axis=1)
    if np.any(lengths <= 1e-9):
        raise DegenerateEdge("consecutive waypoints coincide")
    t_unit = 1.0 if t_unit is None else float(t_unit)
    durations = lengths / (v_max * t_unit) * t_unit
    zero = np.zeros(wp.shape[1])
    segs = []
    for q in range(len(edges)):
        v = v_max * edges[q] / lengths[q]
        segs.append(solve_segment(BoundaryConditions(wp[q], v, zero, zero, wp[q + 1], v, zero, zero, durations[q])))
    return Trajectory(segs)


def hold(position: ArrayLike, yaw: float, duration: float) -> Trajectory:
    """Hover in place, pointing at ``yaw``."""
    p = np.asarray(position, dtype=np.float64)
    z = np.zeros_like(p)
    seg = solve_segment(BoundaryConditions(p, z, z, z, p, z, z, z, duration))
    return Trajectory([seg], fixed_yaw=yaw, terminal_yaw=yaw)


def transform(poly: Polynomial7, yaw: float, offset: ArrayLike) -> Polynomial7:
    """Rotate a 3-axis polynomial about z by ``yaw`` and translate by ``offset``."""
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    coeffs = rot @ poly.coeffs
    coeffs[:, 0] += np.asarray(offset, dtype=np.float64)
    return Polynomial7(coeffs, poly.T)


def export_csv(traj: Trajectory, path: str | Path, period: float = 0.02) -> None:
    n = int(math.floor(traj.total_duration / period + 1e-9)) + 1
    with open(path, "w") as fh:
        fh.write("t,x,y,z,vx,vy,vz,yaw\n")
        for k in range(n):
            t = k * period
            st = evaluate(traj, t)
            p, v = st.position, st.velocity
            fh.write(f"{t:.4f},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f},{v[0]:.6f},{v[1]:.6f},{v[2]:.6f},{st.yaw:.6f}\n")
