"""The exploration state machine: local fan tracking, global hand-off, active loop closing.

One :class:`Mission` owns the map, the graph, the simulator and the clock.
Each sim step runs, in order: sensing (on the sensor cadence), node creation
and the loop-closing check (on the node cadence), planning (on the planning
cadence or when the current trajectory has run out), then the kinematic step.
"""

from __future__ import annotations

import bisect
import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from .config import MissionConfig
from .explore_graph import (
    ExploreGraph,
    GlobalPlan,
    abort_global,
    paired_target,
    plan_global,
)
from .local_planner import GlobalReason, score, select_best, should_go_global
from .loop_closer import LoopDecision, LoopParams, candidates, select, wrap
from .min_snap import PeacockSet, Trajectory, build_peacock, evaluate, hold, refine_path
from .voxel_map import CellState, VoxelMap
from .world_sim import DriftModel, Simulator, World, load_world


class Outcome(str, enum.Enum):
    COMPLETE = "Complete"
    STUCK = "Stuck"
    CRASH = "Crash"


class Phase(str, enum.Enum):
    LOCAL = "LocalExplore"
    GLOBAL = "GlobalNavigate"
    LOOP = "LoopClose"
    DONE = "Done"


ALLOWED = {
    (Phase.LOCAL, Phase.GLOBAL),
    (Phase.GLOBAL, Phase.LOCAL),
    (Phase.LOCAL, Phase.LOOP),
    (Phase.GLOBAL, Phase.LOOP),
    (Phase.LOOP, Phase.LOCAL),
    (Phase.LOCAL, Phase.DONE),
}


@dataclass
class MissionReport:
    outcome: Outcome
    t_exp: float  # inf unless Complete
    t_end: float
    coverage: float
    rmse: float
    path_len: float
    lc_count: int
    lc_attempts: int
    n_nodes: int
    n_edges: int
    phase_time: dict[str, float]
    triggers: dict[str, int]
    seed: int
    world: str
    planner: str
    wall_time: float = 0.0

    def summary_row(self) -> dict[str, str]:
        t_exp = "inf" if math.isinf(self.t_exp) else f"{self.t_exp:.2f}"
        return {
            "seed": str(self.seed),
            "outcome": self.outcome.value,
            "t_exp": t_exp,
            "coverage": f"{self.coverage:.4f}",
            "rmse": f"{self.rmse:.4f}",
            "path_len": f"{self.path_len:.2f}",
            "lc_count": str(self.lc_count),
        }


@dataclass
class Transition:
    t: float
    src: Phase
    dst: Phase
    reason: str


@dataclass
class MissionLogs:
    poses: list[tuple[float, ...]]
    lc_events: list[tuple]
    transitions: list[Transition]
    scores: list[str]
    graph: ExploreGraph
    vmap: VoxelMap
    world: World
    dt: float
    known_history: list[tuple[float, int]] = field(default_factory=list)


def map_for_world(world: World, resolution: float, inflation: float) -> VoxelMap:
    """Grid of whole cells inside the world bounds (a partial last cell is dropped)."""
    ext = world.bounds.hi - world.bounds.lo
    dims = tuple(int(math.floor(e / resolution + 1e-9)) for e in ext)
    return VoxelMap(world.bounds.lo, dims, resolution, inflation)


def truth_free_mask(world: World, vmap: VoxelMap) -> NDArray[np.bool_]:
    """Cells whose box shares no volume with any obstacle."""
    free = np.ones(vmap.dims, dtype=bool)
    res = vmap.resolution
    for b in world.obstacles:
        lo = np.floor((b.lo - vmap.origin) / res + 1e-9).astype(int)
        hi = np.ceil((b.hi - vmap.origin) / res - 1e-9).astype(int)
        lo = np.clip(lo, 0, vmap.dims)
        hi = np.clip(hi, 0, vmap.dims)
        free[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = False
    return free


def reachable_free_mask(world: World, vmap: VoxelMap, start: ArrayLike) -> NDArray[np.bool_]:
    """Truth-free cells face-connected to the start cell."""
    free = truth_free_mask(world, vmap)
    labels, _ = ndimage.label(free)
    c = vmap.cell_of(np.asarray(start, dtype=np.float64)).reshape(-1)
    lab = labels[tuple(c)]
    if lab == 0:
        return np.zeros_like(free)
    return labels == lab


class Mission:
    def __init__(self, cfg: MissionConfig, world: World | None = None) -> None:
        self.cfg = cfg
        self.world = world if world is not None else load_world(cfg.world)
        self.rng = np.random.default_rng(cfg.seed)
        self.vmap = map_for_world(self.world, cfg.rho_oct, cfg.inflation)
        self.fan: PeacockSet = build_peacock(
            cfg.fov_h, cfg.fov_v, cfg.n_yaw, cfg.n_pitch, cfg.n_yaw2, cfg.l_traj, cfg.v_max
        )
        start, yaw = self._jittered_start()
        drift = DriftModel(cfg.sigma_xy, cfg.sigma_z, cfg.sigma_yaw, cfg.yaw_couple)
        self.sim = Simulator(self.world, drift, body_radius=cfg.body_radius, start_position=start, start_yaw=yaw, rng=self.rng)
        self.start = start
        self.graph = ExploreGraph()
        self.loop_params = LoopParams(cfg.c_tau, cfg.kappa0, cfg.kappa1, cfg.r_max)
        # least clearance ever accepted at a sample: the body plus the quarter-cell sampling slack
        self.depart_floor = cfg.body_radius + 0.125 * cfg.rho_oct

        self.phase = Phase.LOCAL
        self.transitions: list[Transition] = []
        self.lc_events: list[tuple] = []
        self.scores: list[str] = []
        self.triggers: dict[str, int] = {}
        self.phase_time = {p.value: 0.0 for p in Phase}
        self.f_new: list[NDArray[np.int64]] = []
        self.banned: set[int] = set()
        self.plan: GlobalPlan | None = None
        self.target_cell: int | None = None
        self.lc: LoopDecision | None = None
        self.lc_block_until = 0.0
        self.lc_count = 0
        self.lc_attempts = 0
        self.last_closure_t = -math.inf
        self.known_history: list[tuple[float, int]] = []

    # -- setup ------------------------------------------------------------

    def _jittered_start(self) -> tuple[NDArray[np.float64], float]:
        cfg, w = self.cfg, self.world
        jx, jy = self.rng.uniform(-1.0, 1.0, 2) * cfg.start_jitter_xy
        jyaw = self.rng.uniform(-1.0, 1.0) * cfg.start_jitter_yaw
        p = w.start_position + np.array([jx, jy, 0.0])
        if w.collides(p, cfg.inflation + cfg.rho_oct) and not w.collides(w.start_position, cfg.inflation + cfg.rho_oct):
            p = w.start_position.copy()
        return p, wrap(w.start_yaw + jyaw)

    @property
    def t(self) -> float:
        return self.sim.t

    def _bubble(self) -> None:
        """The vehicle's own volume is free; those cells never count as newly seen frontier."""
        upd = self.vmap.mark_free(self.sim.est_position, self.cfg.inflation + 0.5 * self.cfg.rho_oct)
        if upd.size:
            self.vmap.extract_new_frontier(upd)

    def _set_phase(self, dst: Phase, reason: str) -> None:
        if (self.phase, dst) not in ALLOWED:
            raise RuntimeError(f"illegal transition {self.phase.value} -> {dst.value}")
        self.transitions.append(Transition(self.t, self.phase, dst, reason))
        self.phase = dst

    # -- per-step pieces --------------------------------------------------

    def _sense(self) -> None:
        cfg = self.cfg
        est_p, est_yaw = self.sim.odometry()
        if not self.vmap.contains(est_p):
            return
        pts, hits = self.sim.sense(cfg.fov_h, cfg.fov_v, cfg.r_max, cfg.n_rays_h, cfg.n_rays_v)
        upd = self.vmap.integrate_scan(est_p, est_yaw, pts, cfg.r_max, hits)
        self.f_new.append(self.vmap.extract_new_frontier(upd))
        self.known_history.append((self.t, self.vmap.known_count()))

    def _take_f_new(self) -> NDArray[np.int64]:
        if not self.f_new:
            return np.zeros(0, dtype=np.int64)
        cells = np.unique(np.concatenate(self.f_new))
        self.f_new = []
        return cells[self.vmap.frontier.reshape(-1)[cells]]

    def _add_node(self) -> int:
        """New graph node at the estimated pose, unless the vehicle has barely moved since the last one.

        A last node with no edges is never reused: it may have been placed
        too close to a wall to link, and a global plan needs a connected start.
        """
        p, yaw = self.sim.odometry()
        if len(self.graph):
            last = self.graph.node(len(self.graph))
            linked = bool(self.graph.adj[last.id]) or len(self.graph) == 1
            if linked and np.linalg.norm(last.position - p) < self.cfg.rho_oct and abs(wrap(last.yaw - yaw)) < 0.5:
                return last.id
        if len(self.graph):
            self._bridge(p)
        return self.graph.add_node(
            p, yaw, self.t, self.vmap, self.cfg.r_max, drift=self.sim.drift.copy(), depart_floor=self.depart_floor
        )

    def _bridge(self, p: NDArray[np.float64], max_nodes: int = 4) -> None:
        """Add nodes along the flown path when ``p`` cannot link straight back to the last node.

        The chord between two consecutive nodes can clip a corner the flown
        curve went around, which would cut the graph in two. Walking forward,
        each bridge node is the latest logged pose still in straight free
        line of the previous one. Skipped across a loop closure (the estimate
        jumped there).
        """
        g, vmap = self.graph, self.vmap
        prev = g.node(len(g))
        if prev.created_at <= self.last_closure_t:
            return
        cur = prev.position
        if vmap.moves_free(cur, p[None], self.depart_floor)[0]:
            return
        log = self.sim.log
        rows = log[bisect.bisect_right(log, prev.created_at, key=lambda row: row[0]) : -1]
        if not rows:
            return
        est = np.array([row[5:8] for row in rows])
        start = 0
        for _ in range(max_nodes):
            ok = np.flatnonzero(vmap.moves_free(cur, est[start:], self.depart_floor))
            if ok.size == 0 or ok[-1] == 0:
                return
            k = start + int(ok[-1])
            t, tx, ty, tz, tyaw, ex, ey, ez, eyaw = rows[k]
            drift = np.array([ex - tx, ey - ty, ez - tz, wrap(eyaw - tyaw)])
            g.add_node(est[k], eyaw, t, vmap, self.cfg.r_max, drift=drift, depart_floor=self.depart_floor)
            self.triggers["Bridge"] = self.triggers.get("Bridge", 0) + 1
            cur, start = est[k], k + 1
            if start >= len(rows) or vmap.moves_free(cur, p[None], self.depart_floor)[0]:
                return

    def _viewpoint(self, start: NDArray[np.float64], target: NDArray[np.float64]) -> NDArray[np.float64] | None:
        """A free spot near ``target`` from which its unknown side is in view.

        Candidates lie on horizontal rings around the target at the working
        altitude, tried nearest-first in angle to the side opposite the
        target's unknown neighbors. Each must be reachable by a straight
        inflated-free hop from ``start`` and see the target along an
        uninflated free line.
        """
        cfg, vmap = self.cfg, self.vmap
        margin = cfg.inflation + cfg.rho_oct
        z = float(np.clip(target[2], vmap.origin[2] + margin, vmap.upper[2] - margin))
        cell = vmap.cell_of(target).reshape(-1)
        unknown = np.zeros(3)
        for off in np.vstack([np.eye(3, dtype=np.int64), -np.eye(3, dtype=np.int64)]):
            nb = cell + off
            if vmap.in_grid(nb[None])[0] and vmap.cells[tuple(nb)] == CellState.UNKNOWN:
                unknown += off
        if np.hypot(unknown[0], unknown[1]) > 1e-9:
            base = math.atan2(-unknown[1], -unknown[0])
        else:
            away = start[:2] - target[:2]
            base = math.atan2(away[1], away[0]) if np.hypot(*away) > 1e-9 else self.sim.est_yaw + math.pi
        offsets = sorted((k * math.pi / 8 for k in range(-8, 8)), key=lambda a: (abs(a), a))
        tilt = abs(z - target[2]) / math.tan(0.4 * cfg.fov_v)
        for scale in (1.0, 1.6, 0.6):
            dist = max(scale * cfg.view_distance, tilt)
            for a in offsets:
                v = np.array([target[0] + dist * math.cos(base + a), target[1] + dist * math.sin(base + a), z])
                if not vmap.contains(v) or not vmap.points_free(v[None])[0]:
                    continue
                if vmap.move_free(start, v, self.depart_floor) and vmap.is_segment_free(v, target, inflation=0.0):
                    return v
        return None

    def _ahead_free(self, horizon: float | None = None) -> bool:
        """Remaining trajectory over the next horizon keeps its clearance in the current map."""
        traj = self.sim.traj
        if traj is None:
            return True
        cfg, vmap = self.cfg, self.vmap
        horizon = cfg.l_traj / cfg.v_max if horizon is None else horizon
        t0 = self.sim.clock
        t1 = min(traj.total_duration, t0 + horizon)
        if t1 <= t0:
            return True
        n = int(math.ceil((t1 - t0) * cfg.v_max * 1.5 / (0.25 * cfg.rho_oct))) + 2
        pts = np.array([evaluate(traj, t).position for t in np.linspace(t0, t1, n)])
        # planned moves keep r - rho/8 between their samples; near the vehicle
        # its own clearance (at least the departure floor) is enough
        r = cfg.inflation - 0.125 * cfg.rho_oct
        here = self.sim.est_position
        need = np.where(
            np.linalg.norm(pts - here, axis=1) <= cfg.rho_oct,
            np.clip(vmap.clearance(here[None], r)[0], self.depart_floor, r),
            r,
        )
        return bool((vmap.clearance(pts, r) >= need).all())

    def _hold(self, yaw: float | None = None, duration: float | None = None) -> None:
        p, est_yaw = self.sim.odometry()
        self.sim.set_trajectory(hold(p, est_yaw if yaw is None else yaw, duration or self.cfg.dt_plan))

    def _route(self, waypoints: list[NDArray[np.float64]], face: ArrayLike) -> Trajectory:
        """Follow waypoints at v_max, then turn in place to look at ``face``."""
        cfg = self.cfg
        pts = [np.asarray(waypoints[0], dtype=np.float64)]
        for w in waypoints[1:]:
            if np.linalg.norm(w - pts[-1]) > 1e-6:
                pts.append(np.asarray(w, dtype=np.float64))
        end = pts[-1]
        face = np.asarray(face, dtype=np.float64)
        d = face - end
        face_yaw = math.atan2(d[1], d[0]) if np.hypot(d[0], d[1]) > 1e-9 else self.sim.est_yaw
        if len(pts) == 1:
            turn = abs(wrap(face_yaw - self.sim.est_yaw))
            return hold(end, face_yaw, turn / cfg.psi_dot_max + 0.5)
        moving = refine_path(np.array(pts), cfg.v_max)
        last = pts[-1] - pts[-2]
        turn = abs(wrap(face_yaw - math.atan2(last[1], last[0])))
        stop = hold(end, face_yaw, turn / cfg.psi_dot_max + 0.5)
        return Trajectory(moving.segments + stop.segments, terminal_yaw=face_yaw)

    # -- loop closing -----------------------------------------------------

    def _try_loop(self, node_id: int) -> None:
        cfg = self.cfg
        if not cfg.lc_enabled or self.t < self.lc_block_until or self.phase in (Phase.LOOP, Phase.DONE):
            return
        node = self.graph.node(node_id)
        cands = candidates(node, self.graph, cfg.v_max, self.loop_params)
        dec = select(cands, node, self.graph, cfg.v_max, self.loop_params, cfg.psi_dot_max)
        if dec is None:
            return
        self.lc_attempts += 1
        self.lc_events.append(
            (self.t, node_id, dec.target, dec.likelihood, dec.gap, dec.dyaw, dec.path_len)
        )
        self.plan = None
        self.lc = dec
        self._set_phase(Phase.LOOP, f"node {dec.target}")
        self.sim.set_trajectory(dec.trajectory)

    def _finish_loop(self, reason: str) -> None:
        cfg = self.cfg
        target = self.graph.node(self.lc.target)
        if reason == "arrived" and self.sim.closure_ready(target, cfg.arrival_radius, cfg.yaw_tol):
            self.sim.apply_loop_closure(target, cfg.residual_sigma, cfg.arrival_radius, cfg.yaw_tol)
            self.lc_count += 1
            self.last_closure_t = self.t
            self._bubble()
            reason = "closed"
        self.lc = None
        self.lc_block_until = self.t + cfg.lc_cooldown
        self._add_node()
        self._set_phase(Phase.LOCAL, reason)
        self._plan_local()

    # -- planning ---------------------------------------------------------

    def _done_check(self, f_new: NDArray[np.int64]) -> bool:
        if f_new.size:
            return False
        return not self.vmap.cluster_frontier(self.cfg.min_cluster_size)

    def _plan(self) -> None:
        if self.phase == Phase.LOCAL:
            self._plan_local()
        elif self.phase == Phase.GLOBAL:
            self._plan_global_phase()
        elif self.phase == Phase.LOOP:
            if not self._ahead_free():
                self._prune_blocked(self.lc.path)
                self._finish_loop("blocked")
            elif self.sim.trajectory_done:
                self._finish_loop("arrived")

    def _back_off(self) -> bool:
        """Step straight away from the nearest blocked cell if the vehicle sits below the departure floor.

        This happens when a newly seen wall stops a move right next to it.
        Moving along the outward normal of the nearest cell never brings that
        cell closer; every sample of the step must keep the current clearance.
        """
        cfg, vmap = self.cfg, self.vmap
        p, yaw = self.sim.odometry()
        r = cfg.inflation
        c0 = float(vmap.clearance(p[None], r)[0])
        if c0 >= self.depart_floor:
            return False
        q = vmap.nearest_blocked(p, r)
        if q is None:
            return False
        away = p - q
        dist = r - c0 + 0.125 * cfg.rho_oct
        for d in (away, away * np.array([1.0, 1.0, 0.0])):
            n = float(np.linalg.norm(d))
            if n < 1e-9:
                continue
            target = p + d / n * dist
            k = int(math.ceil(dist / (cfg.rho_oct / 32))) + 1
            pts = p + np.linspace(0.0, 1.0, k)[:, None] * (target - p)
            if (vmap.clearance(pts, r) >= c0).all():
                self.sim.set_trajectory(self._route([p, target], p + np.array([math.cos(yaw), math.sin(yaw), 0.0])))
                self.triggers["BackOff"] = self.triggers.get("BackOff", 0) + 1
                return True
        return False

    def _plan_local(self) -> None:
        if self._back_off():
            return
        if self.cfg.planner == "nearest_frontier":
            self._plan_baseline()
            return
        cfg = self.cfg
        f_new = self._take_f_new()
        if self._done_check(f_new):
            self._set_phase(Phase.DONE, "no frontier left")
            return
        p, yaw = self.sim.odometry()
        sm = score(self.fan, p, yaw, self.vmap, f_new, cfg.lam, cfg.gam, self.depart_floor)
        reason = should_go_global(f_new, sm, self.vmap, p, yaw, cfg.fov_h, cfg.fov_v, cfg.r_max)
        if reason is not None:
            self.triggers[reason.value] = self.triggers.get(reason.value, 0) + 1
            if cfg.global_enabled and self._start_global(reason):
                if cfg.debug_scores:
                    self.scores.append(sm.to_json(None))
                return
        track = select_best(self.fan, sm, p, yaw)
        if cfg.debug_scores:
            self.scores.append(sm.to_json((track.i, track.j) if track else None))
        if track is not None:
            self.sim.set_trajectory(track.trajectory)
        else:
            self._hold()

    def _start_global(self, reason: GlobalReason) -> bool:
        node = self._add_node()
        clusters = self.vmap.cluster_frontier(self.cfg.min_cluster_size)
        plan = plan_global(self.graph, clusters, self.vmap, self.cfg.zeta, node, self.banned)
        if plan is None:
            return False
        waypoints = [self.sim.est_position] + [self.graph.node(k).position for k in plan.path[1:]]
        view = self._viewpoint(waypoints[-1], plan.target_point)
        if view is not None:
            waypoints.append(view)
        self.sim.set_trajectory(self._route(waypoints, plan.target_point))
        self.plan = plan
        self.target_cell = int(self.vmap.flat(self.vmap.cell_of(plan.target_point).reshape(-1)))
        self._set_phase(Phase.GLOBAL, reason.value)
        return True

    def _plan_global_phase(self) -> None:
        cfg = self.cfg
        baseline = cfg.planner == "nearest_frontier"
        if baseline:
            f_new = np.zeros(0, dtype=np.int64)
            self._take_f_new()
        else:
            f_new = self._take_f_new()
        free = self._ahead_free()
        if abort_global(f_new, free):
            if not free and not self._prune_blocked(self.plan.path):
                self.banned.add(self.target_cell)
            self._end_global("blocked" if not free else "new frontier")
            return
        if baseline and not self.vmap.frontier.reshape(-1)[self.target_cell]:
            self._end_global("target seen")
            return
        if self.sim.trajectory_done:
            if self.vmap.frontier.reshape(-1)[self.target_cell]:
                self.banned.add(self.target_cell)
            self._end_global("arrived")

    def _prune_blocked(self, path: list[int]) -> int:
        """Drop the edges along ``path`` that the current map no longer lets through.

        Edges are checked once, when their newer node is added. Walls mapped
        later (or mapped again at a drifted pose) can cut them, and A* would
        keep choosing the same blocked route. Returns the number removed.
        """
        g, removed = self.graph, 0
        for a, b in zip(path, path[1:]):
            if b in g.adj[a] and not self.vmap.move_free(g.node(a).position, g.node(b).position, self.depart_floor):
                g.unlink(a, b)
                removed += 1
        return removed

    def _end_global(self, reason: str) -> None:
        self.plan = None
        self._add_node()
        self._set_phase(Phase.LOCAL, reason)
        self._plan_local()

    def _plan_baseline(self) -> None:
        """Greedy nearest-frontier: go to the cluster with the shortest travel, look, repeat."""
        f_new = self._take_f_new()
        if self._done_check(f_new):
            self._set_phase(Phase.DONE, "no frontier left")
            return
        node = self._add_node()
        costs = self.graph.path_costs(node)
        best = None
        for c in self.vmap.cluster_frontier(self.cfg.min_cluster_size):
            picked = paired_target(self.graph, self.vmap, c, self.banned)
            if picked is None or picked[2] not in costs:
                continue
            cell, target, nw = picked
            l_tot = costs[nw] + float(np.linalg.norm(self.graph.node(nw).position - target))
            key = (l_tot, -c.size, c.id)
            if best is None or key < best[0]:
                best = (key, c, nw, cell, target)
        if best is None:
            self._hold()
            return
        (l_tot, _, _), c, nw, cell, target = best
        path, _ = self.graph.astar(node, nw)
        waypoints = [self.sim.est_position] + [self.graph.node(k).position for k in path[1:]]
        view = self._viewpoint(waypoints[-1], target)
        if view is not None:
            waypoints.append(view)
        self.sim.set_trajectory(self._route(waypoints, target))
        self.plan = GlobalPlan(path, c.id, 0.0, l_tot, target, np.asarray(c.centroid), c.size)
        self.target_cell = cell
        self.triggers["NearestFrontier"] = self.triggers.get("NearestFrontier", 0) + 1
        self._set_phase(Phase.GLOBAL, "nearest frontier")

    # -- main loop --------------------------------------------------------

    def run(self) -> tuple[MissionReport, MissionLogs]:
        cfg = self.cfg
        wall0 = time.perf_counter()
        total = self.vmap.n_cells
        self._bubble()
        self._sense()
        self.current_node = self._add_node()
        self._hold()
        next_sense = cfg.sensor_period
        next_node = cfg.t_node
        next_plan = 0.0
        progress_ref, progress_t = self.vmap.known_count(), 0.0
        outcome = None
        eps = 1e-9
        while outcome is None:
            t = self.t
            if t >= next_sense - eps:
                self._sense()
                next_sense += cfg.sensor_period
                known = self.vmap.known_count()
                if known - progress_ref >= cfg.stuck_fraction * total:
                    progress_ref, progress_t = known, t
            if t >= next_node - eps:
                nid = self._add_node()
                next_node += cfg.t_node
                self._try_loop(nid)
            if t >= next_plan - eps or self.sim.trajectory_done:
                self._plan()
                next_plan = t + cfg.dt_plan
            if self.phase == Phase.DONE:
                outcome = Outcome.COMPLETE
                break
            if t - progress_t >= cfg.stuck_timeout or t >= cfg.max_time:
                outcome = Outcome.STUCK
                break
            self.phase_time[self.phase.value] += cfg.dt
            self.sim.step(cfg.dt, cfg.psi_dot_max)
            if self.sim.crashed:
                outcome = Outcome.CRASH
        report = self._report(outcome, time.perf_counter() - wall0)
        logs = MissionLogs(
            self.sim.log, self.lc_events, self.transitions, self.scores, self.graph, self.vmap, self.world, cfg.dt,
            self.known_history,
        )
        return report, logs

    def coverage(self) -> float:
        reach = reachable_free_mask(self.world, self.vmap, self.start)
        n = int(reach.sum())
        if n == 0:
            return 0.0
        seen = (self.vmap.cells == CellState.FREE) & reach
        return float(seen.sum()) / n

    def _report(self, outcome: Outcome, wall: float) -> MissionReport:
        t_end = self.t
        return MissionReport(
            outcome=outcome,
            t_exp=t_end if outcome == Outcome.COMPLETE else math.inf,
            t_end=t_end,
            coverage=self.coverage(),
            rmse=self.sim.rmse(),
            path_len=self.sim.path_length,
            lc_count=self.lc_count,
            lc_attempts=self.lc_attempts,
            n_nodes=len(self.graph),
            n_edges=self.graph.n_edges(),
            phase_time=dict(self.phase_time),
            triggers=dict(self.triggers),
            seed=self.cfg.seed,
            world=self.world.name,
            planner=self.cfg.planner,
            wall_time=wall,
        )


def run(cfg: MissionConfig, world: World | None = None) -> tuple[MissionReport, MissionLogs]:
    if cfg.planner != "real":
        raise ValueError("run() drives the 'real' planner; use run_baseline() for nearest_frontier")
    return Mission(cfg, world).run()


def run_baseline(cfg: MissionConfig, world: World | None = None) -> tuple[MissionReport, MissionLogs]:
    return Mission(cfg.replace(planner="nearest_frontier"), world).run()


def run_any(cfg: MissionConfig, world: World | None = None) -> tuple[MissionReport, MissionLogs]:
    return Mission(cfg, world).run()
