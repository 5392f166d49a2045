from __future__ import annotations

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from real_explore.min_snap import (
    BoundaryConditions,
    DegenerateEdge,
    InvalidParams,
    Polynomial7,
    SingularSystem,
    TimeOutOfRange,
    Trajectory,
    build_peacock,
    evaluate,
    export_csv,
    hold,
    refine_path,
    snap_cost,
    solve_segment,
)

from oracles import discrete_snap_qp

finite = st.floats(-10, 10, allow_nan=False)


def random_bc(rng, T=1.7, axes=1):
    s = rng.normal(size=(4, axes)).squeeze()
    e = rng.normal(size=(4, axes)).squeeze()
    return BoundaryConditions(*s, *e, T)


def boundary_residual(poly, bc):
    """Relative residual with derivative k measured in normalized time (scaled by T**k)."""
    tk = (poly.T ** np.arange(4))[:, None]
    d0 = poly.derivatives(0.0, upto=3) * tk
    d1 = poly.derivatives(poly.T, upto=3) * tk
    want0, want1 = bc.start().T * tk, bc.end().T * tk
    scale = max(1.0, np.abs(want0).max(), np.abs(want1).max())
    return max(np.abs(d0 - want0).max(), np.abs(d1 - want1).max()) / scale


def test_zero_boundary_gives_zero_polynomial():
    p = solve_segment(BoundaryConditions(0, 0, 0, 0, 0, 0, 0, 0, 1.0))
    assert np.all(p.coeffs == 0)


def test_constant_velocity_is_exactly_linear():
    p = solve_segment(BoundaryConditions(0, 1.5, 0, 0, 3, 1.5, 0, 0, 2.0))
    np.testing.assert_allclose(p.coeffs[0], [0, 1.5, 0, 0, 0, 0, 0, 0], atol=1e-12)
    assert snap_cost(p) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("T", [0.0, -1.0, math.inf, math.nan])
def test_bad_duration(T):
    with pytest.raises(SingularSystem):
        solve_segment(BoundaryConditions(0, 0, 0, 0, 1, 0, 0, 0, T))


def test_non_finite_boundary_value():
    with pytest.raises(SingularSystem):
        solve_segment(BoundaryConditions(math.nan, 0, 0, 0, 1, 0, 0, 0, 1.0))


def test_snap_cost_within_one_percent_of_discrete_qp():
    rng = np.random.default_rng(42)
    for _ in range(50):
        bc = random_bc(rng)
        p = solve_segment(bc)
        oracle = discrete_snap_qp(bc.start()[0], bc.end()[0], bc.T)
        assert abs(snap_cost(p) - oracle) <= 0.01 * oracle
        assert boundary_residual(p, bc) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=8, max_size=8), st.floats(0.05, 20.0))
def test_boundary_conditions_reproduced(vals, T):
    bc = BoundaryConditions(*vals, T)
    assert boundary_residual(solve_segment(bc), bc) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=8, max_size=8), st.floats(0.2, 5.0), st.floats(-4, 4))
def test_position_scaling_is_linear(vals, T, c):
    # scale every boundary value: the constraint system is linear in them
    a = solve_segment(BoundaryConditions(*vals, T))
    b = solve_segment(BoundaryConditions(*(c * v for v in vals), T))
    np.testing.assert_allclose(b.coeffs, c * a.coeffs, rtol=1e-9, atol=1e-9 * (1 + np.abs(a.coeffs).max()))


def test_axes_solved_independently():
    rng = np.random.default_rng(1)
    s, e = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    p3 = solve_segment(BoundaryConditions(*s, *e, 2.3))
    for ax in range(3):
        p1 = solve_segment(BoundaryConditions(*s[:, ax], *e[:, ax], 2.3))
        np.testing.assert_allclose(p3.coeffs[ax], p1.coeffs[0])


# -- snap cost -----------------------------------------------------------------


def test_snap_cost_zero_and_linear():
    assert snap_cost(Polynomial7(np.zeros((3, 8)), 2.0)) == 0.0
    c = np.zeros((3, 8))
    c[:, :2] = [[1, 2], [3, -1], [0, 5]]
    assert snap_cost(Polynomial7(c, 3.0)) == 0.0


def test_snap_cost_matches_simpson():
    rng = np.random.default_rng(2)
    for _ in range(10):
        poly = Polynomial7(rng.normal(size=(3, 8)), rng.uniform(0.3, 3.0))
        ts = np.linspace(0, poly.T, 10_001)
        snap = np.array([poly.derivatives(t)[4] for t in ts])
        quad = simpson((snap**2).sum(axis=1), x=ts)
        assert snap_cost(poly) == pytest.approx(quad, rel=1e-6)


# -- peacock -------------------------------------------------------------------


def test_degenerate_fan_is_straight_line():
    fan = build_peacock(math.radians(90), math.radians(67.5), 1, 1, 1, 2.5, 1.5)
    first, second = fan.first_steps[0][0], fan.second_steps[0][0][0]
    T = fan.T
    for t in np.linspace(0, T, 7):
        np.testing.assert_allclose(first.position(t), [1.5 * t, 0, 0], atol=1e-12)
        np.testing.assert_allclose(second.position(t), [2.5 + 1.5 * t, 0, 0], atol=1e-12)
    np.testing.assert_allclose(second.position(T), [5.0, 0, 0], atol=1e-12)


def test_table_one_fan_geometry():
    fan = build_peacock(math.radians(90), math.radians(67.5), 7, 5, 7, l_traj=2.5, v_max=1.5)
    assert fan.T == pytest.approx(2.5 / 1.5)
    ends = fan.endpoints()
    np.testing.assert_allclose(np.linalg.norm(ends, axis=2), 2.5, atol=1e-9)
    for i, th in enumerate(fan.pitch):
        for j, ps in enumerate(fan.yaw):
            d = [math.cos(ps) * math.cos(th), math.sin(ps) * math.cos(th), math.sin(th)]
            np.testing.assert_allclose(ends[i, j] / 2.5, d, atol=1e-9)
            first = fan.first_steps[i][j]
            start = first.derivatives(0.0, 3)
            np.testing.assert_allclose(start[0], 0, atol=1e-12)
            np.testing.assert_allclose(start[1], [1.5, 0, 0], atol=1e-9)
            np.testing.assert_allclose(np.linalg.norm(first.derivatives(fan.T, 1)[1]), 1.5, atol=1e-9)
            end_state = first.derivatives(fan.T, 3)
            for second in fan.second_steps[i][j]:
                np.testing.assert_allclose(second.derivatives(0.0, 3), end_state, atol=1e-9)
    assert fan.yaw[0] == pytest.approx(-math.pi / 4) and fan.yaw[-1] == pytest.approx(math.pi / 4)
    assert fan.pitch[-1] == pytest.approx(math.radians(67.5) / 2)


def test_second_steps_are_level_by_default():
    fan = build_peacock(math.radians(90), math.radians(67.5), 3, 3, 3)
    for i in range(3):
        for j in range(3):
            z_end = fan.first_steps[i][j].position(fan.T)[2]
            for second in fan.second_steps[i][j]:
                assert second.position(fan.T)[2] == pytest.approx(z_end, abs=1e-12)


@pytest.mark.parametrize("sizes", [(2, 5, 7), (7, 0, 7), (7, 5, 4)])
def test_fan_sizes_must_be_odd(sizes):
    with pytest.raises(InvalidParams):
        build_peacock(1.5, 1.0, *sizes)


def test_fan_precompute_timing():
    build_peacock(math.radians(90), math.radians(67.5))  # warm caches
    t0 = time.perf_counter()
    build_peacock(math.radians(90), math.radians(67.5), 7, 5, 7, 2.5, 1.5)
    assert time.perf_counter() - t0 < 0.05


# -- refinement ----------------------------------------------------------------


def test_refine_collinear_pair():
    traj = refine_path([[0, 0, 1], [3, 0, 1]], v_max=1.5)
    assert len(traj.segments) == 1
    assert traj.total_duration == pytest.approx(2.0)
    for t in np.linspace(0, 2, 9):
        s = evaluate(traj, t)
        np.testing.assert_allclose(s.position, [1.5 * t, 0, 1], atol=1e-12)
        np.testing.assert_allclose(s.velocity, [1.5, 0, 0], atol=1e-12)


def test_refine_l_shape_plug_back():
    wp = np.array([[0.0, 0, 1], [2.0, 0, 1], [2.0, 3.0, 1]])
    traj = refine_path(wp, v_max=1.5)
    assert len(traj.segments) == 2
    for q, seg in enumerate(traj.segments):
        u = (wp[q + 1] - wp[q]) / np.linalg.norm(wp[q + 1] - wp[q])
        assert seg.T == pytest.approx(np.linalg.norm(wp[q + 1] - wp[q]) / 1.5)
        a, b = seg.derivatives(0.0, 3), seg.derivatives(seg.T, 3)
        np.testing.assert_allclose(a[0], wp[q], atol=1e-9)
        np.testing.assert_allclose(b[0], wp[q + 1], atol=1e-9)
        np.testing.assert_allclose(a[1], 1.5 * u, atol=1e-9)
        np.testing.assert_allclose(b[1], 1.5 * u, atol=1e-9)
        np.testing.assert_allclose(a[2:], 0, atol=1e-9)
        np.testing.assert_allclose(b[2:], 0, atol=1e-9)
    joint = traj.starts[1]
    np.testing.assert_allclose(evaluate(traj, joint - 1e-9).position, evaluate(traj, joint).position, atol=1e-8)


def test_refine_collinear_joints_are_c3():
    traj = refine_path([[0, 0, 0], [1, 1, 0], [2.5, 2.5, 0], [3, 3, 0]], v_max=2.0)
    for k in range(1, 3):
        end = traj.segments[k - 1].derivatives(traj.segments[k - 1].T, 3)
        start = traj.segments[k].derivatives(0.0, 3)
        np.testing.assert_allclose(end, start, atol=1e-9)


def test_refined_speed_bound():
    rng = np.random.default_rng(8)
    for _ in range(30):
        wp = np.cumsum(rng.normal(0, 2.0, (rng.integers(2, 6), 3)), axis=0)
        traj = refine_path(wp, v_max=1.5)
        ts = np.arange(0.0, traj.total_duration, 0.001)
        speed = max(np.linalg.norm(evaluate(traj, t).velocity) for t in ts)
        assert speed <= 1.2 * 1.5


def test_refine_rejects_repeated_waypoint():
    with pytest.raises(DegenerateEdge):
        refine_path([[0, 0, 0], [0, 0, 0], [1, 0, 0]], 1.0)


# -- evaluation ----------------------------------------------------------------


def test_evaluate_start_matches_boundary():
    rng = np.random.default_rng(3)
    bc = random_bc(rng, T=2.0, axes=3)
    traj = Trajectory([solve_segment(bc)])
    s = evaluate(traj, 0.0)
    np.testing.assert_allclose(s.position, bc.p0)
    np.testing.assert_allclose(s.velocity, bc.v0)
    np.testing.assert_allclose(s.acceleration, bc.a0)
    np.testing.assert_allclose(s.jerk, bc.j0)


def test_evaluate_yaw_from_velocity_and_override():
    traj = refine_path([[0, 0, 0], [0, 2, 0]], 1.0)
    assert evaluate(traj, 0.5).yaw == pytest.approx(math.pi / 2)
    traj.fixed_yaw = 0.3
    assert evaluate(traj, 0.5).yaw == 0.3


def test_evaluate_out_of_range():
    traj = refine_path([[0, 0, 0], [3, 0, 0]], 1.5)
    with pytest.raises(TimeOutOfRange):
        evaluate(traj, 2.5)
    with pytest.raises(TimeOutOfRange):
        evaluate(traj, -0.1)


def test_derivative_chain_matches_finite_differences():
    rng = np.random.default_rng(4)
    h = 1e-5
    for _ in range(5):
        segs = []
        start = rng.normal(size=(4, 3))
        for _ in range(2):
            end = rng.normal(size=(4, 3))
            segs.append(solve_segment(BoundaryConditions(*start, *end, rng.uniform(0.8, 2.0))))
            start = end
        traj = Trajectory(segs)
        for t in rng.uniform(h, traj.total_duration - h, 20):
            k, tl = traj.locate(t)
            if tl < 2 * h or traj.segments[k].T - tl < 2 * h:
                continue
            s0, sp, sm = evaluate(traj, t), evaluate(traj, t + h), evaluate(traj, t - h)
            for lower, upper in (("position", "velocity"), ("velocity", "acceleration"),
                                 ("acceleration", "jerk"), ("jerk", "snap")):
                fd = (getattr(sp, lower) - getattr(sm, lower)) / (2 * h)
                want = getattr(s0, upper)
                np.testing.assert_allclose(fd, want, rtol=1e-6, atol=1e-6 * (1 + np.abs(want).max()))


def test_hold_trajectory():
    traj = hold([1, 2, 3], 0.7, 1.5)
    s = evaluate(traj, 1.0)
    np.testing.assert_allclose(s.position, [1, 2, 3])
    np.testing.assert_allclose(s.velocity, 0)
    assert s.yaw == 0.7


def test_trajectory_csv(tmp_path):
    traj = refine_path([[0, 0, 0], [3, 0, 0]], 1.5)
    path = tmp_path / "traj.csv"
    export_csv(traj, path, period=0.5)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "t,x,y,z,vx,vy,vz,yaw"
    assert len(rows) == 1 + 5
    assert rows[-1].startswith("2.0000,3.000000,0.000000,0.000000,1.500000")
