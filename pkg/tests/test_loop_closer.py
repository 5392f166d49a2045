from __future__ import annotations

import math

import numpy as np
import pytest

from real_explore.explore_graph import ExploreGraph
from real_explore.loop_closer import LoopParams, candidates, likelihood, select, wrap
from real_explore.min_snap import evaluate
from real_explore.voxel_map import VoxelMap

from oracles import brute_candidates
from scenarios import square_loop

P = LoopParams()  # tau(1.5) = 20 nodes, kappa(1.5) = 0.32


# -- likelihood --------------------------------------------------------------------


def test_params_defaults():
    assert P.tau(1.5) == pytest.approx(20.0)
    assert P.kappa(1.5) == pytest.approx(0.32)
    with pytest.raises(ValueError):
        LoopParams(c_tau=0.0)


def test_likelihood_examples():
    params = LoopParams(c_tau=30.0)  # tau = 20 at v = 1.5
    assert likelihood(31, 1, 0.3, 0.3, 1.5, params) == 1.0
    assert likelihood(11, 1, 0.0, 0.0, 1.5, params) == 0.0
    assert likelihood(41, 1, math.pi, 0.0, 1.5, params) == pytest.approx(0.04321391826, abs=1e-10)
    # gate opens exactly at tau
    assert likelihood(21, 1, 0.0, 0.0, 1.5, params) == 1.0


def test_likelihood_range_and_wrap():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        K = int(rng.integers(2, 200))
        k = int(rng.integers(1, K))
        a, b = rng.uniform(-10, 10, 2)
        f = likelihood(K, k, a, b, 1.5, P)
        assert 0.0 <= f <= 1.0
        assert likelihood(K, k, a + 2 * math.pi, b, 1.5, P) == pytest.approx(f, abs=1e-12)
    assert wrap(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


# -- candidates --------------------------------------------------------------------


def test_predecessor_only_gives_nothing():
    vmap = VoxelMap((0, 0, 0), (20, 20, 10), resolution=0.3)
    vmap.cells[:] = 1
    g = ExploreGraph()
    g.add_node([1, 1, 1], 0.0, 0.0, vmap, 6.0)
    g.add_node([2, 1, 1], 0.0, 1.0, vmap, 6.0)
    assert candidates(g.node(2), g, 1.5, P) == []


def test_far_nodes_give_nothing():
    vmap = VoxelMap((0, 0, 0), (200, 10, 10), resolution=0.3)
    vmap.cells[:] = 1
    g = ExploreGraph()
    for k in range(30):
        g.add_node([1 + 2.0 * k, 1, 1], 0.0, float(k), vmap, 6.0)
    K = g.node(30)
    near = candidates(K, g, 1.5, P)
    assert near == []  # within 6 m only the last 3 nodes, all inside the gate


def test_square_loop_candidates_match_oracle():
    g, _ = square_loop()
    for K in range(2, len(g) + 1):
        got = candidates(g.node(K), g, 1.5, P)
        assert got == brute_candidates(g, K, 1.5, P)
        for k in got:
            assert K - k >= P.tau(1.5)
            assert np.linalg.norm(g.node(k).position - g.node(K).position) <= P.r_max
    last = len(g)
    assert 1 in candidates(g.node(last), g, 1.5, P)


# -- select ------------------------------------------------------------------------


def test_select_empty():
    g, _ = square_loop()
    assert select([], g.node(len(g)), g, 1.5, P) is None


def test_select_prefers_higher_likelihood():
    vmap = VoxelMap((0, 0, 0), (40, 10, 10), resolution=0.3)
    vmap.cells[:] = 1
    g = ExploreGraph()
    g.add_node([1, 1, 1], 0.0, 0.0, vmap, 20.0)  # f = 1.0
    g.add_node([1.5, 1, 1], -math.log(0.6), 1.0, vmap, 20.0)  # f = 0.6
    for k in range(25):
        g.add_node([2 + 0.2 * k, 1, 1], 0.0, 2.0 + k, vmap, 20.0)
    K = g.node(len(g))
    dec = select([2, 1], K, g, 1.5, LoopParams(r_max=20.0))
    assert dec.target == 1
    assert dec.likelihood == pytest.approx(1.0)


def test_square_loop_selection_matches_argmax():
    g, _ = square_loop()
    K = g.node(len(g))
    cands = candidates(K, g, 1.5, P)
    dec = select(cands, K, g, 1.5, P)
    best = max(cands, key=lambda k: (likelihood(K.id, k, K.yaw, g.node(k).yaw, 1.5, P), K.id - k, -k))
    assert dec.target == best == 1
    assert dec.likelihood > P.kappa(1.5)
    assert dec.terminal_yaw == g.node(1).yaw
    assert dec.gap == K.id - 1
    # trajectory starts at n_K, ends at the target, and holds the target yaw
    tr = dec.trajectory
    np.testing.assert_allclose(evaluate(tr, 0.0).position, K.position, atol=1e-9)
    np.testing.assert_allclose(tr.end_position(), g.node(1).position, atol=1e-9)
    assert evaluate(tr, tr.total_duration).yaw == g.node(1).yaw
    for a, b in zip(dec.path, dec.path[1:]):
        assert b in g.adj[a]


def test_smaller_yaw_error_wins_over_larger_gap():
    vmap = VoxelMap((0, 0, 0), (40, 10, 10), resolution=0.3)
    vmap.cells[:] = 1
    g = ExploreGraph()
    g.add_node([1, 1, 1], 0.4, 0.0, vmap, 20.0)
    g.add_node([1, 2, 1], -0.2, 0.0, vmap, 20.0)
    for k in range(25):
        g.add_node([2 + 0.2 * k, 1.5, 1], 0.0, 1.0 + k, vmap, 20.0)
    K = g.node(len(g))
    dec = select([1, 2], K, g, 1.5, LoopParams(r_max=20.0))
    assert dec.target == 2


def test_likelihood_decreases_with_yaw_error_at_fixed_gap():
    dy = np.linspace(0, math.pi, 50)
    f = [likelihood(60, 10, d, 0.0, 1.5, P) for d in dy]
    assert all(a > b for a, b in zip(f, f[1:]))
