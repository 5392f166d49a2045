from __future__ import annotations

import math

import pytest

from real_explore.config import ConfigError, MissionConfig, load_config, parse_config


def test_defaults_are_the_small_setting():
    c = MissionConfig()
    assert (c.r_max, c.l_traj, c.v_max, c.rho_oct) == (6.0, 2.5, 1.5, 0.3)
    assert (c.n_yaw, c.n_pitch, c.n_yaw2) == (7, 5, 7)
    assert c.fov_h == pytest.approx(math.pi / 2)
    assert c.stuck_timeout == 300.0


def test_parse_converts_by_field_type():
    c = parse_config(
        """
        # comment
        v_max: 2.5
        n_yaw: 5   # inline comment
        lc_enabled: off
        planner: nearest_frontier
        world: worlds/maze_small.world
        """
    )
    assert c.v_max == 2.5 and isinstance(c.v_max, float)
    assert c.n_yaw == 5 and isinstance(c.n_yaw, int)
    assert c.lc_enabled is False
    assert c.planner == "nearest_frontier"
    assert c.world == "worlds/maze_small.world"


def test_parse_keeps_base_for_unset_keys():
    base = MissionConfig(seed=7, v_max=0.75)
    c = parse_config("zeta: 0.5\n", base)
    assert (c.seed, c.v_max, c.zeta) == (7, 0.75, 0.5)


@pytest.mark.parametrize(
    "text",
    [
        "warp_speed: 9\n",
        "v_max 1.5\n",
        "v_max: fast\n",
        "n_yaw: 7.5\n",
        "lc_enabled: maybe\n",
        "l_traj: 7\n",  # must stay below r_max
        "n_pitch: 4\n",
        "v_max: 0\n",
        "planner: random\n",
        "sigma_xy: -0.1\n",
    ],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_round_trip_through_text(tmp_path):
    c = MissionConfig(seed=3, v_max=2.5, lc_enabled=False, world="x.world")
    path = tmp_path / "c.cfg"
    path.write_text(c.to_text())
    assert load_config(path) == c


def test_drift_off_zeroes_only_noise():
    c = MissionConfig(v_max=2.5).drift_off()
    assert (c.sigma_xy, c.sigma_z, c.sigma_yaw) == (0.0, 0.0, 0.0)
    assert c.v_max == 2.5
