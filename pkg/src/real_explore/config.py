"""Mission configuration and its flat ``key: value`` file format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass
class MissionConfig:
    world: str | None = None
    seed: int = 0
    planner: str = "real"  # or "nearest_frontier"
    lc_enabled: bool = True
    global_enabled: bool = True

    # vehicle and sensor
    v_max: float = 1.5
    psi_dot_max: float = 1.0
    r_max: float = 6.0
    l_traj: float = 2.5
    fov_h_deg: float = 90.0
    fov_v_deg: float = 67.5
    n_rays_h: int = 64
    n_rays_v: int = 48
    body_radius: float = 0.2

    # map
    rho_oct: float = 0.3
    inflation: float = 0.3
    min_cluster_size: int = 5
    view_distance: float = 1.0  # standoff from a global target

    # fan and scoring
    n_yaw: int = 7
    n_pitch: int = 5
    n_yaw2: int = 7
    lam: float = 1.0
    gam: float = 1.0
    zeta: float = 0.25

    # loop closing
    c_tau: float = 30.0
    kappa0: float = 0.2
    kappa1: float = 0.08
    lc_cooldown: float = 10.0
    arrival_radius: float = 0.5
    yaw_tol: float = 0.3
    residual_sigma: float = 0.0

    # odometry drift
    sigma_xy: float = 0.008
    sigma_z: float = 0.004
    sigma_yaw: float = 0.02
    yaw_couple: bool = True

    # cadences and limits
    dt: float = 0.02
    dt_plan: float = 0.33
    t_node: float = 1.0
    sensor_period: float = 0.2
    stuck_timeout: float = 300.0
    stuck_fraction: float = 0.001
    max_time: float = 3600.0
    start_jitter_xy: float = 0.3
    start_jitter_yaw: float = math.pi / 4
    debug_scores: bool = False

    def __post_init__(self) -> None:
        self.validate()

    @property
    def fov_h(self) -> float:
        return math.radians(self.fov_h_deg)

    @property
    def fov_v(self) -> float:
        return math.radians(self.fov_v_deg)

    def validate(self) -> None:
        if self.planner not in ("real", "nearest_frontier"):
            raise ConfigError(f"unknown planner {self.planner!r}")
        for name in ("v_max", "psi_dot_max", "r_max", "l_traj", "rho_oct", "dt", "dt_plan", "t_node", "sensor_period"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.l_traj < self.r_max:
            raise ConfigError("l_traj must be shorter than r_max")
        if min(self.sigma_xy, self.sigma_z, self.sigma_yaw) < 0:
            raise ConfigError("drift scales must be non-negative")
        for name in ("n_yaw", "n_pitch", "n_yaw2"):
            n = getattr(self, name)
            if n < 1 or n % 2 == 0:
                raise ConfigError(f"{name} must be odd and >= 1")

    def replace(self, **kw: Any) -> MissionConfig:
        return dataclasses.replace(self, **kw)

    def drift_off(self) -> MissionConfig:
        return self.replace(sigma_xy=0.0, sigma_z=0.0, sigma_yaw=0.0)

    def to_text(self) -> str:
        return "".join(f"{f.name}: {getattr(self, f.name)}\n" for f in dataclasses.fields(self))


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name: str, kind: Any, raw: str) -> Any:
    kind = str(kind)
    if "bool" in kind:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in kind and "float" not in kind:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if "float" in kind:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if raw.lower() in ("none", ""):
        return None
    return raw


def parse_config(text: str, base: MissionConfig | None = None) -> MissionConfig:
    fields = {f.name: f.type for f in dataclasses.fields(MissionConfig)}
    values: dict[str, Any] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ConfigError(f"line {n}: expected 'key: value'")
        key, val = (s.strip() for s in line.split(":", 1))
        if key not in fields:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _convert(key, fields[key], val)
    base = base or MissionConfig()
    return base.replace(**values)


def load_config(path: str | Path, base: MissionConfig | None = None) -> MissionConfig:
    return parse_config(Path(path).read_text(), base)
