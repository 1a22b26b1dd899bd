"""Scenario configuration: YAML schema, validation and bundled scenarios.

Schema (all lengths in meters, angles in radians, times in seconds)::

    name: paper_4robots
    region: [[x, y], ...]              # convex polygon, any orientation
    density: {kind: uniform, value: 1.0}
    robots:                            # or {random: n, v: 0.16}
      - {x: 0.5, y: 0.4, theta: 0.0, v: 0.16}
    params: {gamma: 1.0, sigma: 0.5, alpha: 0.1, omega0: 0.536, xi_max: 2.0}
    mode: event                        # continuous | event | self
    dt: 0.001
    duration: 120.0
    sample_every: 100
    seed: 0
    strict: false
    refine_crossing: false
    converge_tol: 0.05
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .control import MODES, ControllerParams
from .density import DensityError, UniformDensity, density_from_dict
from .dynamics import RobotState, virtual_center
from .geometry import ConvexPolygon, GeometryError

DEFAULT_PARAMS = {"gamma": 1.0, "sigma": 0.5, "alpha": 0.1, "omega0": 0.536, "xi_max": 2.0}
BUNDLED = ("paper_4robots",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    region: ConvexPolygon
    robots: tuple
    params: ControllerParams
    density: object = field(default_factory=UniformDensity)
    dt: float = 1e-3
    duration: float = 120.0
    sample_every: int = 100
    seed: int = 0
    name: str = "scenario"
    strict: bool = False
    refine_crossing: bool = False
    converge_tol: float = 0.05

    @property
    def mode(self) -> str:
        return self.params.mode

    @property
    def n(self) -> int:
        return len(self.robots)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def validate(self) -> ScenarioConfig:
        if not self.robots:
            raise ConfigError("at least one robot is required")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError("duration must be positive")
        if self.n_steps < 1:
            raise ConfigError("duration shorter than one step")
        if not (isinstance(self.sample_every, int) and self.sample_every >= 1):
            raise ConfigError("sample_every must be a positive integer")
        if len(self.params.alpha) not in (1, self.n):
            raise ConfigError(f"alpha must be a scalar or a list of {self.n} values")
        if not self.converge_tol > 0:
            raise ConfigError("converge_tol must be positive")
        for k, r in enumerate(self.robots):
            z = virtual_center(r, self.params.omega0)
            if not self.region.contains(z, tol=0.0):
                raise ConfigError(
                    f"robot {k}: initial virtual center ({z.real:.4f}, {z.imag:.4f}) lies outside the region")
        return self

    def with_overrides(self, **kw) -> ScenarioConfig:
        """Return a validated copy; controller keys go into ``params``."""
        pkeys = {"gamma", "sigma", "alpha", "omega0", "xi_max", "mode"}
        pk = {k: v for k, v in kw.items() if k in pkeys and v is not None}
        ck = {k: v for k, v in kw.items() if k not in pkeys and v is not None}
        try:
            params = replace(self.params, **pk) if pk else self.params
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return replace(self, params=params, **ck).validate()

    def to_dict(self) -> dict:
        p = self.params
        alpha = p.alpha[0] if len(p.alpha) == 1 else list(p.alpha)
        return {
            "name": self.name,
            "region": self.region.to_list(),
            "density": self.density.to_dict(),
            "robots": [{"x": r.x, "y": r.y, "theta": r.theta, "v": r.v} for r in self.robots],
            "params": {"gamma": p.gamma, "sigma": p.sigma, "alpha": alpha,
                       "omega0": p.omega0, "xi_max": p.xi_max},
            "mode": p.mode,
            "dt": self.dt,
            "duration": self.duration,
            "sample_every": self.sample_every,
            "seed": self.seed,
            "strict": self.strict,
            "refine_crossing": self.refine_crossing,
            "converge_tol": self.converge_tol,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _random_robots(spec: dict, region: ConvexPolygon, omega0: float, seed: int) -> list:
    n = int(spec["random"])
    v = float(spec.get("v", 0.16))
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = region.bounds()
    robots = []
    while len(robots) < n:
        x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
        th = rng.uniform(-math.pi, math.pi)
        r = RobotState(float(x), float(y), float(th), v)
        if region.contains(virtual_center(r, omega0), tol=0.0):
            robots.append(r)
    return robots


def config_from_dict(d: dict) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    known = {"name", "region", "density", "robots", "params", "mode", "dt", "duration",
             "sample_every", "seed", "strict", "refine_crossing", "converge_tol"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    try:
        region = ConvexPolygon([complex(float(x), float(y)) for x, y in d["region"]])
        density = density_from_dict(d.get("density", {"kind": "uniform", "value": 1.0}))
        pd = {**DEFAULT_PARAMS, **(d.get("params") or {})}
        unknown = set(pd) - set(DEFAULT_PARAMS)
        if unknown:
            raise ConfigError(f"unknown params: {sorted(unknown)}")
        mode = d.get("mode", "event")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        params = ControllerParams(float(pd["gamma"]), float(pd["sigma"]), pd["alpha"],
                                  float(pd["omega0"]), float(pd["xi_max"]), mode)
        seed = int(d.get("seed", 0))
        rs = d["robots"]
        if isinstance(rs, dict):
            robots = _random_robots(rs, region, params.omega0, seed)
        else:
            robots = [RobotState(float(r["x"]), float(r["y"]), float(r.get("theta", 0.0)),
                                 float(r["v"])) for r in rs]
        cfg = ScenarioConfig(
            region=region, robots=tuple(robots), params=params, density=density,
            dt=float(d.get("dt", 1e-3)), duration=float(d.get("duration", 120.0)),
            sample_every=d.get("sample_every", 100), seed=seed,
            name=str(d.get("name", "scenario")), strict=bool(d.get("strict", False)),
            refine_crossing=bool(d.get("refine_crossing", False)),
            converge_tol=float(d.get("converge_tol", 0.05)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, GeometryError, DensityError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return cfg.validate()


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return config_from_dict(data)


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise ConfigError(f"no bundled scenario named {name!r}")
    return resources.files("cvt_sim.scenarios").joinpath(f"{name}.yaml").read_text()


def load_config(path_or_name: str | Path) -> ScenarioConfig:
    """Load a YAML file, or a bundled scenario by name."""
    p = Path(path_or_name)
    if not p.exists() and str(path_or_name) in BUNDLED:
        return parse_config(bundled_text(str(path_or_name)))
    return parse_config(p.read_text())
