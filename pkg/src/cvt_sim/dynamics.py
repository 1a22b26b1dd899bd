"""Constant-speed unicycle kinematics and the virtual-center transform."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

STRAIGHT_EPS = 1e-12
# turning radius (m) below which the chord follows the rounded heading change
TIGHT_RADIUS = 1.0


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError("forward speed must be positive")
        if not math.isfinite(self.theta):
            raise ValueError("heading must be finite")

    @property
    def position(self) -> complex:
        return complex(self.x, self.y)

    @property
    def velocity(self) -> complex:
        """``v * e^{i theta}``."""
        return self.v * cmath.exp(1j * self.theta)


@dataclass(frozen=True)
class WorldParams:
    omega0: float

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")


def virtual_center(state: RobotState, w: WorldParams | float) -> complex:
    omega0 = w.omega0 if isinstance(w, WorldParams) else w
    return state.position + (state.v / omega0) * 1j * cmath.exp(1j * state.theta)


def orbit_center(state: RobotState, u: float) -> complex:
    if u == 0:
        raise ValueError("infinite turning radius")
    return state.position + (state.v / u) * 1j * cmath.exp(1j * state.theta)


def propagate(state: RobotState, u: float, dt: float) -> RobotState:
    """Exact flow over ``dt`` with the turn rate held at ``u``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    v, th = state.v, state.theta
    if abs(u) > STRAIGHT_EPS:
        # chord of the arc in product form, stable for small u*dt
        th1 = th + u * dt
        if v <= TIGHT_RADIUS * abs(u):
            # turn by exactly the stored heading change so the orbit center
            # does not pick up the heading's rounding error step after step
            half = 0.5 * (th1 - th)
            chord = 2.0 * (v / u) * math.sin(half)
        else:
            half = 0.5 * u * dt
            chord = v * dt * (math.sin(half) / half if half != 0.0 else 1.0)
        x = state.x + chord * math.cos(th + half)
        y = state.y + chord * math.sin(th + half)
    else:
        th1 = th
        x = state.x + v * math.cos(th) * dt
        y = state.y + v * math.sin(th) * dt
    return replace(state, x=x, y=y, theta=wrap_angle(th1))


def virtual_center_velocity(state: RobotState, u: float, w: WorldParams | float) -> complex:
    omega0 = w.omega0 if isinstance(w, WorldParams) else w
    return state.velocity * (1.0 - u / omega0)
