"""Coverage control laws and the event/self triggering rules.

Controllers only see a robot's :class:`LocalView`: its own exact state plus
the last broadcast of every other robot.  The event rule compares the held
input with the would-be continuous input; the self rule schedules its next
update from a first-order estimate of the input drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import RobotState, virtual_center, virtual_center_velocity
from .geometry import (
    ConvexPolygon,
    GeometryError,
    VoronoiDiagram,
    cell_moments,
    cell_neighbors,
    centroid_jacobians,
    check_generators,
    cross,
    dot,
    voronoi_cell,
)

MODES = ("continuous", "event", "self")
UDOT_EPS = 1e-12


@dataclass(frozen=True)
class ControllerParams:
    gamma: float = 1.0
    sigma: float = 0.5
    alpha: tuple = (0.1,)
    omega0: float = 0.536
    xi_max: float = 2.0
    mode: str = "event"

    def __post_init__(self):
        alpha = (self.alpha,) if isinstance(self.alpha, (int, float)) else tuple(self.alpha)
        object.__setattr__(self, "alpha", tuple(float(a) for a in alpha))
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.alpha or not all(0 < a < 1 for a in self.alpha):
            raise ValueError("every alpha must lie in (0, 1)")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.xi_max > 0:
            raise ValueError("xi_max must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def alpha_of(self, k: int) -> float:
        return self.alpha[k] if len(self.alpha) > 1 else self.alpha[0]

    def mu(self, t: float, k: int) -> float:
        return self.gamma * self.omega0 * math.exp(-self.alpha_of(k) * t)


@dataclass(frozen=True)
class Snapshot:
    """What robot k last heard from robot j."""

    z: complex
    theta: float
    u: float
    v: float
    t: float

    def velocity_at(self, t: float, omega0: float) -> complex:
        # heading extrapolated under the broadcast (held) input
        th = self.theta + self.u * (t - self.t)
        return virtual_center_velocity(RobotState(0.0, 0.0, th, self.v), self.u, omega0)


@dataclass(frozen=True)
class LocalView:
    k: int
    t: float
    state: RobotState
    snapshots: dict  # j -> Snapshot
    region: ConvexPolygon
    phi: object
    omega0: float

    def __post_init__(self):
        if any(s.t > self.t + 1e-12 for s in self.snapshots.values()):
            raise ValueError("snapshot from the future")

    @property
    def z(self) -> complex:
        return virtual_center(self.state, self.omega0)

    def generators(self) -> tuple[list[int], list[complex]]:
        ids = [self.k] + sorted(self.snapshots)
        return ids, [self.z] + [self.snapshots[j].z for j in ids[1:]]


@dataclass(frozen=True)
class CentroidInfo:
    centroid: complex
    mass: float
    cell: ConvexPolygon
    neighbors: frozenset


@dataclass(frozen=True)
class TriggerState:
    t_last: float = 0.0
    u_held: float = 0.0
    e: float = 0.0
    next_deadline: float = math.inf
    trigger_count: int = 0
    last_udot: float = 0.0
    neighbors: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class Diagnostics:
    g: float
    psi: float
    O: float
    f: float


def local_centroid(view: LocalView) -> CentroidInfo:
    ids, gens = view.generators()
    check_generators(gens)
    cell = voronoi_cell(gens, view.region, 0)
    if cell is None:
        raise GeometryError(f"robot {view.k} has an empty cell")
    m = cell_moments(cell, view.phi)
    nbrs = frozenset(ids[i] for i in cell_neighbors(gens, cell, 0))
    return CentroidInfo(m.centroid, m.mass, cell, nbrs)


def g_aux(z: complex, c: complex, state: RobotState) -> float:
    return dot(z - c, state.velocity)


def diagnostics(z: complex, c: complex, state: RobotState, f: float = math.nan) -> Diagnostics:
    d = z - c
    hv = state.velocity
    g = dot(d, hv)
    psi = math.atan2(abs(cross(d, hv)), g) if d != 0 else 0.0
    return Diagnostics(g, psi, abs(d) * abs(hv), f)


def control_law(g: float, params: ControllerParams) -> float:
    return params.omega0 + params.gamma * params.omega0 * g


def control_input(view: LocalView, params: ControllerParams, info: CentroidInfo | None = None) -> float:
    info = info or local_centroid(view)
    return control_law(g_aux(view.z, info.centroid, view.state), params)


def trigger_function(e: float, g: float, t: float, params: ControllerParams, k: int) -> float:
    return abs(e) - params.sigma * params.gamma * params.omega0 * abs(g) - params.mu(t, k)


def threshold(g: float, t: float, params: ControllerParams, k: int) -> float:
    return params.sigma * params.gamma * params.omega0 * abs(g) + params.mu(t, k)


def event_step(k: int, t: float, u_fresh: float, g_fresh: float,
               trig: TriggerState, params: ControllerParams) -> tuple[bool, TriggerState]:
    """Monitor robot ``k`` at time ``t``.

    ``u_fresh`` and ``g_fresh`` come from the current (fresh) neighbour
    states.  On a fire the mismatch is reset and the held input must then be
    refreshed from the robot's snapshots with :func:`refresh_input`.
    """
    e = trig.u_held - u_fresh
    f = trigger_function(e, g_fresh, t, params, k)
    if f >= 0:
        return True, replace(trig, e=0.0, t_last=t, trigger_count=trig.trigger_count + 1)
    return False, replace(trig, e=e)


def u_dot(view: LocalView, u_held: float, params: ControllerParams,
          info: CentroidInfo | None = None) -> float:
    """Time derivative of the control law at an update instant, with every
    robot's turn rate frozen at its held/broadcast value."""
    info = info or local_centroid(view)
    ids, gens = view.generators()
    omega0 = params.omega0
    st = view.state
    hv = st.velocity
    zdot_k = virtual_center_velocity(st, u_held, omega0)
    diagram = VoronoiDiagram(tuple(gens), view.region, (), _local_adjacency(ids, info))
    jac = centroid_jacobians(diagram, view.phi, 0)
    cdot = jac[0] @ np.array([zdot_k.real, zdot_k.imag])
    for idx, j in enumerate(ids[1:], start=1):
        if j in info.neighbors:
            zj = view.snapshots[j].velocity_at(view.t, omega0)
            cdot = cdot + jac[idx] @ np.array([zj.real, zj.imag])
    c_dot = complex(cdot[0], cdot[1])
    term1 = dot(zdot_k - c_dot, hv)
    term2 = dot(view.z - info.centroid, 1j * u_held * hv)
    return params.gamma * omega0 * (term1 + term2)


def _local_adjacency(ids, info: CentroidInfo) -> tuple:
    nb = frozenset(i for i, j in enumerate(ids) if j in info.neighbors)
    return (nb,) + tuple(frozenset() for _ in ids[1:])


def xi_next(u_held: float, udot: float, t_l: float, params: ControllerParams, k: int) -> float:
    if abs(udot) <= UDOT_EPS:
        return params.xi_max
    mu = params.mu(t_l, k)
    num = params.sigma * abs(u_held - params.omega0) + mu
    xi = num / ((1.0 - params.sigma) * abs(udot))
    return min(xi, soundness_bound(u_held - params.omega0, udot, mu, params.sigma), params.xi_max)


def soundness_bound(d: float, udot: float, mu: float, sigma: float) -> float:
    """Smallest xi > 0 where ``|udot| xi = sigma|udot*xi + d| + mu``.

    When udot and d share a sign this is the closed-form interval above;
    when the input is heading back towards w0 the root comes earlier and
    the deadline is clipped to it.  Returns inf if there is no root.
    """
    a = abs(udot)
    kink = -d / udot if udot != 0.0 else -1.0
    pieces = [(0.0, kink), (kink, math.inf)] if kink > 0.0 else [(0.0, math.inf)]
    for lo, hi in pieces:
        s = 1.0 if udot * (lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi)) + d >= 0.0 else -1.0
        # on this piece F(xi) = sigma*s*(udot*xi + d) + mu - a*xi
        slope = sigma * s * udot - a
        if slope < 0.0:
            root = (sigma * s * d + mu) / -slope
            if lo <= root <= hi:
                return root
    return math.inf


def refresh_input(view: LocalView, trig: TriggerState, params: ControllerParams,
                  *, own_fire: bool) -> TriggerState:
    """Recompute the held input from the view after an own fire or a
    neighbour update, and refresh the robot's neighbour estimate."""
    info = local_centroid(view)
    u = control_input(view, params, info)
    trig = replace(trig, u_held=u, neighbors=info.neighbors)
    if own_fire:
        trig = replace(trig, e=0.0)
    return trig


def reschedule(view: LocalView, trig: TriggerState, params: ControllerParams) -> tuple[TriggerState, float]:
    """Self mode: slope of the input at ``view.t`` and the next deadline.

    Returns the new trigger state and the inter-execution time used.
    """
    ud = u_dot(view, trig.u_held, params)
    xi = xi_next(trig.u_held, ud, view.t, params, view.k)
    return replace(trig, last_udot=ud, next_deadline=view.t + xi), xi


def self_trigger_step(k: int, t: float, received: bool, trig: TriggerState,
                      tol: float = 1e-12) -> tuple[bool, bool]:
    """Return ``(fire, update)`` for robot ``k`` at ``t``.

    ``fire`` means the robot's own deadline has come (it broadcasts);
    ``update`` means the held input must be refreshed, which also happens
    when a neighbour broadcast arrived.  The refresh itself is done with
    :func:`refresh_input`.
    """
    fire = t >= trig.next_deadline - tol
    return fire, fire or received


def self_trigger_fire(trig: TriggerState, t: float) -> TriggerState:
    return replace(trig, t_last=t, e=0.0, trigger_count=trig.trigger_count + 1)


def estimate_residual(u_held: float, udot: float, xi: float, mu_l: float, sigma: float,
                      omega0: float) -> float:
    """Violation of ``sigma|udot*xi + u - w0| + mu >= (1 - sigma)|udot| xi``
    (zero when the inequality holds)."""
    lhs = sigma * abs(udot * xi + u_held - omega0) + mu_l
    rhs = (1.0 - sigma) * abs(udot) * xi
    return max(0.0, rhs - lhs)
