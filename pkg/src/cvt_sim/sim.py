"""Fixed-step simulation of the coverage controllers.

Each grid step: run the mode's scheduler at the step barrier (fires,
broadcasts, held-input refreshes), sample metrics, then propagate every
robot exactly under its held input.  Self-triggered deadlines and refined
event crossings that fall strictly inside a step are handled as sub-step
barriers at their exact times.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import control as ctl
from .config import ScenarioConfig
from .dynamics import RobotState, propagate, virtual_center
from .geometry import GLOBAL_REFINE, GeometryError, cell_moments, coverage_cost, compute_voronoi, voronoi_cell
from .network import Message, MessageLog, broadcast, stats, write_messages_csv

DEADLINE_TOL = 1e-12
CROSSING_TOL = 1e-6
DIAG_TOL = 1e-9
MONOTONE_TOL = 1e-9
STRICT_OVERSHOOT = 0.02


class InvariantViolation(RuntimeError):
    pass


class SimulationAborted(RuntimeError):
    pass


@dataclass
class RobotSample:
    x: float
    y: float
    theta: float
    u: float
    z: complex
    c: complex
    mass: float
    e: float
    f: float
    g: float
    psi: float
    O: float


@dataclass
class TraceRecord:
    t: float
    robots: list
    H_V: float
    fired: tuple = ()


@dataclass
class SelfUpdate:
    """One self-triggered schedule computation (own fire or neighbour update)."""

    k: int
    t: float
    u_held: float
    udot: float
    xi: float
    mu: float
    own_fire: bool


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: list
    net: object
    summary: dict
    log: MessageLog
    self_updates: list = field(default_factory=list)
    events: list = field(default_factory=list)  # (t, k, |e| before reset, threshold)


def _fresh_centroids(zs, region, phi):
    out = []
    for k in range(len(zs)):
        cell = voronoi_cell(zs, region, k)
        if cell is None:
            raise GeometryError(f"robot {k}: empty Voronoi cell")
        out.append(cell_moments(cell, phi))
    return out


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.p = config.params
        self.n = config.n
        self.omega0 = self.p.omega0
        self.states: list[RobotState] = list(config.robots)
        self.trig = [ctl.TriggerState() for _ in range(self.n)]
        self.snaps: list[dict] = [{} for _ in range(self.n)]
        self.log = MessageLog(self.n)
        self.t = 0.0
        self.trace: list[TraceRecord] = []
        self.self_updates: list[SelfUpdate] = []
        self.events: list = []
        self.fired_since_sample: set = set()
        self.max_overshoot = 0.0
        self.max_overshoot_rel = 0.0
        self.max_post_fire_e = 0.0
        self.max_h_increase = -math.inf
        self.max_diag_residual = 0.0
        self.excursion = False

    # -- helpers -------------------------------------------------------------

    def zs(self, states=None) -> list:
        return [virtual_center(s, self.omega0) for s in (states or self.states)]

    def view(self, k: int) -> ctl.LocalView:
        return ctl.LocalView(k, self.t, self.states[k], self.snaps[k], self.cfg.region,
                             self.cfg.density, self.omega0)

    def fresh(self, states=None):
        zs = self.zs(states)
        try:
            return zs, _fresh_centroids(zs, self.cfg.region, self.cfg.density)
        except GeometryError as exc:
            raise SimulationAborted(f"t={self.t:.6f}: {exc}") from exc

    def advance(self, t_to: float) -> None:
        dt = t_to - self.t
        if dt > 0:
            self.states = [propagate(s, tr.u_held, dt) for s, tr in zip(self.states, self.trig)]
        self.t = t_to

    # -- barrier ---------------------------------------------------------------

    def barrier(self, firing, initial: bool = False) -> None:
        """Broadcast for every robot in ``firing`` and refresh all affected
        held inputs, all at the current time.

        Every robot whose input is refreshed (the firing robots and the
        recipients of their broadcasts) first measures its neighbours'
        current states.
        """
        if not firing:
            return
        t = self.t
        firing = sorted(firing)
        fired = set(firing)
        try:
            if not initial:
                for k in firing:
                    self._measure_neighbors(k)
            outgoing = []
            for k in firing:
                if initial:
                    rec = set(range(self.n))
                else:
                    own = ctl.local_centroid(self.view(k)).neighbors
                    rec = set(own) | {j for j in range(self.n) if k in self.trig[j].neighbors}
                rec.discard(k)
                s = self.states[k]
                outgoing.append((k, virtual_center(s, self.omega0), s.theta, tuple(sorted(rec))))
            affected = set(firing)
            for k, z, th, rec in outgoing:
                snap = ctl.Snapshot(z, th, self.trig[k].u_held, self.states[k].v, t)
                for j in rec:
                    self.snaps[j][k] = snap
                    affected.add(j)
            if not initial:
                for k in sorted(affected - fired):
                    self._measure_neighbors(k)
            for k in sorted(affected):
                self.trig[k] = ctl.refresh_input(self.view(k), self.trig[k], self.p, own_fire=k in fired)
            for k in sorted(affected):
                for j, snap in self.snaps[k].items():
                    if snap.t == t:
                        self.snaps[k][j] = replace(snap, u=self.trig[j].u_held)
            for k, z, th, rec in outgoing:
                broadcast(Message(k, t, z, th, self.trig[k].u_held, rec), self.log)
            if self.p.mode == "self":
                for k in sorted(affected):
                    trig, xi = ctl.reschedule(self.view(k), self.trig[k], self.p)
                    self.trig[k] = trig
                    self.self_updates.append(SelfUpdate(k, t, trig.u_held, trig.last_udot, xi,
                                                        self.p.mu(t, k), k in fired))
        except GeometryError as exc:
            raise SimulationAborted(f"t={t:.6f}: {exc}") from exc
        self.fired_since_sample.update(firing)

    def _snapshot_of(self, j: int) -> ctl.Snapshot:
        s = self.states[j]
        return ctl.Snapshot(virtual_center(s, self.omega0), s.theta, self.trig[j].u_held, s.v, self.t)

    def _measure_neighbors(self, k: int) -> None:
        """A firing robot reads its neighbours' current states.

        Repeated until the neighbour set computed from the refreshed view is
        stable, so the refreshed held input matches the fresh control law.
        """
        measured: set = set()
        for _ in range(self.n):
            nbrs = ctl.local_centroid(self.view(k)).neighbors
            todo = nbrs - measured
            if not todo:
                return
            for j in sorted(todo):
                self.snaps[k][j] = self._snapshot_of(j)
            measured |= todo

    def fire_initial(self) -> None:
        for k in range(self.n):
            self.trig[k] = replace(self.trig[k], t_last=0.0, trigger_count=1, u_held=self.omega0)
        self.barrier(range(self.n), initial=True)

    # -- schedulers ------------------------------------------------------------

    def continuous_update(self) -> None:
        zs, moms = self.fresh()
        for k in range(self.n):
            g = ctl.g_aux(zs[k], moms[k].centroid, self.states[k])
            u = ctl.control_law(g, self.p)
            self.trig[k] = replace(self.trig[k], u_held=u, e=0.0)

    def event_monitor(self):
        """Evaluate every robot's trigger function; return the firing set
        (state not yet modified) and per-robot (e, g, f)."""
        zs, moms = self.fresh()
        out = []
        for k in range(self.n):
            g = ctl.g_aux(zs[k], moms[k].centroid, self.states[k])
            u = ctl.control_law(g, self.p)
            e = self.trig[k].u_held - u
            out.append((e, g, ctl.trigger_function(e, g, self.t, self.p, k)))
        return out

    def event_update(self) -> list:
        mon = self.event_monitor()
        firing = []
        for k, (e, g, f) in enumerate(mon):
            fire, self.trig[k] = ctl.event_step(k, self.t, self.trig[k].u_held - e, g, self.trig[k], self.p)
            if fire:
                firing.append(k)
                thr = ctl.threshold(g, self.t, self.p, k)
                over = abs(e) - thr
                self.events.append((self.t, k, abs(e), thr))
                self.max_overshoot = max(self.max_overshoot, over)
                self.max_overshoot_rel = max(self.max_overshoot_rel, over / thr)
                if self.cfg.strict and over / thr > STRICT_OVERSHOOT:
                    raise InvariantViolation(
                        f"t={self.t:.6f} robot {k}: threshold overshoot {over / thr:.3%}")
        self.barrier(firing)
        for k in firing:
            self.max_post_fire_e = max(self.max_post_fire_e, abs(self.trig[k].e))
        return firing

    def self_update(self) -> None:
        firing = [k for k in range(self.n)
                  if ctl.self_trigger_step(k, self.t, False, self.trig[k], DEADLINE_TOL)[0]]
        for k in firing:
            self.trig[k] = ctl.self_trigger_fire(self.trig[k], self.t)
        self.barrier(firing)

    # -- event-mode crossing refinement ---------------------------------------

    def _crossing_time(self, k, states0, t0, t1) -> float:
        lo, hi = t0, t1
        while hi - lo > CROSSING_TOL:
            mid = 0.5 * (lo + hi)
            sts = [propagate(s, tr.u_held, mid - t0) for s, tr in zip(states0, self.trig)]
            zs = self.zs(sts)
            cell = voronoi_cell(zs, self.cfg.region, k)
            c = cell_moments(cell, self.cfg.density).centroid
            g = ctl.g_aux(zs[k], c, sts[k])
            e = self.trig[k].u_held - ctl.control_law(g, self.p)
            if ctl.trigger_function(e, g, mid, self.p, k) >= 0:
                hi = mid
            else:
                lo = mid
        return hi

    def refined_step(self, t_end: float) -> None:
        """Advance to ``t_end``, firing at refined crossing times in between."""
        while True:
            t0, states0 = self.t, list(self.states)
            self.advance(t_end)
            mon = self.event_monitor()
            crossing = [k for k, (_, _, f) in enumerate(mon) if f >= 0]
            if not crossing:
                return
            times = {k: self._crossing_time(k, states0, t0, t_end) for k in crossing}
            t_star = min(times.values())
            if t_star >= t_end - CROSSING_TOL:
                # crossing at the grid point itself: handled by the grid scheduler
                return
            self.states, self.t = states0, t0
            self.advance(t_star)
            if not self.event_update():
                self.advance(t_end)
                return

    # -- metrics -----------------------------------------------------------------

    def sample(self) -> None:
        zs = self.zs()
        try:
            diagram = compute_voronoi(zs, self.cfg.region)
            moms = [cell_moments(c, self.cfg.density) for c in diagram.cells]
        except GeometryError as exc:
            raise SimulationAborted(f"t={self.t:.6f}: {exc}") from exc
        H = coverage_cost(zs, self.cfg.region, self.cfg.density, diagram=diagram)
        robots = []
        for k in range(self.n):
            s, tr, m = self.states[k], self.trig[k], moms[k]
            g = ctl.g_aux(zs[k], m.centroid, s)
            if self.p.mode == "event":
                e = tr.e
            else:
                e = tr.u_held - ctl.control_law(g, self.p)
            f = ctl.trigger_function(e, g, self.t, self.p, k)
            d = ctl.diagnostics(zs[k], m.centroid, s, f)
            res = abs(abs(d.g) - d.O * abs(math.cos(d.psi)))
            self.max_diag_residual = max(self.max_diag_residual, res)
            if self.cfg.strict and res > DIAG_TOL:
                raise InvariantViolation(f"t={self.t:.6f} robot {k}: |g| != O|cos psi| ({res:.3g})")
            if not self.cfg.region.contains(zs[k]):
                self.excursion = True
            robots.append(RobotSample(s.x, s.y, s.theta, tr.u_held, zs[k], m.centroid, m.mass,
                                      e, f, g, d.psi, d.O))
        if self.trace and self.p.mode == "continuous":
            inc = H - self.trace[-1].H_V
            self.max_h_increase = max(self.max_h_increase, inc)
            if self.cfg.strict and inc > MONOTONE_TOL:
                raise InvariantViolation(f"t={self.t:.6f}: H_V increased by {inc:.3g}")
        self.trace.append(TraceRecord(self.t, robots, H, tuple(sorted(self.fired_since_sample))))
        self.fired_since_sample = set()

    # -- main loop ---------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        mode = self.p.mode
        n_steps = cfg.n_steps
        for i in range(n_steps + 1):
            if i == 0:
                if mode == "continuous":
                    self.continuous_update()
                else:
                    self.fire_initial()
            elif mode == "continuous":
                self.continuous_update()
            elif mode == "event":
                self.event_update()
            else:
                self.self_update()
            if i % cfg.sample_every == 0 or i == n_steps:
                self.sample()
            if i == n_steps:
                break
            t_end = (i + 1) * cfg.dt
            if mode == "self":
                while True:
                    td = min(tr.next_deadline for tr in self.trig)
                    if td >= t_end - DEADLINE_TOL:
                        break
                    self.advance(max(td, self.t))
                    self.self_update()
                self.advance(t_end)
            elif mode == "event" and cfg.refine_crossing:
                self.refined_step(t_end)
            else:
                self.advance(t_end)
        net = stats(self.log, n_robots=self.n)
        return RunResult(cfg, self.trace, net, self.summary(net), self.log,
                         self.self_updates, self.events)

    def summary(self, net) -> dict:
        p = self.p
        first, last = self.trace[0], self.trace[-1]
        dists = [abs(r.z - r.c) for r in last.robots]
        tail = [rec for rec in self.trace if rec.t >= 0.9 * self.cfg.duration - 1e-12]
        steady = max(abs(r.u - p.omega0) / p.omega0 for rec in tail for r in rec.robots)
        per_robot_min = {str(k): net.min_interval_of(k) for k in range(self.n)}
        out = {
            "name": self.cfg.name,
            "mode": p.mode,
            "n_robots": self.n,
            "dt": self.cfg.dt,
            "duration": self.cfg.duration,
            "params": {"gamma": p.gamma, "sigma": p.sigma, "alpha": list(p.alpha),
                       "omega0": p.omega0, "xi_max": p.xi_max},
            "H_V_initial": first.H_V,
            "H_V_final": last.H_V,
            "final_max_dist": max(dists),
            "final_dists": dists,
            "final_max_u_dev": max(abs(r.u - p.omega0) for r in last.robots),
            "steady_orbit_max_rel_dev": steady,
            "converge_tol": self.cfg.converge_tol,
            "converged": max(dists) < self.cfg.converge_tol,
            "trigger_counts": {str(k): v for k, v in sorted(net.trigger_counts.items())},
            "total_triggers": net.total_triggers,
            "message_count": net.message_count,
            "min_inter_event": net.min_interval,
            "min_inter_event_per_robot": per_robot_min,
            "max_threshold_overshoot": self.max_overshoot if p.mode == "event" else None,
            "max_threshold_overshoot_rel": self.max_overshoot_rel if p.mode == "event" else None,
            "max_post_fire_abs_e": self.max_post_fire_e if p.mode == "event" else None,
            "max_H_V_increase": self.max_h_increase if p.mode == "continuous" and len(self.trace) > 1 else None,
            "max_diag_residual": self.max_diag_residual,
            "virtual_center_excursion": self.excursion,
        }
        return out


def run(config: ScenarioConfig) -> RunResult:
    return Simulation(config).run()


def verify_decomposition(record: TraceRecord | list, region, phi) -> float:
    """Relative residual of ``H_V = sum J + sum M |z - C|^2`` at one sample.

    ``record`` is a trace record or a plain list of generator positions; the
    cost and the moments come from separate integrations.
    """
    zs = [r.z for r in record.robots] if isinstance(record, TraceRecord) else [complex(z) for z in record]
    diagram = compute_voronoi(zs, region)
    H = coverage_cost(zs, region, phi, diagram=diagram)
    rhs = 0.0
    for z, cell in zip(zs, diagram.cells):
        m = cell_moments(cell, phi, GLOBAL_REFINE)
        rhs += m.polar_moment + m.mass * abs(z - m.centroid) ** 2
    return abs(H - rhs) / H


# -- output ------------------------------------------------------------------

ROBOT_FIELDS = ("x", "y", "theta", "u", "z_re", "z_im", "C_re", "C_im", "M", "e", "f", "g", "psi", "O")


def trace_columns(n: int) -> list[str]:
    return ["t", "H_V", "fired"] + [f"{name}_{k}" for k in range(n) for name in ROBOT_FIELDS]


def _robot_values(r: RobotSample):
    return (r.x, r.y, r.theta, r.u, r.z.real, r.z.imag, r.c.real, r.c.imag, r.mass,
            r.e, r.f, r.g, r.psi, r.O)


def write_trace_csv(trace, fh) -> None:
    n = len(trace[0].robots) if trace else 0
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(trace_columns(n))
    for rec in trace:
        row = [repr(float(rec.t)), repr(float(rec.H_V)), " ".join(map(str, rec.fired))]
        for r in rec.robots:
            row.extend(repr(float(v)) for v in _robot_values(r))
        w.writerow(row)


def read_trace_csv(fh) -> list[TraceRecord]:
    reader = csv.reader(fh)
    header = next(reader)
    n = (len(header) - 3) // len(ROBOT_FIELDS)
    if header != trace_columns(n):
        raise ValueError("unexpected trace columns")
    out = []
    nf = len(ROBOT_FIELDS)
    for row in reader:
        robots = []
        for k in range(n):
            v = [float(x) for x in row[3 + k * nf: 3 + (k + 1) * nf]]
            robots.append(RobotSample(v[0], v[1], v[2], v[3], complex(v[4], v[5]), complex(v[6], v[7]),
                                      v[8], v[9], v[10], v[11], v[12], v[13]))
        out.append(TraceRecord(float(row[0]), robots, float(row[1]),
                               tuple(int(x) for x in row[2].split())))
    return out


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()


def write_outputs(result: RunResult, out_dir, *, emit_trace: bool = True, emit_messages: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if emit_trace:
        with open(out / "trace.csv", "w", newline="") as fh:
            write_trace_csv(result.trace, fh)
    if emit_messages:
        with open(out / "messages.csv", "w", newline="") as fh:
            write_messages_csv(result.log, fh)
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n")
