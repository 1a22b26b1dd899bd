"""Acceptance suite: one check per criterion, each reporting PASS/FAIL with
the measured quantities at the stated tolerances."""

import filecmp
import math
import time

import numpy as np
import pytest

from cvt_sim import cli
from cvt_sim import control as ctl
from cvt_sim.config import load_config
from cvt_sim.density import UniformDensity
from cvt_sim.dynamics import RobotState, propagate, virtual_center, wrap_angle
from cvt_sim.geometry import compute_voronoi, coverage_cost, coverage_gradient
from cvt_sim.sim import run, verify_decomposition, write_outputs

from conftest import ACCEPTANCE_LINES, RECT, inside_convex, nearest_generator_raster, random_generators

PHI = UniformDensity(1.0)


def report(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def bundled():
    return load_config("paper_4robots")


@pytest.fixture(scope="module")
def event_run(bundled):
    t0 = time.perf_counter()
    r = run(bundled.with_overrides(mode="event"))
    return r, time.perf_counter() - t0


@pytest.fixture(scope="module")
def self_run(bundled):
    return run(bundled.with_overrides(mode="self"))


def test_1_geometry_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_agree, worst_area = 1.0, 0.0
    for _ in range(50):
        gens = random_generators(rng, margin=0.0)
        d = compute_voronoi(gens, RECT)
        X, Y, oracle = nearest_generator_raster(gens)
        ours = np.full(oracle.shape, -1)
        for k, cell in enumerate(d.cells):
            if cell is not None:
                ours[(ours == -1) & inside_convex(cell, X, Y)] = k
        worst_agree = min(worst_agree, float(np.mean(ours == oracle)))
        area = sum(c.area for c in d.cells if c is not None)
        worst_area = max(worst_area, abs(area - 11.2) / 11.2)
    elapsed = time.perf_counter() - t0
    ok = worst_agree >= 0.999 and worst_area <= 1e-9 and elapsed < 10
    report(1, "geometry oracle", ok,
           f"min pixel agreement {worst_agree:.5f} (>= 0.999), max area error {worst_area:.1e} (<= 1e-9), "
           f"{elapsed:.1f}s (< 10s)")


def _topology_preserved(gens, k, step, base):
    for s in (step, -step):
        moved = list(gens)
        moved[k] += s
        if compute_voronoi(moved, RECT).adjacency != base:
            return False
    return True


def test_2_gradient_check():
    rng = np.random.default_rng(7)
    h = 1e-5
    t0 = time.perf_counter()
    worst, used, rejected = 0.0, 0, 0
    while used < 20:
        gens = random_generators(rng)
        base = compute_voronoi(gens, RECT).adjacency
        if not all(_topology_preserved(gens, k, s, base) for k in range(4) for s in (h, 1j * h)):
            rejected += 1
            continue
        an = coverage_gradient(gens, RECT, PHI)
        for k in range(4):
            for s, part in ((h, "real"), (1j * h, "imag")):
                plus, minus = list(gens), list(gens)
                plus[k] += s
                minus[k] -= s
                fd = (coverage_cost(plus, RECT, PHI) - coverage_cost(minus, RECT, PHI)) / (2 * h)
                a = getattr(an[k], part)
                worst = max(worst, abs(a - fd) / max(abs(a), 1e-12))
        used += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30
    report(2, "gradient check", ok,
           f"max relative error {worst:.1e} (<= 1e-4) on 20 configurations "
           f"({rejected} rejected for topology change), {elapsed:.1f}s (< 30s)")


def test_3_decomposition():
    rng = np.random.default_rng(13)
    worst = max(verify_decomposition(random_generators(rng), RECT, PHI) for _ in range(20))
    report(3, "cost decomposition", worst <= 1e-8, f"max relative residual {worst:.1e} (<= 1e-8)")


def test_4_continuous_convergence(bundled):
    cfg = bundled.with_overrides(mode="continuous", dt=1e-3, duration=120.0)
    t0 = time.perf_counter()
    r = run(cfg)
    elapsed = time.perf_counter() - t0
    hs = [rec.H_V for rec in r.trace]
    max_inc = max(b - a for a, b in zip(hs, hs[1:]))
    dist = r.summary["final_max_dist"]
    udev = r.summary["final_max_u_dev"] / cfg.params.omega0
    ok = max_inc <= 1e-9 and dist < 0.02 and udev < 0.05 and elapsed < 60
    report(4, "continuous-mode convergence", ok,
           f"max H_V increase {max_inc:.1e} (<= 1e-9), final max|z-C| {dist:.2e} m (< 0.02), "
           f"final max|u-w0|/w0 {udev:.2e} (< 0.05), {elapsed:.1f}s (< 60s)")


def test_5_event_reproduction(event_run):
    r, _ = event_run
    s = r.summary
    dist = s["final_max_dist"]
    over = max(((e - thr) / thr for _, _, e, thr in r.events), default=0.0)
    over = max(over, 0.0)
    post = s["max_post_fire_abs_e"]
    ok = dist < 0.05 and over < 0.02 and post == 0.0 and s["max_threshold_overshoot_rel"] < 0.02
    report(5, "event-mode reproduction", ok,
           f"final max|z-C| {dist:.2e} m (< 0.05), max overshoot {over:.1e} of threshold (< 0.02) "
           f"over {len(r.events)} fires, max |e| after fire {post} (== 0)")


def test_6_zeno_free(event_run, self_run):
    ev, _ = event_run
    dt = ev.config.dt
    ev_min = ev.summary["min_inter_event"]
    sf_min = self_run.summary["min_inter_event"]
    ev_tot, sf_tot = ev.summary["total_triggers"], self_run.summary["total_triggers"]
    ok = (ev_min is not None and ev_min > 2 * dt and sf_min is not None and sf_min > 1e-3
          and ev.config.duration == 120.0 and self_run.config.duration == 120.0)
    report(6, "Zeno-freeness", ok,
           f"event min interval {ev_min:.4f}s (> {2 * dt:g}s), {ev_tot} triggers; "
           f"self min interval {sf_min:.4f}s (> 0.001s), {sf_tot} triggers")


def _u_along_flow(states, inputs, k, p, dt):
    sts = []
    for s, u in zip(states, inputs):
        if dt >= 0:
            sts.append(propagate(s, u, dt))
        else:
            b = propagate(RobotState(s.x, s.y, s.theta + math.pi, s.v), -u, -dt)
            sts.append(RobotState(b.x, b.y, wrap_angle(b.theta - math.pi), b.v))
    snaps = {j: ctl.Snapshot(virtual_center(st, p.omega0), st.theta, inputs[j], st.v, 0.0)
             for j, st in enumerate(sts) if j != k}
    view = ctl.LocalView(k, 0.0, sts[k], snaps, RECT, PHI, p.omega0)
    return ctl.control_input(view, p), view


def test_7_self_trigger_soundness(self_run):
    p = self_run.config.params
    worst_res = max(ctl.estimate_residual(u.u_held, u.udot, u.xi, u.mu, p.sigma, p.omega0)
                    for u in self_run.self_updates)
    # u_dot against numerical differentiation at 20 instants spread over the run
    h = 1e-5
    picks = np.linspace(1, len(self_run.trace) // 2, 20).astype(int)
    worst_rel = 0.0
    for i, idx in enumerate(picks):
        rec = self_run.trace[idx]
        states = [RobotState(r.x, r.y, r.theta, 0.16) for r in rec.robots]
        inputs = [r.u for r in rec.robots]
        k = i % len(states)
        _, view = _u_along_flow(states, inputs, k, p, 0.0)
        an = ctl.u_dot(view, inputs[k], p)
        fd = (_u_along_flow(states, inputs, k, p, h)[0] - _u_along_flow(states, inputs, k, p, -h)[0]) / (2 * h)
        worst_rel = max(worst_rel, abs(an - fd) / abs(fd))
    ok = worst_res < 1e-9 and worst_rel < 1e-3
    report(7, "self-trigger estimate soundness", ok,
           f"max inequality residual {worst_res:.1e} over {len(self_run.self_updates)} updates (< 1e-9), "
           f"max u_dot relative error {worst_rel:.1e} at 20 instants (< 1e-3)")


def test_8_dynamics_exactness():
    s = RobotState(0.8, 0.5, 0.3, 0.16)
    worst_sub = 0.0
    for u in (0.536, -1.3, 2.9, 0.0):
        one = propagate(s, u, 1.0)
        many = s
        for _ in range(1000):
            many = propagate(many, u, 1e-3)
        worst_sub = max(worst_sub, abs(one.position - many.position), abs(wrap_angle(one.theta - many.theta)))
    z0 = virtual_center(s, 0.536)
    drift = 0.0
    cur = s
    for _ in range(100_000):
        cur = propagate(cur, 0.536, 1e-3)
    drift = abs(virtual_center(cur, 0.536) - z0)
    ok = worst_sub <= 1e-12 and drift <= 1e-12
    report(8, "dynamics exactness", ok,
           f"substep vs single step {worst_sub:.1e} (<= 1e-12), virtual-center drift over 100s {drift:.1e} (<= 1e-12)")


def test_9_determinism(event_run, tmp_path):
    r, _ = event_run
    a, b = tmp_path / "a", tmp_path / "b"
    write_outputs(r, a)
    code = cli.main(["--config", "paper_4robots", "--out", str(b)])
    same = [filecmp.cmp(a / f, b / f, shallow=False) for f in ("trace.csv", "messages.csv")]
    ok = code == 0 and all(same)
    report(9, "determinism", ok,
           f"paper_4robots run twice: trace.csv identical={same[0]}, messages.csv identical={same[1]}")
