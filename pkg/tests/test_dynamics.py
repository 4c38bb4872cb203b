import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import k0 as sp_k0
from scipy.special import k1 as sp_k1

from bralpha.dynamics import (
    SimConfig,
    SimState,
    Stepper,
    hamiltonian,
    induced_velocity,
    integrate,
    interaction_hamiltonian,
    linear_impulse,
    resolve_workers,
    simulate,
    step,
)
from bralpha.errors import DomainError, SingularityError, TopologyMismatchError
from bralpha.kernels import KernelSpec, eval_kernel
from bralpha.oracles import smoothed_kernel_scipy
from bralpha.sheet import SheetCurve, Topology, build_scenario, trapezoid_weights

TWO_PI = 2 * math.pi
ALPHA = KernelSpec.br_alpha(0.5)


def pair_with_spectator():
    # a third marker of negligible weight makes a two-vortex system admissible
    pos = [[0.0, 0.0], [1.0, 0.0], [50.0, 50.0]]
    return SheetCurve(Topology.OPEN_ARC, [0.0, 1.0, 2.0], pos, [1.0, 1.0, 1e-300])


def test_two_marker_velocities():
    u = induced_velocity(pair_with_spectator(), KernelSpec.br_alpha(1.0))
    want = (1.0 - sp_k1(1.0)) / TWO_PI
    assert np.allclose(u[0], [0.0, -want], atol=1e-16)
    assert np.allclose(u[1], [0.0, want], atol=1e-16)


def test_two_marker_hamiltonian():
    h = interaction_hamiltonian(pair_with_spectator(), 1.0)
    assert h == pytest.approx(sp_k0(1.0) / TWO_PI, abs=1e-16)


def test_flat_sheet_is_stationary():
    flat = build_scenario("flat_perturbed", k=1, amplitude=0.0, n=128, gamma0=1.0, period=TWO_PI)
    for spec in (KernelSpec.br_alpha(0.5, periodic=TWO_PI), KernelSpec.blob(0.2, periodic=TWO_PI),
                 KernelSpec.raw(periodic=TWO_PI)):
        assert np.abs(induced_velocity(flat, spec)).max() <= 1e-13


def test_circle_velocity_tangential_and_matches_fine_quadrature():
    c = build_scenario("circle", n=256)
    u = induced_velocity(c, ALPHA)
    x = c.positions
    radial = np.sum(u * x, axis=1)
    speed = x[:, 0] * u[:, 1] - x[:, 1] * u[:, 0]
    assert np.abs(radial).max() <= 1e-12
    assert np.ptp(speed) <= 1e-12
    # independent 16x-resolution trapezoid sum at the marker (1, 0)
    n = 256 * 16
    th = TWO_PI * np.arange(1, n) / n
    ku, kv = smoothed_kernel_scipy(1.0 - np.cos(th), -np.sin(th), 0.5)
    fine = math.fsum(kv * (TWO_PI / n))
    assert abs(math.fsum(ku)) * TWO_PI / n <= 1e-12
    assert abs(speed[0] - fine) <= 1e-6


def test_velocity_sums_in_target_order():
    c = build_scenario("ellipse", a=1.0, b=0.6, n=40)
    u = induced_velocity(c, ALPHA)
    for j in (0, 7, 39):
        diff = c.positions[j] - c.positions
        k = eval_kernel(ALPHA, diff)
        want = [math.fsum(c.weights * k[:, 0]), math.fsum(c.weights * k[:, 1])]
        assert np.allclose(u[j], want, rtol=0, atol=1e-16)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["br_alpha", "blob", "raw_br"]))
def test_weighted_velocity_sum_vanishes(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 40))
    g = np.arange(n, dtype=float)
    pos = rng.normal(size=(n, 2))
    curve = SheetCurve(Topology.OPEN_ARC, g, pos, rng.uniform(0.1, 2.0, n))
    spec = KernelSpec(kind, alpha=0.3 if kind == "br_alpha" else None,
                      delta=0.3 if kind == "blob" else None)
    u = induced_velocity(curve, spec)
    scale = np.abs(curve.weights[:, None] * u).sum()
    assert np.abs(curve.weights @ u).max() <= 1e-14 * max(scale, 1.0)


@pytest.mark.parametrize("curve, spec", [
    (build_scenario("flat_perturbed", k=1, amplitude=0.1, n=16, gamma0=1.0, period=TWO_PI), ALPHA),
    (build_scenario("flat_perturbed", k=1, amplitude=0.1, n=16, gamma0=1.0, period=TWO_PI),
     KernelSpec.br_alpha(0.5, periodic=3.0)),
    (build_scenario("circle", n=16), KernelSpec.br_alpha(0.5, periodic=TWO_PI)),
])
def test_topology_mismatch(curve, spec):
    with pytest.raises(TopologyMismatchError):
        induced_velocity(curve, spec)


def test_raw_kernel_with_coincident_markers():
    c = SheetCurve(Topology.OPEN_ARC, [0.0, 1.0, 2.0, 3.0], [[0, 0], [1, 0], [1, 0], [2, 1]],
                   [1.0, 1.0, 1.0, 1.0])
    with pytest.raises(SingularityError):
        induced_velocity(c, KernelSpec.raw())
    with pytest.raises(SingularityError):
        hamiltonian(c, KernelSpec.raw())
    with pytest.warns(RuntimeWarning):
        hamiltonian(c, ALPHA)
    assert np.all(np.isfinite(induced_velocity(c, ALPHA)))


@pytest.mark.parametrize("workers", [2, 3, 4, 7])
def test_worker_count_is_bit_invisible(workers):
    c = build_scenario("ellipse", a=1.0, b=0.4, n=150)
    strip = build_scenario("flat_perturbed", k=2, amplitude=0.2, n=96, gamma0=1.0, period=TWO_PI)
    assert np.array_equal(induced_velocity(c, ALPHA, workers=1), induced_velocity(c, ALPHA, workers=workers))
    spec = KernelSpec.br_alpha(0.5, periodic=TWO_PI)
    assert np.array_equal(induced_velocity(strip, spec, workers=1),
                          induced_velocity(strip, spec, workers=workers))


def test_worker_resolution(monkeypatch):
    monkeypatch.delenv("BRALPHA_WORKERS", raising=False)
    assert resolve_workers() == 1
    monkeypatch.setenv("BRALPHA_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    with pytest.raises(DomainError):
        resolve_workers(0)


def test_tiny_step_matches_euler():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=32)
    dt = 1e-8
    s = step(SimState(0.0, c), SimConfig(ALPHA, dt=dt, t_end=dt))
    moved = s.curve.positions - c.positions
    euler = dt * induced_velocity(c, ALPHA)
    assert np.abs(moved - euler).max() <= 1e-6 * np.abs(euler).max()
    assert s.t == dt and s.step_index == 1


def test_circle_stays_circular_after_one_step():
    c = build_scenario("circle", n=64)
    s = step(SimState(0.0, c), SimConfig(ALPHA, dt=0.05, t_end=0.05))
    assert np.std(np.hypot(*s.curve.positions.T)) <= 1e-12


def test_rk4_global_order_on_circle():
    c = build_scenario("circle", n=32)

    def run(dt):
        return integrate(c, ALPHA, dt, int(round(1.0 / dt))).positions

    ref = run(0.1 / 32)
    e1 = np.abs(run(0.1) - ref).max()
    e2 = np.abs(run(0.05) - ref).max()
    assert 12.0 <= e1 / e2 <= 20.0


def test_state_time_is_step_count_times_dt():
    cfg = SimConfig(ALPHA, dt=0.1, t_end=1.0)
    s = SimState(0.0, build_scenario("circle", n=16))
    for _ in range(10):
        s = step(s, cfg)
    assert s.step_index == 10 and s.t == 10 * 0.1


def test_circulation_is_carried_unchanged():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=24)
    snaps = list(simulate(c, SimConfig(ALPHA, dt=0.05, t_end=1.0, output_every=5)))
    for snap in snaps:
        assert np.array_equal(snap.state.curve.gammas, c.gammas)
        assert np.array_equal(snap.state.curve.weights, c.weights)
        assert snap.state.curve.topology is c.topology


def test_reversibility():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=32)
    there = integrate(c, ALPHA, 1e-3, 1000)
    back = integrate(there, ALPHA, -1e-3, 1000)
    assert np.abs(back.positions - c.positions).max() <= 1e-10
    assert np.abs(there.positions - c.positions).max() > 1e-3


def test_midpoint_is_second_order():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=24)

    def run(dt):
        return integrate(c, ALPHA, dt, int(round(0.5 / dt)), stepper=Stepper.MIDPOINT).positions

    ref = integrate(c, ALPHA, 0.05 / 16, 160).positions
    ratio = np.abs(run(0.05) - ref).max() / np.abs(run(0.025) - ref).max()
    assert 3.5 <= ratio <= 4.5


def test_simulate_snapshot_schedule_and_stop():
    c = build_scenario("circle", n=16)
    cfg = SimConfig(ALPHA, dt=0.01, t_end=0.1, output_every=3)
    snaps = list(simulate(c, cfg))
    assert [s.state.step_index for s in snaps] == [0, 3, 6, 9, 10]
    assert [s.state.t for s in snaps] == [k * 0.01 for k in (0, 3, 6, 9, 10)]
    assert np.array_equal(snaps[0].velocity, induced_velocity(c, ALPHA))
    stopped = list(simulate(c, cfg, stop=lambda s: s.state.step_index >= 6))
    assert [s.state.step_index for s in stopped] == [0, 3, 6]


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0, "t_end": 1.0},
    {"dt": -0.1, "t_end": 1.0},
    {"dt": 0.1, "t_end": 0.05},
    {"dt": 0.1, "t_end": float("inf")},
    {"dt": 0.1, "t_end": 1.0, "output_every": 0},
    {"dt": 0.1, "t_end": 1.0, "output_every": 1.5},
    {"dt": 0.1, "t_end": 1.0, "stepper": "euler"},
])
def test_sim_config_validation(kwargs):
    with pytest.raises((DomainError, ValueError)):
        SimConfig(ALPHA, **kwargs)


def test_impulse_values():
    assert np.abs(linear_impulse(build_scenario("circle", n=64))).max() <= 1e-14
    c = build_scenario("ellipse", a=1.0, b=0.5, n=64)
    shift = np.array([0.75, -2.5])
    moved = c.with_positions(c.positions + shift)
    want = linear_impulse(c) + c.total_circulation * shift
    assert np.allclose(linear_impulse(moved), want, rtol=0, atol=1e-14)


def test_impulse_conserved_over_circle_run():
    c = build_scenario("circle", n=64)
    p0 = linear_impulse(c)
    end = integrate(c, ALPHA, 1e-2, 1000)
    assert np.hypot(*(linear_impulse(end) - p0)) <= 1e-12 * c.total_circulation * 2.0


@pytest.mark.parametrize("curve", [
    build_scenario("ellipse", a=1.0, b=0.5, n=48),
    SheetCurve(Topology.OPEN_ARC, np.linspace(0, 1, 20), np.random.default_rng(2).normal(size=(20, 2)),
               trapezoid_weights(np.linspace(0, 1, 20), "open_arc")),
], ids=["closed", "open"])
def test_hamiltonian_translation_invariant(curve):
    h = interaction_hamiltonian(curve, 0.5)
    moved = curve.with_positions(curve.positions + [3.0, -1.25])
    assert abs(interaction_hamiltonian(moved, 0.5) - h) <= 1e-13 * abs(h)


def test_hamiltonian_nearly_conserved_on_ellipse():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=32)
    h0 = interaction_hamiltonian(c, 0.5)
    h1 = interaction_hamiltonian(integrate(c, ALPHA, 0.02, 50), 0.5)
    assert abs(h1 - h0) <= 1e-9 * abs(h0)


def test_strip_hamiltonian_is_finite_diagnostic():
    strip = build_scenario("flat_perturbed", k=1, amplitude=0.1, n=32, gamma0=1.0, period=TWO_PI)
    assert math.isfinite(hamiltonian(strip, KernelSpec.br_alpha(0.5, periodic=TWO_PI)))
