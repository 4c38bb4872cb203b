import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bralpha.errors import DegenerateCurveError, DomainError, ExcursionError, ResolutionError
from bralpha.sheet import (
    SheetCurve,
    Topology,
    build_scenario,
    chord_arc_constant,
    derivative_along,
    holder_seminorm,
    lipschitz_seminorm,
    read_curve_csv,
    regularity_report,
    trapezoid_weights,
    vorticity_density,
    write_curve_csv,
)

TWO_PI = 2 * math.pi


def open_arc(gammas, positions):
    return SheetCurve(Topology.OPEN_ARC, gammas, positions,
                      trapezoid_weights(gammas, Topology.OPEN_ARC))


def line(n, slope=1.0):
    g = np.linspace(0.0, 1.0, n)
    return open_arc(g, np.column_stack([slope * g, np.zeros(n)]))


def brute_ratios(curve):
    # every ordered pair, independent of the vectorized pair enumeration
    out = []
    for j in range(curve.n):
        for l in range(curve.n):
            if j == l:
                continue
            dg = abs(curve.gammas[j] - curve.gammas[l])
            if curve.is_periodic:
                dg = min(dg, curve.period - dg)
            dx = curve.positions[j] - curve.positions[l]
            chord = math.hypot(dx[0], dx[1])
            if curve.topology is Topology.PERIODIC_STRIP:
                for m in (-1.0, 1.0):
                    chord = min(chord, math.hypot(dx[0] - m * curve.shift[0], dx[1] - m * curve.shift[1]))
            out.append(chord / dg)
    return out


def random_closed(rng, n):
    g = np.sort(rng.uniform(0.0, TWO_PI, n))
    pos = rng.normal(size=(n, 2))
    return SheetCurve(Topology.CLOSED, g, pos, np.full(n, TWO_PI / n), period=TWO_PI)


def test_circle_chord_arc_and_lipschitz():
    c = build_scenario("circle", n=512)
    assert abs(chord_arc_constant(c) - 2 / math.pi) <= 1e-4
    assert abs(lipschitz_seminorm(c) - 1.0) <= 1e-4
    c128 = build_scenario("circle", radius=1.0, n=128, total_circulation=TWO_PI)
    assert abs(chord_arc_constant(c128) - 2 / math.pi) <= 1e-3


def test_straight_lines():
    assert chord_arc_constant(line(17)) == 1.0
    assert lipschitz_seminorm(line(17)) == 1.0
    assert lipschitz_seminorm(line(17, slope=2.0)) == 2.0
    assert holder_seminorm(line(17), 0.5) == 0.0


def test_small_ellipse_matches_brute_force():
    c = build_scenario("ellipse", a=1.0, b=0.5, n=8)
    r = brute_ratios(c)
    assert chord_arc_constant(c) == min(r)
    assert lipschitz_seminorm(c) == max(r)


@pytest.mark.parametrize("seed", range(4))
def test_random_curves_match_brute_force(seed):
    c = random_closed(np.random.default_rng(seed), 16)
    r = brute_ratios(c)
    assert chord_arc_constant(c) == min(r)
    assert lipschitz_seminorm(c) == max(r)
    g = np.sort(np.random.default_rng(seed).uniform(0.0, 3.0, 16))
    arc = open_arc(g, np.random.default_rng(seed + 9).normal(size=(16, 2)))
    r = brute_ratios(arc)
    assert chord_arc_constant(arc) == min(r)
    assert lipschitz_seminorm(arc) == max(r)


def test_periodic_strip_matches_brute_force():
    c = build_scenario("flat_perturbed", k=3, amplitude=0.4, n=32, gamma0=1.3, period=5.0)
    r = brute_ratios(c)
    assert chord_arc_constant(c) == min(r)
    assert lipschitz_seminorm(c) == max(r)


def test_holder_matches_brute_force():
    c = build_scenario("ellipse", a=1.0, b=0.3, n=24)
    der = derivative_along(c)
    want = 0.0
    for j in range(c.n):
        for l in range(j + 1, c.n):
            dg = abs(c.gammas[j] - c.gammas[l])
            dg = min(dg, c.period - dg)
            want = max(want, math.hypot(*(der[j] - der[l])) / dg ** 0.5)
    assert holder_seminorm(c, 0.5) == pytest.approx(want, rel=1e-15)


def test_holder_on_circle():
    assert 0.5 <= holder_seminorm(build_scenario("circle", n=512), 0.5) <= 1.5
    with pytest.raises(DomainError):
        holder_seminorm(build_scenario("circle", n=16), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, TWO_PI), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 50))
def test_isometry_invariance(theta, tx, ty, seed):
    c = random_closed(np.random.default_rng(seed), 12)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    moved = c.with_positions(c.positions @ rot.T + [tx, ty])
    assert chord_arc_constant(moved) == pytest.approx(chord_arc_constant(c), rel=1e-12)
    assert lipschitz_seminorm(moved) == pytest.approx(lipschitz_seminorm(c), rel=1e-12)


@pytest.mark.parametrize("s", [3.0, 0.25])
def test_homogeneity(s):
    c = build_scenario("ellipse", a=1.0, b=0.5, n=32)
    scaled = c.with_positions(s * c.positions)
    assert chord_arc_constant(scaled) == pytest.approx(s * chord_arc_constant(c), rel=1e-15)
    assert lipschitz_seminorm(scaled) == pytest.approx(s * lipschitz_seminorm(c), rel=1e-15)
    assert holder_seminorm(scaled, 0.5) == pytest.approx(s * holder_seminorm(c, 0.5), rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_report_ordering(seed):
    rep = regularity_report(random_closed(np.random.default_rng(seed), 10))
    assert 0.0 <= rep.chord_arc <= rep.lipschitz
    assert rep.min_pair_distance > 0.0


def test_coincident_markers_are_degenerate():
    c = open_arc([0.0, 1.0, 2.0, 3.0], [[0, 0], [1, 0], [0, 0], [2, 0]])
    with pytest.raises(DegenerateCurveError):
        chord_arc_constant(c)
    with pytest.raises(DegenerateCurveError):
        regularity_report(c)


def test_derivative_on_circle_and_line():
    c = build_scenario("circle", n=256)
    g = c.gammas
    err = np.abs(derivative_along(c) - np.column_stack([-np.sin(g), np.cos(g)])).max()
    assert err <= 1e-7
    assert np.array_equal(derivative_along(line(9)), np.tile([1.0, 0.0], (9, 1)))


def test_derivative_exact_for_quartics_on_open_arcs():
    g = np.linspace(-1.0, 2.0, 13)
    x = np.column_stack([g**4 - 2 * g**3 + g, 3 * g**2 - g**4])
    want = np.column_stack([4 * g**3 - 6 * g**2 + 1, 6 * g - 4 * g**3])
    assert np.abs(derivative_along(open_arc(g, x)) - want).max() <= 1e-12
    gn = np.array([0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 1.0])
    xn = np.column_stack([gn**4, gn**2])
    wn = np.column_stack([4 * gn**3, 2 * gn])
    assert np.abs(derivative_along(open_arc(gn, xn)) - wn).max() <= 1e-12


@pytest.mark.parametrize("name, kw", [
    ("ellipse", {"a": 1.0, "b": 0.5}),
    ("flat_perturbed", {"k": 2, "amplitude": 0.3, "gamma0": 1.0, "period": TWO_PI}),
])
def test_derivative_fourth_order(name, kw):
    def error(n):
        c = build_scenario(name, n=n, **kw)
        g = c.gammas
        if name == "ellipse":
            want = np.column_stack([-np.sin(g), 0.5 * np.cos(g)])
        else:
            want = np.column_stack([np.ones(n), -0.3 * 2 * np.sin(2 * g)])
        return np.abs(derivative_along(c) - want).max()

    ratio = error(64) / error(128)
    assert 14.0 <= ratio <= 18.0


def test_derivative_needs_five_markers():
    with pytest.raises(ResolutionError):
        derivative_along(line(4))


def test_vorticity_density():
    assert np.abs(vorticity_density(build_scenario("circle", n=256)) - 1.0).max() <= 1e-7
    assert np.abs(vorticity_density(build_scenario("circle", radius=2.0, n=256)) - 0.5).max() <= 1e-7
    assert np.array_equal(vorticity_density(line(17)), np.ones(17))
    flat = build_scenario("flat_perturbed", k=1, amplitude=0.0, n=32, gamma0=1.0, period=TWO_PI)
    assert np.abs(vorticity_density(flat) - 1.0).max() <= 1e-14


def test_collapsed_sheet_is_detected():
    g = np.linspace(0.0, 1.0, 9)
    with pytest.raises(DegenerateCurveError):
        vorticity_density(open_arc(g, np.zeros((9, 2))))


def test_flat_perturbed_construction():
    c = build_scenario("flat_perturbed", k=2, amplitude=0.0, n=64, gamma0=1.0, period=TWO_PI)
    assert np.all(c.positions[:, 1] == 0.0)
    assert c.topology is Topology.PERIODIC_STRIP and c.shift == (TWO_PI, 0.0)
    assert math.isclose(c.total_circulation, TWO_PI, rel_tol=1e-15)
    a = build_scenario("flat_perturbed", k=1, amplitude=1e-4, n=64, gamma0=1.0, period=TWO_PI)
    mode = 2.0 * np.abs(np.fft.rfft(a.positions[:, 1])[1]) / 64
    assert abs(mode - 1e-4) <= 1e-12
    two = build_scenario("flat_perturbed", k=1, amplitude=0.1, n=64, gamma0=2.0, period=TWO_PI)
    assert np.abs(vorticity_density(two) - 2.0).max() <= 0.2


@pytest.mark.parametrize("name, kw", [
    ("circle", {"n": 4}),
    ("circle", {"n": 16, "radius": -1.0}),
    ("ellipse", {"n": 16, "a": 1.0}),
    ("flat_perturbed", {"n": 16, "k": 8}),
    ("flat_perturbed", {"n": 16, "k": 0}),
    ("flat_perturbed", {"n": 16, "k": 1, "amplitude": -1.0}),
    ("spiral", {"n": 16}),
])
def test_invalid_scenarios(name, kw):
    with pytest.raises(DomainError):
        build_scenario(name, **kw)


@pytest.mark.parametrize("kwargs", [
    dict(topology="open_arc", gammas=[0, 1, 1], positions=np.zeros((3, 2)), weights=[1, 1, 1]),
    dict(topology="open_arc", gammas=[0, 1], positions=np.zeros((2, 2)), weights=[1, 1]),
    dict(topology="closed", gammas=[0, 1, 2], positions=np.eye(3)[:, :2], weights=[1, 1, 1]),
    dict(topology="closed", gammas=[0, 1, 3], positions=np.eye(3)[:, :2], weights=[1, 1, 1], period=3.0),
    dict(topology="periodic_strip", gammas=[0, 1, 2], positions=np.eye(3)[:, :2], weights=[1, 1, 1],
         period=3.0),
    dict(topology="open_arc", gammas=[0, 1, 2], positions=[[0, 0], [1, np.nan], [2, 0]], weights=[1, 1, 1]),
])
def test_sheet_curve_validation(kwargs):
    with pytest.raises((DomainError, ResolutionError)):
        SheetCurve(**kwargs)


def test_weights_sum_to_span():
    g = np.array([0.0, 0.3, 0.5, 1.2])
    assert math.isclose(trapezoid_weights(g, "open_arc").sum(), 1.2, rel_tol=1e-15)
    assert math.isclose(build_scenario("circle", n=33).total_circulation, TWO_PI, rel_tol=1e-15)


def test_runaway_strip_is_reported():
    c = build_scenario("flat_perturbed", k=1, amplitude=0.0, n=16, gamma0=1.0, period=1.0)
    stretched = c.with_positions(c.positions * [3.0, 1.0])
    with pytest.raises(ExcursionError):
        chord_arc_constant(stretched)


def test_positions_are_immutable():
    c = build_scenario("circle", n=8)
    with pytest.raises(ValueError):
        c.positions[0, 0] = 5.0


@pytest.mark.parametrize("curve", [
    build_scenario("ellipse", a=1.0, b=0.25, n=12),
    build_scenario("flat_perturbed", k=1, amplitude=0.1, n=12, gamma0=1.0, period=TWO_PI),
    open_arc(np.linspace(0.0, 1.0, 7) ** 2, np.random.default_rng(0).normal(size=(7, 2))),
], ids=["closed", "strip", "open"])
def test_csv_round_trip(tmp_path, curve):
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    assert path.read_text().splitlines()[0] == "gamma,x,y"
    back = read_curve_csv(path)
    assert back.topology is curve.topology
    assert np.array_equal(back.gammas, curve.gammas)
    assert np.array_equal(back.positions, curve.positions)
    assert np.array_equal(back.weights, curve.weights)
    assert back.period == curve.period and back.shift == curve.shift
