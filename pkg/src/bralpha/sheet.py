"""Lagrangian marker representation of a vortex sheet and its regularity
functionals (chord-arc constant, Lipschitz and Hoelder seminorms).

Markers are parameterized by circulation.  The functionals are exact
pairwise sups/infs over markers; nothing is interpolated between them.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateCurveError, DomainError, ExcursionError, ResolutionError

COLLAPSE_THRESHOLD = 1e-12


class Topology(str, enum.Enum):
    CLOSED = "closed"
    PERIODIC_STRIP = "periodic_strip"
    OPEN_ARC = "open_arc"


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SheetCurve:
    """Ordered markers ``(gamma_j, x_j)`` with quadrature weights.

    ``period`` is the circulation period P for closed and periodic-strip
    curves.  A periodic strip stores one fundamental period and satisfies
    ``x(gamma + P) = x(gamma) + shift``.
    """

    topology: Topology
    gammas: np.ndarray
    positions: np.ndarray
    weights: np.ndarray
    period: Optional[float] = None
    shift: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "gammas", _frozen(self.gammas))
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "weights", _frozen(self.weights))
        n = self.gammas.shape[0]
        if self.gammas.ndim != 1 or self.positions.shape != (n, 2) or self.weights.shape != (n,):
            raise DomainError("gammas (N,), positions (N, 2) and weights (N,) must agree")
        if n < 3:
            raise ResolutionError(f"a sheet needs at least 3 markers, got {n}")
        if not np.all(np.diff(self.gammas) > 0):
            raise DomainError("gammas must be strictly increasing")
        if not np.all(self.weights > 0):
            raise DomainError("weights must be positive")
        if not np.all(np.isfinite(self.positions)):
            raise DomainError("positions must be finite")
        if self.topology is Topology.OPEN_ARC:
            if self.period is not None or self.shift is not None:
                raise DomainError("an open arc has no period or shift")
        else:
            if self.period is None or not self.period > 0:
                raise DomainError(f"{self.topology.value} needs a positive period")
            if self.gammas[-1] - self.gammas[0] >= self.period:
                raise DomainError("markers must span less than one period")
            if self.topology is Topology.PERIODIC_STRIP:
                if self.shift is None:
                    raise DomainError("a periodic strip needs a shift vector")
                object.__setattr__(self, "shift", (float(self.shift[0]), float(self.shift[1])))
            elif self.shift is not None:
                raise DomainError("a closed curve has no shift")

    @property
    def n(self) -> int:
        return self.gammas.shape[0]

    @property
    def total_circulation(self) -> float:
        return math.fsum(self.weights)

    @property
    def is_periodic(self) -> bool:
        return self.topology is not Topology.OPEN_ARC

    def with_positions(self, positions) -> "SheetCurve":
        return SheetCurve(self.topology, self.gammas, positions, self.weights,
                          self.period, self.shift)

    def manifest(self) -> dict:
        return {
            "topology": self.topology.value,
            "n": self.n,
            "period": self.period,
            "shift": list(self.shift) if self.shift is not None else None,
        }


def trapezoid_weights(gammas, topology, period=None):
    """Composite trapezoid weights in circulation.

    Uniform P/N for periodic topologies; the usual end-halved rule for open
    arcs.
    """
    g = np.asarray(gammas, dtype=np.float64)
    if Topology(topology) is Topology.OPEN_ARC:
        h = np.diff(g)
        w = np.zeros_like(g)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w
    return np.full(g.shape, period / g.shape[0])


@dataclass(frozen=True)
class RegularityReport:
    chord_arc: float
    lipschitz: float
    holder_beta: float
    min_pair_distance: float

    def __post_init__(self):
        vals = (self.chord_arc, self.lipschitz, self.holder_beta, self.min_pair_distance)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise DomainError(f"regularity fields must be finite and >= 0: {vals}")


# ---------------------------------------------------------------------------
# pairwise functionals
# ---------------------------------------------------------------------------

def _pair_indices(n):
    return np.triu_indices(n, k=1)


def parameter_distance(curve: SheetCurve, j, l):
    """|gamma_j - gamma_l|, taken modulo the period for periodic curves."""
    d = np.abs(curve.gammas[j] - curve.gammas[l])
    if curve.is_periodic:
        d = np.minimum(d, curve.period - d)
    return d


def chord_distance(curve: SheetCurve, j, l):
    """|x_j - x_l|; for a periodic strip, the nearest of the images -1, 0, +1."""
    dx = curve.positions[j] - curve.positions[l]
    dist = np.hypot(dx[..., 0], dx[..., 1])
    if curve.topology is Topology.PERIODIC_STRIP:
        _check_lateral_excursion(curve)
        sx, sy = curve.shift
        for m in (-1.0, 1.0):
            dist = np.minimum(dist, np.hypot(dx[..., 0] - m * sx, dx[..., 1] - m * sy))
    return dist


def _check_lateral_excursion(curve):
    sx, sy = curve.shift
    slen = math.hypot(sx, sy)
    along = (curve.positions @ np.array([sx, sy])) / slen
    if along.max() - along.min() > 1.5 * slen:
        raise ExcursionError(
            "sheet spans more than 1.5 periods along the shift; nearest-image "
            "chord distances are no longer reliable"
        )


def pairwise_ratios(curve):
    j, l = _pair_indices(curve.n)
    chord = chord_distance(curve, j, l)
    return chord, chord / parameter_distance(curve, j, l)


def chord_arc_constant(curve: SheetCurve) -> float:
    """Discrete chord-arc constant: min over marker pairs of chord / parameter gap."""
    chord, ratio = pairwise_ratios(curve)
    if np.any(chord == 0.0):
        raise DegenerateCurveError("two distinct markers coincide; the curve is not chord-arc")
    return float(ratio.min())


def lipschitz_seminorm(curve: SheetCurve) -> float:
    """Max over marker pairs of chord / parameter gap."""
    _, ratio = pairwise_ratios(curve)
    return float(ratio.max())


def holder_seminorm(curve: SheetCurve, beta: float) -> float:
    """Discrete beta-Hoelder seminorm of dx/dgamma over all marker pairs."""
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    der = derivative_along(curve)
    j, l = _pair_indices(curve.n)
    d = der[j] - der[l]
    num = np.hypot(d[:, 0], d[:, 1])
    return float((num / parameter_distance(curve, j, l) ** beta).max())


def regularity_report(curve: SheetCurve, beta: float = 0.5) -> RegularityReport:
    chord, ratio = pairwise_ratios(curve)
    if np.any(chord == 0.0):
        raise DegenerateCurveError("two distinct markers coincide; the curve is not chord-arc")
    return RegularityReport(
        chord_arc=float(ratio.min()),
        lipschitz=float(ratio.max()),
        holder_beta=holder_seminorm(curve, beta),
        min_pair_distance=float(chord.min()),
    )


# ---------------------------------------------------------------------------
# derivative and density
# ---------------------------------------------------------------------------

# integer stencils, divided by 12 h once, so low-degree data stays exact
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])
_LEFT = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]),
         np.array([-3.0, -10.0, 18.0, -6.0, 1.0]))


def _fd_weights(offsets):
    # first-derivative weights at 0 exact for polynomials of degree < len(offsets)
    k = len(offsets)
    vander = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


def _is_uniform(curve):
    h = np.diff(curve.gammas)
    if curve.is_periodic:
        h = np.append(h, curve.period - (curve.gammas[-1] - curve.gammas[0]))
    return np.ptp(h) <= 1e-12 * np.abs(h).max(), float(np.mean(h))


def derivative_along(curve: SheetCurve) -> np.ndarray:
    """dx/dgamma at every marker, fourth order in the marker spacing.

    Periodic curves use five-point central differences across the seam
    (adding the shift for periodic strips); open arcs switch to one-sided
    five-point stencils at the two ends on each side.
    """
    n = curve.n
    if n < 5:
        raise ResolutionError(f"derivative_along needs at least 5 markers, got {n}")
    x = curve.positions
    g = curve.gammas
    uniform, h = _is_uniform(curve)

    if curve.is_periodic:
        shift = np.array(curve.shift if curve.shift is not None else (0.0, 0.0))
        idx = np.arange(n)[:, None] + np.arange(-2, 3)[None, :]
        wraps = np.floor_divide(idx, n)
        idx = idx % n
        pts = x[idx] + wraps[..., None] * shift
        if uniform:
            return np.einsum("k,jkd->jd", _CENTRAL, pts) / (12.0 * h)
        par = g[idx] + wraps * curve.period
        w = np.array([_fd_weights(par[j] - g[j]) for j in range(n)])
        return np.einsum("jk,jkd->jd", w, pts)

    out = np.empty_like(x)
    if uniform:
        inner = np.arange(2, n - 2)
        stencil = inner[:, None] + np.arange(-2, 3)[None, :]
        out[inner] = np.einsum("k,jkd->jd", _CENTRAL, x[stencil]) / (12.0 * h)
        for side, w in enumerate(_LEFT):
            out[side] = w @ x[:5] / (12.0 * h)
            out[n - 1 - side] = -(w @ x[::-1][:5]) / (12.0 * h)
        return out
    for j in range(n):
        lo = min(max(j - 2, 0), n - 5)
        sl = slice(lo, lo + 5)
        out[j] = _fd_weights(g[sl] - g[j]) @ x[sl]
    return out


def vorticity_density(curve: SheetCurve) -> np.ndarray:
    """Sheet strength 1/|dx/dgamma| at each marker."""
    der = derivative_along(curve)
    speed = np.hypot(der[:, 0], der[:, 1])
    if np.any(speed <= COLLAPSE_THRESHOLD):
        j = int(np.argmin(speed))
        raise DegenerateCurveError(
            f"sheet collapsed at marker {j}: |dx/dgamma| = {speed[j]:.3e}"
        )
    return 1.0 / speed


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

SCENARIOS = ("circle", "ellipse", "flat_perturbed")


def _positive_param(params, key, default=None):
    val = params.get(key, default)
    if val is None:
        raise DomainError(f"missing scenario parameter {key!r}")
    val = float(val)
    if not (val > 0 and math.isfinite(val)):
        raise DomainError(f"scenario parameter {key!r} must be > 0, got {val}")
    return val


def _count_param(params, key="n", minimum=5):
    if key not in params:
        raise DomainError(f"missing scenario parameter {key!r}")
    val = params[key]
    if isinstance(val, bool) or int(val) != val or int(val) < minimum:
        raise DomainError(f"scenario parameter {key!r} must be an integer >= {minimum}, got {val}")
    return int(val)


def _closed_conic(a, b, n, total):
    j = np.arange(n)
    theta = 2.0 * np.pi * j / n
    gammas = total * j / n
    pos = np.column_stack([a * np.cos(theta), b * np.sin(theta)])
    return SheetCurve(Topology.CLOSED, gammas, pos, np.full(n, total / n), period=total)


def build_scenario(name: str, **params) -> SheetCurve:
    """Build one of the preset initial sheets.

    circle(radius, n, total_circulation=2pi); ellipse(a, b, n,
    total_circulation=2pi); flat_perturbed(k, amplitude, n, gamma0, period).
    For flat_perturbed the circulation period is gamma0 * period, so the
    unperturbed density is gamma0.
    """
    if name == "circle":
        r = _positive_param(params, "radius", 1.0)
        n = _count_param(params)
        total = _positive_param(params, "total_circulation", 2.0 * math.pi)
        return _closed_conic(r, r, n, total)
    if name == "ellipse":
        a = _positive_param(params, "a")
        b = _positive_param(params, "b")
        n = _count_param(params)
        total = _positive_param(params, "total_circulation", 2.0 * math.pi)
        return _closed_conic(a, b, n, total)
    if name == "flat_perturbed":
        n = _count_param(params)
        gamma0 = _positive_param(params, "gamma0", 1.0)
        length = _positive_param(params, "period", 2.0 * math.pi)
        k = params.get("k")
        if k is None or isinstance(k, bool) or int(k) != k or int(k) < 1:
            raise DomainError(f"scenario parameter 'k' must be a positive integer, got {k}")
        k = int(k)
        if 2 * k >= n:
            raise DomainError(f"mode k={k} is not resolved by n={n} markers")
        amp = float(params.get("amplitude", 0.0))
        if not math.isfinite(amp) or amp < 0:
            raise DomainError(f"amplitude must be finite and >= 0, got {amp}")
        j = np.arange(n)
        total = gamma0 * length
        gammas = total * j / n
        pos = np.column_stack([length * j / n, amp * np.cos(2.0 * np.pi * k * j / n)])
        return SheetCurve(Topology.PERIODIC_STRIP, gammas, pos, np.full(n, total / n),
                          period=total, shift=(length, 0.0))
    raise DomainError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


# ---------------------------------------------------------------------------
# CSV + sidecar
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_curve_csv(curve: SheetCurve, path) -> None:
    """Write ``gamma,x,y`` rows plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    lines = ["gamma,x,y"]
    for g, (x, y) in zip(curve.gammas, curve.positions):
        lines.append(f"{_fmt(g)},{_fmt(x)},{_fmt(y)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    side = curve.manifest()
    side["weights"] = "uniform" if curve.is_periodic else "trapezoid"
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")


def read_curve_csv(path) -> SheetCurve:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    topo = Topology(side["topology"])
    gammas = data[:, 0]
    shift = tuple(side["shift"]) if side.get("shift") is not None else None
    return SheetCurve(topo, gammas, data[:, 1:3],
                      trapezoid_weights(gammas, topo, side.get("period")),
                      period=side.get("period"), shift=shift)
