"""Time evolution of a marker sheet under the alpha-smoothed (or raw, or
blob) Birkhoff-Rott velocity, plus the discrete invariants.

Velocities are direct O(N^2) trapezoid sums.  Each target accumulates its
sources in ascending index with Neumaier compensation, so the result does
not depend on the worker count.
"""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import DomainError, SingularityError, TopologyMismatchError
from .kernels import BLOB, BR_ALPHA, TWO_PI, KernelKind, KernelSpec, kernel_eval, psi_scalar
from .sheet import SheetCurve, Topology

WORKERS_ENV = "BRALPHA_WORKERS"


class Stepper(str, enum.Enum):
    RK4 = "rk4"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class SimConfig:
    kernel: KernelSpec
    dt: float
    t_end: float
    output_every: int = 1
    stepper: Stepper = Stepper.RK4

    def __post_init__(self):
        object.__setattr__(self, "stepper", Stepper(self.stepper))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if not (self.t_end >= self.dt and math.isfinite(self.t_end)):
            raise DomainError(f"t_end must be finite and >= dt, got {self.t_end}")
        if isinstance(self.output_every, bool) or int(self.output_every) != self.output_every \
                or self.output_every < 1:
            raise DomainError(f"output_every must be an integer >= 1, got {self.output_every}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "dt": self.dt,
            "t_end": self.t_end,
            "output_every": int(self.output_every),
            "stepper": self.stepper.value,
        }


@dataclass(frozen=True)
class SimState:
    t: float
    curve: SheetCurve
    step_index: int = 0


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count: explicit argument, else $BRALPHA_WORKERS, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    return int(workers)


# ---------------------------------------------------------------------------
# compiled pair loops
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _neumaier_add(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@njit(cache=True, nogil=True)
def _velocity_fused(pos, w, kind, alpha, delta, period, nimages, zskip, out):
    n = pos.shape[0]
    su = np.zeros(n)
    cu = np.zeros(n)
    sv = np.zeros(n)
    cv = np.zeros(n)
    for j in range(n):
        xj = pos[j, 0]
        yj = pos[j, 1]
        for l in range(j + 1, n):
            u, v = kernel_eval(kind, alpha, delta, period, nimages, zskip,
                               xj - pos[l, 0], yj - pos[l, 1])
            # target j, source l
            su[j], cu[j] = _neumaier_add(su[j], cu[j], w[l] * u)
            sv[j], cv[j] = _neumaier_add(sv[j], cv[j], w[l] * v)
            # target l, source j: the kernel is odd
            su[l], cu[l] = _neumaier_add(su[l], cu[l], w[j] * -u)
            sv[l], cv[l] = _neumaier_add(sv[l], cv[l], w[j] * -v)
    for j in range(n):
        out[j, 0] = su[j] + cu[j]
        out[j, 1] = sv[j] + cv[j]


@njit(cache=True, nogil=True)
def _fill_rows(pos, kind, alpha, delta, period, nimages, zskip, lo, hi, ku, kv):
    n = pos.shape[0]
    for j in range(lo, hi):
        ku[j, j] = 0.0
        kv[j, j] = 0.0
        for l in range(j + 1, n):
            u, v = kernel_eval(kind, alpha, delta, period, nimages, zskip,
                               pos[j, 0] - pos[l, 0], pos[j, 1] - pos[l, 1])
            ku[j, l] = u
            kv[j, l] = v
            ku[l, j] = -u
            kv[l, j] = -v


@njit(cache=True, nogil=True)
def _sum_rows(ku, kv, w, lo, hi, out):
    n = ku.shape[0]
    for j in range(lo, hi):
        su = 0.0
        cu = 0.0
        sv = 0.0
        cv = 0.0
        for l in range(n):
            if l == j:
                continue
            su, cu = _neumaier_add(su, cu, w[l] * ku[j, l])
            sv, cv = _neumaier_add(sv, cv, w[l] * kv[j, l])
        out[j, 0] = su + cu
        out[j, 1] = sv + cv


@njit(cache=True, nogil=True)
def _hamiltonian_pairs(pos, w, kind, alpha, delta, period):
    n = pos.shape[0]
    s = 0.0
    c = 0.0
    for j in range(n):
        for l in range(j + 1, n):
            d1 = pos[j, 0] - pos[l, 0]
            if period > 0.0:
                d1 = d1 - period * round(d1 / period)
            d2 = pos[j, 1] - pos[l, 1]
            r = math.hypot(d1, d2)
            if kind == BR_ALPHA:
                p = psi_scalar(r, alpha)
            elif kind == BLOB:
                p = math.log(r * r + delta * delta) / (2.0 * TWO_PI)
            else:
                p = math.log(r) / TWO_PI
            s, c = _neumaier_add(s, c, w[j] * w[l] * p)
    return s + c


def _row_chunks(n, workers):
    # balance by pair count: row j owns n - 1 - j upper-triangle pairs
    cum = np.cumsum(np.arange(n - 1, -1, -1))
    targets = cum[-1] * np.arange(1, workers) / workers
    cuts = [0] + [int(np.searchsorted(cum, t)) + 1 for t in targets] + [n]
    cuts = sorted(set(min(max(c, 0), n) for c in cuts))
    return list(zip(cuts[:-1], cuts[1:]))


def check_topology(curve: SheetCurve, kernel: KernelSpec) -> None:
    """Raise :class:`TopologyMismatchError` unless the kernel fits the curve."""
    if curve.topology is Topology.PERIODIC_STRIP:
        if kernel.periodic is None:
            raise TopologyMismatchError("a periodic strip needs a periodic kernel")
        sx, sy = curve.shift
        if sy != 0.0:
            raise TopologyMismatchError("kernels are periodized along x1 only; shift must be (L, 0)")
        if not math.isclose(abs(sx), kernel.periodic, rel_tol=1e-12):
            raise TopologyMismatchError(
                f"kernel period {kernel.periodic} does not match strip shift {abs(sx)}"
            )
    elif kernel.periodic is not None:
        raise TopologyMismatchError(f"{curve.topology.value} curves need a non-periodic kernel")


def _velocity_array(pos, weights, params, workers):
    n = pos.shape[0]
    out = np.empty((n, 2))
    if workers == 1 or n < 64:
        _velocity_fused(pos, weights, *params, out)
    else:
        ku = np.empty((n, n))
        kv = np.empty((n, n))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda c: _fill_rows(pos, *params, c[0], c[1], ku, kv),
                          _row_chunks(n, workers)))
            bounds = np.linspace(0, n, workers + 1).astype(int)
            list(pool.map(lambda c: _sum_rows(ku, kv, weights, c[0], c[1], out),
                          zip(bounds[:-1], bounds[1:])))
    if np.isnan(out).any():
        raise SingularityError("two markers coincide under the raw Biot-Savart kernel")
    return out


def induced_velocity(curve: SheetCurve, kernel: KernelSpec, workers: Optional[int] = None):
    """Trapezoid-rule velocity at every marker, shape (N, 2)."""
    check_topology(curve, kernel)
    return _velocity_array(np.ascontiguousarray(curve.positions), curve.weights,
                           kernel.params(), resolve_workers(workers))


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def _advance(x, dt, rhs: Callable, stepper: Stepper, k1=None):
    if k1 is None:
        k1 = rhs(x)
    if stepper is Stepper.MIDPOINT:
        return x + dt * rhs(x + (0.5 * dt) * k1)
    k2 = rhs(x + (0.5 * dt) * k1)
    k3 = rhs(x + (0.5 * dt) * k2)
    k4 = rhs(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rhs_for(curve, kernel, workers):
    check_topology(curve, kernel)
    params = kernel.params()
    w = curve.weights
    nw = resolve_workers(workers)
    return lambda x: _velocity_array(np.ascontiguousarray(x), w, params, nw)


def step(state: SimState, config: SimConfig, workers: Optional[int] = None) -> SimState:
    """Advance one fixed step; circulations and weights are carried unchanged."""
    rhs = _rhs_for(state.curve, config.kernel, workers)
    x = _advance(state.curve.positions, config.dt, rhs, config.stepper)
    k = state.step_index + 1
    return SimState(t=k * config.dt, curve=state.curve.with_positions(x), step_index=k)


def integrate(curve: SheetCurve, kernel: KernelSpec, dt: float, n_steps: int,
              stepper=Stepper.RK4, workers: Optional[int] = None) -> SheetCurve:
    """Take ``n_steps`` steps of size ``dt`` (which may be negative)."""
    rhs = _rhs_for(curve, kernel, workers)
    stepper = Stepper(stepper)
    x = np.array(curve.positions)
    for _ in range(n_steps):
        x = _advance(x, dt, rhs, stepper)
    return curve.with_positions(x)


@dataclass(frozen=True)
class Snapshot:
    state: SimState
    velocity: np.ndarray


def simulate(curve: SheetCurve, config: SimConfig, workers: Optional[int] = None,
             stop: Optional[Callable[[Snapshot], bool]] = None):
    """Yield a :class:`Snapshot` at t = 0 and every ``output_every`` steps.

    ``stop`` is called on each snapshot; returning True ends the run after
    that snapshot is yielded.
    """
    rhs = _rhs_for(curve, config.kernel, workers)
    x = np.array(curve.positions)
    n_steps = config.n_steps
    for k in range(n_steps + 1):
        u = rhs(x)
        if k % config.output_every == 0 or k == n_steps:
            snap = Snapshot(SimState(k * config.dt, curve.with_positions(x), k), u)
            yield snap
            if stop is not None and stop(snap):
                return
        if k < n_steps:
            x = _advance(x, config.dt, rhs, config.stepper, k1=u)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def linear_impulse(curve: SheetCurve):
    """Sum_j w_j x_j, exactly rounded per component."""
    w = curve.weights
    return np.array([math.fsum(w * curve.positions[:, 0]), math.fsum(w * curve.positions[:, 1])])


def hamiltonian(curve: SheetCurve, kernel: KernelSpec) -> float:
    """Pair interaction energy sum_{j<l} w_j w_l Psi(|x_j - x_l|) for the kernel's
    stream profile.  Periodic strips use the nearest-image distance only, so
    the value is a diagnostic, not an invariant, for that topology."""
    pos = np.ascontiguousarray(curve.positions)
    kind, alpha, delta, period = kernel.params()[:4]
    if curve.topology is not Topology.PERIODIC_STRIP:
        period = 0.0
    j, l = np.triu_indices(curve.n, 1)
    dist = np.hypot(*(pos[j] - pos[l]).T)
    if np.any(dist == 0.0):
        if kernel.kind is KernelKind.RAW_BR:
            raise SingularityError("coincident markers under the raw kernel")
        warnings.warn("coincident markers in Hamiltonian evaluation", RuntimeWarning)
    return float(_hamiltonian_pairs(pos, curve.weights, kind, alpha, delta, period))


def interaction_hamiltonian(curve: SheetCurve, alpha: float) -> float:
    """Hamiltonian of the alpha-smoothed marker system."""
    return hamiltonian(curve, KernelSpec.br_alpha(alpha))
