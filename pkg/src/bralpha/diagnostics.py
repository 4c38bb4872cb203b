"""Run reports: invariant drift, regularity over time, convergence order."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .dynamics import Snapshot, hamiltonian, linear_impulse
from .errors import DegenerateCurveError, DomainError, ExcursionError, InsufficientDataError
from .kernels import KernelSpec
from .sheet import (
    RegularityReport,
    SheetCurve,
    holder_seminorm,
    pairwise_ratios,
    vorticity_density,
)


class RunStatus(str, enum.Enum):
    COMPLETED = "Completed"
    COLLAPSED_SHEET = "CollapsedSheet"
    REGIME_EXIT = "RegimeExit"


def _pairs(snapshots) -> List[Tuple[float, SheetCurve]]:
    out = []
    for s in snapshots:
        if isinstance(s, Snapshot):
            out.append((s.state.t, s.state.curve))
        else:
            t, c = s
            out.append((float(t), c))
    return out


def _diameter(curve: SheetCurve) -> float:
    p = curve.positions
    return float(np.hypot(np.ptp(p[:, 0]), np.ptp(p[:, 1])))


@dataclass(frozen=True)
class ConservationLedger:
    times: np.ndarray
    impulse_drift: np.ndarray
    hamiltonian_drift: np.ndarray
    impulse_tolerance: float
    breaches: Tuple[int, ...] = ()


def conservation_report(snapshots, kernel: KernelSpec,
                        impulse_rtol: float = 1e-12) -> ConservationLedger:
    """Impulse and Hamiltonian drift relative to the first snapshot.

    Impulse drift is the Euclidean norm of the change; it is flagged when it
    exceeds ``impulse_rtol * total circulation * diameter`` of the initial
    curve.  The Hamiltonian drift is signed.
    """
    pairs = _pairs(snapshots)
    if len(pairs) < 2:
        raise DomainError("a conservation report needs at least two snapshots")
    first = pairs[0][1]
    i0 = linear_impulse(first)
    h0 = hamiltonian(first, kernel)
    times = np.array([t for t, _ in pairs])
    idrift = np.array([float(np.hypot(*(linear_impulse(c) - i0))) for _, c in pairs])
    hdrift = np.array([hamiltonian(c, kernel) - h0 for _, c in pairs])
    tol = impulse_rtol * abs(first.total_circulation) * max(_diameter(first), 1.0)
    breaches = tuple(int(i) for i in np.nonzero(idrift > tol)[0])
    return ConservationLedger(times, idrift, hdrift, tol, breaches)


def _regularity(curve: SheetCurve, beta: float) -> RegularityReport:
    chord, ratio = pairwise_ratios(curve)
    # coincident markers: the discrete infimum is exactly zero
    return RegularityReport(
        chord_arc=float(ratio.min()),
        lipschitz=float(ratio.max()),
        holder_beta=holder_seminorm(curve, beta),
        min_pair_distance=float(chord.min()),
    )


def regularity_timeseries(snapshots, beta: float = 0.5):
    """Regularity report per snapshot, plus a run status.

    Stops at the first snapshot whose vorticity density is degenerate
    (status CollapsedSheet) or whose strip has drifted beyond the
    nearest-image range (status RegimeExit); earlier reports are kept.
    """
    pairs = _pairs(snapshots)
    if not pairs:
        raise DomainError("need at least one snapshot")
    reports = []
    for _, curve in pairs:
        try:
            vorticity_density(curve)
        except DegenerateCurveError:
            return reports, RunStatus.COLLAPSED_SHEET
        try:
            reports.append(_regularity(curve, beta))
        except ExcursionError:
            return reports, RunStatus.REGIME_EXIT
    return reports, RunStatus.COMPLETED


@dataclass(frozen=True)
class RunReport:
    times: np.ndarray
    impulse_drift: np.ndarray
    hamiltonian_drift: np.ndarray
    regularity: Tuple[RegularityReport, ...]
    status: RunStatus = RunStatus.COMPLETED

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.impulse_drift) == len(self.hamiltonian_drift) == len(self.regularity) == n):
            raise DomainError("report arrays must share one length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("report times must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "impulse_drift": [float(v) for v in self.impulse_drift],
            "hamiltonian_drift": [float(v) for v in self.hamiltonian_drift],
            "chord_arc": [r.chord_arc for r in self.regularity],
            "lipschitz": [r.lipschitz for r in self.regularity],
            "holder_05": [r.holder_beta for r in self.regularity],
            "status": RunStatus(self.status).value,
        }


def build_run_report(snapshots, kernel: KernelSpec, status_hint: RunStatus = RunStatus.COMPLETED) -> RunReport:
    """Combine conservation and regularity series, truncated to the snapshots
    for which every diagnostic exists."""
    pairs = _pairs(snapshots)
    reports, status = regularity_timeseries(pairs)
    if status is RunStatus.COMPLETED:
        status = RunStatus(status_hint)
    pairs = pairs[:len(reports)]
    if len(pairs) >= 2:
        led = conservation_report(pairs, kernel)
        idrift, hdrift = led.impulse_drift, led.hamiltonian_drift
    else:
        idrift = np.zeros(len(pairs))
        hdrift = np.zeros(len(pairs))
    return RunReport(np.array([t for t, _ in pairs]), idrift, hdrift, tuple(reports), status)


def max_marker_error(curve: SheetCurve, reference: SheetCurve) -> float:
    d = curve.positions - reference.positions
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def convergence_order(runs: Sequence[Tuple[float, SheetCurve]], reference: SheetCurve) -> float:
    """Least-squares slope of ln(max marker error) against ln(dt)."""
    if len(runs) < 3:
        raise InsufficientDataError(f"need at least 3 runs, got {len(runs)}")
    dts = np.array([float(dt) for dt, _ in runs])
    if np.any(dts <= 0):
        raise InsufficientDataError("time steps must be positive")
    order = np.argsort(dts)
    dts = dts[order]
    ratios = dts[1:] / dts[:-1]
    if np.any(ratios <= 1.0 + 1e-12) or not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise InsufficientDataError("time steps must be distinct and in geometric progression")
    errs = np.array([max_marker_error(runs[i][1], reference) for i in order])
    if np.any(errs <= 0) or not np.all(np.isfinite(errs)):
        raise InsufficientDataError("errors must be positive and finite for a log-log fit")
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    if not math.isfinite(slope):
        raise InsufficientDataError("convergence slope is undefined")
    return float(slope)
