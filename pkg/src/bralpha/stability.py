"""Linear stability of a flat sheet of uniform strength gamma0.

Closed-form growth rates for the three kernels, the 2x2 Fourier mode
system, a quadrature check of the sine transform of d_psi_alpha, and growth
rates measured from simulation snapshots.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DomainError, QuadratureError, RegimeError, WindowError
from .kernels import KernelKind, KernelSpec, d_psi_alpha
from .sheet import SheetCurve, Topology
from .special_functions import bessel_k0_k1_scaled

LINEAR_BAND = 1e-2
TRANSIENT_GROWTH = 3.0
MIN_WINDOW_SNAPSHOTS = 8


def _nonzero_k(k):
    k = float(k)
    if k == 0.0 or not math.isfinite(k):
        raise DomainError(f"wavenumber must be finite and nonzero, got {k}")
    return k


def d_of_k(k: float, alpha: float) -> float:
    """(1 + 1/(alpha k)^2)^(-1/2) - 1, evaluated without cancellation."""
    k = _nonzero_k(k)
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    t = alpha * abs(k)
    s = math.hypot(1.0, t)
    return -1.0 / (s * (t + s))


def growth_rate(k: float, gamma0: float, regularization: KernelSpec) -> float:
    """Positive eigenvalue of the linearized flat-sheet system."""
    k = _nonzero_k(k)
    base = 0.5 * abs(gamma0) * abs(k)
    kind = regularization.kind
    if kind is KernelKind.RAW_BR:
        return base
    if kind is KernelKind.BR_ALPHA:
        return -base * d_of_k(k, regularization.alpha)
    return base * math.exp(-regularization.delta * abs(k))


def _symbol(k, regularization: KernelSpec):
    # 2 * int_0^inf sin(|k| x) d_psi(x) dx for the kernel's stream profile
    kind = regularization.kind
    if kind is KernelKind.RAW_BR:
        return 0.5
    if kind is KernelKind.BR_ALPHA:
        return -0.5 * d_of_k(k, regularization.alpha)
    return 0.5 * math.exp(-regularization.delta * abs(k))


def _symbol_integral(k, regularization: KernelSpec):
    # int_0^|k| of the symbol, in closed form
    q = abs(k)
    kind = regularization.kind
    if kind is KernelKind.RAW_BR:
        return 0.5 * q
    if kind is KernelKind.BR_ALPHA:
        a = 1.0 / regularization.alpha
        s = math.hypot(q, a)
        return 0.5 * q * (a + a * a / (s + q)) / (s + a)
    return -math.expm1(-regularization.delta * q) / (2.0 * regularization.delta)


def linearized_growth_rate(k: float, gamma0: float, regularization: KernelSpec) -> float:
    """Growth rate of the marker system linearized about the flat sheet.

    A normal displacement drives a tangential velocity with symbol
    ``int_0^|k| mu``, and tangential strain drives a normal velocity with
    symbol ``|k| mu(k)``, where ``mu`` is the sine transform of the radial
    velocity profile.  The rate is ``|gamma0| sqrt`` of their product.  The
    two symbols coincide only for the raw kernel, where this reduces to
    :func:`growth_rate`; for smoothed kernels it is larger.
    """
    k = _nonzero_k(k)
    tangential = _symbol_integral(k, regularization)
    normal = abs(k) * _symbol(k, regularization)
    return abs(gamma0) * math.sqrt(tangential * normal)


def mode_matrix(k: float, gamma0: float, alpha: float) -> np.ndarray:
    """Coefficient matrix acting on (x2_hat, gamma_hat)."""
    k = _nonzero_k(k)
    d = d_of_k(k, alpha)
    sg = math.copysign(1.0, k)
    return np.array([
        [0.0, 0.5j * sg * d],
        [-0.5j * gamma0 * gamma0 * k * k * sg * d, 0.0],
    ], dtype=complex)


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    gamma0: float
    regularization: KernelSpec
    lam: float

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise DomainError(f"growth rate must be >= 0, got {self.lam}")
        cap = 0.5 * abs(self.gamma0) * abs(self.k)
        if self.lam > cap * (1.0 + 1e-15):
            raise DomainError(f"growth rate {self.lam} exceeds the unregularized rate {cap}")

    @classmethod
    def evaluate(cls, k, gamma0, regularization: KernelSpec) -> "DispersionPoint":
        return cls(float(k), float(gamma0), regularization, growth_rate(k, gamma0, regularization))


# ---------------------------------------------------------------------------
# sine-transform check
# ---------------------------------------------------------------------------

def _tail_dpsi(x, alpha):
    k0e, k1e = bessel_k0_k1_scaled(x / alpha)
    return (1.0 / x - math.exp(-x / alpha) * k1e / alpha) / (2.0 * math.pi)


def fourier_sine_integral(k: float, alpha: float) -> float:
    """2 * int_0^inf sin(k x) d_psi_alpha(x) dx.

    Split at 10 alpha: the head uses an oscillation-weighted rule on a
    finite interval, the 1/x tail the cycle-by-cycle extrapolated Fourier
    rule for semi-infinite ranges.
    """
    k = _nonzero_k(k)
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    w = abs(k)
    split = 10.0 * alpha
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            head, _ = quad(d_psi_alpha, 0.0, split, args=(alpha,), weight="sin", wvar=w,
                           epsabs=1e-13, epsrel=1e-12, limit=400)
            tail, _ = quad(_tail_dpsi, split, np.inf, args=(alpha,), weight="sin", wvar=w,
                           epsabs=1e-13, limlst=200, limit=400)
        except IntegrationWarning as exc:
            raise QuadratureError(f"sine transform did not converge at k={k}, alpha={alpha}: {exc}")
    return math.copysign(2.0 * (head + tail), k)


def verify_fourier_identity(k: float, alpha: float) -> float:
    """Residual between the sine transform of d_psi_alpha and -sgn(k) d(k) / 2."""
    numeric = fourier_sine_integral(k, alpha)
    expected = -0.5 * math.copysign(1.0, k) * d_of_k(k, alpha)
    return abs(numeric - expected)


# ---------------------------------------------------------------------------
# growth measured from snapshots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFit:
    k: int
    measured_lambda: float
    fit_window: Tuple[float, float]
    residual: float

    def __post_init__(self):
        lo, hi = self.fit_window
        if not lo < hi:
            raise WindowError(f"empty fit window {self.fit_window}")
        if not math.isfinite(self.residual):
            raise WindowError("fit residual is not finite")

    def to_dict(self):
        return {
            "k": self.k,
            "measured_lambda": self.measured_lambda,
            "fit_window": list(self.fit_window),
            "residual": self.residual,
        }


def mode_amplitude(curve: SheetCurve, k: int) -> float:
    """|mode-k Fourier coefficient| of x2 as a function of Gamma, real-amplitude
    normalized (a cos(k theta) has amplitude a)."""
    if curve.topology is Topology.OPEN_ARC:
        raise DomainError("mode amplitudes need a periodic parameterization")
    phase = np.exp(-2j * math.pi * k * curve.gammas / curve.period)
    return float(abs(2.0 / curve.period * np.sum(curve.weights * curve.positions[:, 1] * phase)))


def _default_window(times, amps, band):
    low = np.minimum.accumulate(amps)
    grown = np.nonzero(amps >= math.exp(TRANSIENT_GROWTH) * low)[0]
    if grown.size == 0:
        raise WindowError(f"mode never grew by e^{TRANSIENT_GROWTH:g} over its minimum")
    # stop at the first exit from the linear band
    exits = np.nonzero(amps > band)[0]
    last = exits[0] - 1 if exits.size else amps.size - 1
    if last <= grown[0]:
        raise WindowError("mode left the linear band before the transient decayed")
    return float(times[grown[0]]), float(times[last])


def measure_growth_rate(snapshots: Sequence[Tuple[float, SheetCurve]], k: int,
                        window: Optional[Tuple[float, float]] = None,
                        period: Optional[float] = None) -> GrowthFit:
    """Least-squares slope of ln(mode-k amplitude of x2) against t.

    ``snapshots`` holds (t, curve) pairs.  Without an explicit window, the
    fit starts once the amplitude has grown by e^3 over its running minimum
    and ends before it leaves the linear band 1e-2 L, where L is the strip
    period (``period`` overrides it, e.g. for synthetic amplitude series).
    """
    times = np.array([t for t, _ in snapshots], dtype=float)
    if times.size and np.any(np.diff(times) <= 0):
        raise WindowError("snapshot times must be strictly increasing")
    amps = np.array([mode_amplitude(c, k) for _, c in snapshots])
    if period is None:
        if not snapshots:
            raise WindowError("no snapshots")
        shift = snapshots[0][1].shift
        period = abs(shift[0]) if shift is not None else snapshots[0][1].period
    return fit_growth(times, amps, k, window, LINEAR_BAND * period)


def fit_growth(times, amps, k: int, window=None, band: float = np.inf) -> GrowthFit:
    """Fit ln(amps) = c + lambda t over ``window`` (default window as in
    :func:`measure_growth_rate`)."""
    times = np.asarray(times, dtype=float)
    amps = np.asarray(amps, dtype=float)
    if np.any(amps <= 0) or not np.all(np.isfinite(amps)):
        raise RegimeError("mode amplitude must stay positive and finite")
    if window is None:
        window = _default_window(times, amps, band)
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise WindowError(f"window must satisfy t_lo < t_hi, got {window}")
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < MIN_WINDOW_SNAPSHOTS:
        raise WindowError(
            f"{int(sel.sum())} snapshots in window {window}; need {MIN_WINDOW_SNAPSHOTS}"
        )
    if np.any(amps[sel] > band):
        raise RegimeError(f"mode amplitude exceeds the linear band {band:g} inside the window")
    t = times[sel]
    y = np.log(amps[sel])
    A = np.column_stack([t, np.ones_like(t)])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return GrowthFit(int(k), float(coef[0]), (lo, hi), resid)
