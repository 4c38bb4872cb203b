"""Velocity kernels: raw Biot-Savart, the alpha-smoothed kernel, the Krasny
blob, the Helmholtz Green function, and their x1-periodized versions.

Points are plain float arrays with a trailing axis of length 2.  Every
kernel is evaluated through one compiled scalar routine, ``kernel_eval``,
which the pairwise loops in :mod:`bralpha.dynamics` call directly.

Odd symmetry is enforced structurally: a point in the lower half of the
(x1, x2) lexicographic order is reflected, evaluated, and negated, so
``K(-x) == -K(x)`` holds bit for bit for every kernel kind.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy.special import zeta

from .errors import DomainError, SingularityError
from .special_functions import (
    ASYMPTOTIC_CUTOFF,
    SERIES_CUTOFF,
    _k0,
    _k0_plus_log,
    _k1,
    _k1_complement,
    bessel_k0,
)

TWO_PI = 2.0 * math.pi

RAW_BR = 0
BR_ALPHA = 1
BLOB = 2

# cot(w) - 1/w = -sum_n _COT_SERIES[n] w^(2n+1)
_COT_SERIES = np.array([2.0 * zeta(2.0 * n) / math.pi ** (2 * n) for n in range(1, 15)])
_COT_SERIES_RADIUS = 0.5


class KernelKind(str, enum.Enum):
    RAW_BR = "raw_br"
    BR_ALPHA = "br_alpha"
    BLOB = "blob"

    @property
    def code(self) -> int:
        return {"raw_br": RAW_BR, "br_alpha": BR_ALPHA, "blob": BLOB}[self.value]


@dataclass(frozen=True)
class KernelSpec:
    """Which desingularization is active, plus optional x1-periodicity."""

    kind: KernelKind
    alpha: Optional[float] = None
    delta: Optional[float] = None
    periodic: Optional[float] = None
    image_tolerance: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.BR_ALPHA:
            if self.alpha is None or not self.alpha > 0 or not math.isfinite(self.alpha):
                raise DomainError(f"br_alpha kernel needs alpha > 0, got {self.alpha}")
        if self.kind is KernelKind.BLOB:
            if self.delta is None or not self.delta > 0 or not math.isfinite(self.delta):
                raise DomainError(f"blob kernel needs delta > 0, got {self.delta}")
        if self.periodic is not None:
            if not self.periodic > 0 or not math.isfinite(self.periodic):
                raise DomainError(f"period must be > 0, got {self.periodic}")
            if not 0 < self.image_tolerance <= 1e-6:
                raise DomainError(
                    f"image_tolerance must lie in (0, 1e-6], got {self.image_tolerance}"
                )

    @classmethod
    def raw(cls, periodic=None):
        return cls(KernelKind.RAW_BR, periodic=periodic)

    @classmethod
    def br_alpha(cls, alpha, periodic=None, image_tolerance=1e-12):
        return cls(KernelKind.BR_ALPHA, alpha=alpha, periodic=periodic,
                   image_tolerance=image_tolerance)

    @classmethod
    def blob(cls, delta, periodic=None):
        return cls(KernelKind.BLOB, delta=delta, periodic=periodic)

    def image_count(self) -> int:
        """Images per side summed for the periodized alpha correction."""
        if self.periodic is None or self.kind is not KernelKind.BR_ALPHA:
            return 0
        return math.ceil(self.alpha / self.periodic * math.log(1.0 / self.image_tolerance)) + 1

    def params(self):
        """Flat argument tuple for :func:`kernel_eval`."""
        return (
            self.kind.code,
            float(self.alpha or 0.0),
            float(self.delta or 0.0),
            float(self.periodic or 0.0),
            self.image_count(),
            math.log(1.0 / self.image_tolerance),
        )

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---------------------------------------------------------------------------
# compiled scalar routines
# ---------------------------------------------------------------------------

@njit(cache=True)
def psi_scalar(r, alpha):
    z = r / alpha
    if z <= SERIES_CUTOFF:
        return (_k0_plus_log(z, SERIES_CUTOFF, ASYMPTOTIC_CUTOFF) + math.log(alpha)) / TWO_PI
    return (_k0(z, SERIES_CUTOFF, ASYMPTOTIC_CUTOFF) + math.log(r)) / TWO_PI


@njit(cache=True)
def dpsi_scalar(r, alpha):
    return _k1_complement(r / alpha, SERIES_CUTOFF, ASYMPTOTIC_CUTOFF) / (TWO_PI * alpha)


@njit(cache=True)
def _free(kind, alpha, delta, x1, x2):
    if kind == BR_ALPHA:
        r = math.sqrt(x1 * x1 + x2 * x2)
        if r == 0.0:
            return 0.0, 0.0
        f = dpsi_scalar(r, alpha) / r
        return -x2 * f, x1 * f
    if kind == BLOB:
        c = 1.0 / (TWO_PI * (x1 * x1 + x2 * x2 + delta * delta))
        return -x2 * c, x1 * c
    r2 = x1 * x1 + x2 * x2
    if r2 == 0.0:
        return np.nan, np.nan
    c = 1.0 / (TWO_PI * r2)
    return -x2 * c, x1 * c


@njit(cache=True)
def _lattice_ratio(a, b):
    # returns (sinh(a)/D, sin(b)/D) with D = cosh(a) - cos(b), cancellation-free
    if abs(a) <= 1.0:
        sa = math.sinh(0.5 * a)
        sb = math.sin(0.5 * b)
        d = 2.0 * (sa * sa + sb * sb)
        if d == 0.0:
            return np.nan, np.nan
        return math.sinh(a) / d, math.sin(b) / d
    e = math.exp(-abs(a))
    d = 1.0 + e * e - 2.0 * math.cos(b) * e
    return math.copysign((1.0 - e * e) / d, a), 2.0 * math.sin(b) * e / d


@njit(cache=True)
def periodic_raw_scalar(x1, x2, period):
    p, q = _lattice_ratio(TWO_PI * x2 / period, TWO_PI * x1 / period)
    return -p / (2.0 * period), q / (2.0 * period)


@njit(cache=True)
def _periodic_blob(x1, x2, delta, period):
    c = math.sqrt(x2 * x2 + delta * delta)
    p, q = _lattice_ratio(TWO_PI * c / period, TWO_PI * x1 / period)
    return -x2 * p / (2.0 * c * period), q / (2.0 * period)


@njit(cache=True)
def _periodic_minus_free(x1, x2, period):
    # sum over nonzero images of the raw kernel; smooth, zero at the origin
    wr = math.pi * x1 / period
    wi = math.pi * x2 / period
    if math.hypot(wr, wi) < _COT_SERIES_RADIUS:
        w = complex(wr, wi)
        w2 = w * w
        s = 0.0 + 0.0j
        for n in range(_COT_SERIES.shape[0] - 1, -1, -1):
            s = s * w2 + _COT_SERIES[n]
        s = -s * w
        return s.imag / (2.0 * period), s.real / (2.0 * period)
    pu, pv = periodic_raw_scalar(x1, x2, period)
    ku, kv = _free(RAW_BR, 0.0, 0.0, x1, x2)
    return pu - ku, pv - kv


@njit(cache=True)
def _alpha_images(x1, x2, alpha, period, nimages, zskip):
    u = 0.0
    v = 0.0
    for i in range(2 * nimages):
        m = i // 2 + 1
        y1 = x1 + m * period if i % 2 == 0 else x1 - m * period
        r = math.sqrt(y1 * y1 + x2 * x2)
        z = r / alpha
        if z > zskip:
            continue
        f = -_k1(z, SERIES_CUTOFF, ASYMPTOTIC_CUTOFF) / (TWO_PI * alpha * r)
        u += -x2 * f
        v += y1 * f
    return u, v


@njit(cache=True)
def _kernel_canonical(kind, alpha, delta, period, nimages, zskip, x1, x2):
    if period == 0.0:
        return _free(kind, alpha, delta, x1, x2)
    x1 = x1 - period * round(x1 / period)
    if kind == RAW_BR:
        return periodic_raw_scalar(x1, x2, period)
    if kind == BLOB:
        return _periodic_blob(x1, x2, delta, period)
    u0, v0 = _free(BR_ALPHA, alpha, 0.0, x1, x2)
    u1, v1 = _periodic_minus_free(x1, x2, period)
    u2, v2 = _alpha_images(x1, x2, alpha, period, nimages, zskip)
    return u0 + (u1 + u2), v0 + (v1 + v2)


@njit(cache=True)
def kernel_eval(kind, alpha, delta, period, nimages, zskip, x1, x2):
    """Kernel value at (x1, x2); NaN at a singularity of the raw kernel."""
    if x1 < 0.0 or (x1 == 0.0 and x2 < 0.0):
        u, v = _kernel_canonical(kind, alpha, delta, period, nimages, zskip, -x1, -x2)
        return -u, -v
    return _kernel_canonical(kind, alpha, delta, period, nimages, zskip, x1, x2)


@njit(cache=True)
def _kernel_many(kind, alpha, delta, period, nimages, zskip, pts, out):
    for i in range(pts.shape[0]):
        u, v = kernel_eval(kind, alpha, delta, period, nimages, zskip, pts[i, 0], pts[i, 1])
        out[i, 0] = u
        out[i, 1] = v


@njit(cache=True)
def _psi_many(r, alpha, out):
    for i in range(r.shape[0]):
        out[i] = psi_scalar(r[i], alpha)


@njit(cache=True)
def _dpsi_many(r, alpha, out):
    for i in range(r.shape[0]):
        out[i] = dpsi_scalar(r[i], alpha)


@njit(cache=True)
def _periodic_raw_many(pts, period, out):
    for i in range(pts.shape[0]):
        x1 = pts[i, 0] - period * round(pts[i, 0] / period)
        if x1 < 0.0 or (x1 == 0.0 and pts[i, 1] < 0.0):
            u, v = periodic_raw_scalar(-x1, -pts[i, 1], period)
            out[i, 0] = -u
            out[i, 1] = -v
        else:
            u, v = periodic_raw_scalar(x1, pts[i, 1], period)
            out[i, 0] = u
            out[i, 1] = v


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _points(x):
    pts = np.asarray(x, dtype=np.float64)
    if pts.shape[-1:] != (2,):
        raise DomainError(f"points need a trailing axis of length 2, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    return pts


def _radii(r):
    arr = np.asarray(r, dtype=np.float64)
    if not np.all(arr >= 0.0):
        raise DomainError("r must be >= 0")
    return arr


def _check_alpha(alpha):
    if not alpha > 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must be > 0, got {alpha}")


def _apply_radial(fn, r, alpha):
    arr = _radii(r)
    _check_alpha(alpha)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    fn(flat, float(alpha), out)
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def psi_alpha(r, alpha):
    """Smoothed stream profile (K0(r/alpha) + ln r) / 2pi, finite at r = 0."""
    return _apply_radial(_psi_many, r, alpha)


def d_psi_alpha(r, alpha):
    """Radial derivative of :func:`psi_alpha`; 0 at r = 0, bounded by C/alpha."""
    return _apply_radial(_dpsi_many, r, alpha)


def eval_kernel(spec: KernelSpec, x):
    """Evaluate the kernel described by ``spec`` at one point or an (n, 2) array.

    Raises :class:`SingularityError` for the raw kernel at 0 (or a lattice
    point when periodic).
    """
    pts = _points(x)
    flat = np.ascontiguousarray(pts.reshape(-1, 2))
    out = np.empty_like(flat)
    _kernel_many(*spec.params(), flat, out)
    if np.isnan(out).any():
        raise SingularityError("raw Biot-Savart kernel evaluated at a singular point")
    return out.reshape(pts.shape)


def g_alpha(x, alpha):
    """Green function of (I - alpha^2 Laplacian): K0(|x|/alpha) / (2 pi alpha^2)."""
    pts = _points(x)
    _check_alpha(alpha)
    r = np.hypot(pts[..., 0], pts[..., 1])
    if np.any(r == 0.0):
        raise SingularityError("g_alpha diverges at x = 0")
    val = bessel_k0(r / alpha) / (TWO_PI * alpha * alpha)
    return float(val) if np.ndim(val) == 0 else val


def periodized_raw_br(x, period):
    """Sum of the raw kernel over all x1-translates by multiples of ``period``."""
    pts = _points(x)
    if not period > 0:
        raise DomainError(f"period must be > 0, got {period}")
    flat = np.ascontiguousarray(pts.reshape(-1, 2))
    out = np.empty_like(flat)
    _periodic_raw_many(flat, float(period), out)
    if np.isnan(out).any():
        raise SingularityError("periodized kernel evaluated at a lattice point")
    return out.reshape(pts.shape)
