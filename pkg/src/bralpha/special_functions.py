"""Modified Bessel functions of the second kind, orders 0 and 1.

Three branches, selected by :class:`BesselEvalPolicy`:

* ``x <= series_cutoff``: ascending series around the logarithmic singularity,
* ``series_cutoff < x <= asymptotic_cutoff``: Chebyshev expansion of
  ``e^x sqrt(x) K_nu(x)`` in ``t = 4/x - 1`` (tables from
  ``tools/gen_bessel_cheb.py``),
* ``x > asymptotic_cutoff``: Hankel asymptotic series of ``e^x K_nu(x)``.

The scalar cores are numba-compiled so the pairwise velocity loops can call
them directly.  The public functions accept scalars or arrays.

Unscaled values that would be subnormal are flushed to exactly 0.0; this
happens for x above roughly 705.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
LN2 = 0.69314718055994530942
_TINY = 2.2250738585072014e-308

_K0E_CHEB = np.array([
    1.2201515410329777,
    -0.0314481013119645,
    0.0015698838857300533,
    -0.00012849549581627802,
    1.39498137188765e-05,
    -1.8317555227191195e-06,
    2.766813639445015e-07,
    -4.660489897687948e-08,
    8.574034017414225e-09,
    -1.6975345093890614e-09,
    3.5773972814003283e-10,
    -7.957489244477396e-11,
    1.8559491149549264e-11,
    -4.514597883374519e-12,
    1.1403405882073441e-12,
    -2.9800969231481784e-13,
    8.032890775068375e-14,
    -2.2275133267462965e-14,
    6.340076476276646e-15,
    -1.848593377920907e-15,
    5.5120559994043335e-16,
    -1.6782311257549006e-16,
    5.2103917776435543e-17,
    -1.6475805939842632e-17,
    5.3004337711773354e-18,
    -1.7331712005821001e-18,
])

_K1E_CHEB = np.array([
    1.3603130952422213,
    0.10392373657681724,
    -0.002857816859622779,
    0.00019521551847135162,
    -1.936197974166083e-05,
    2.406484947837217e-06,
    -3.5019606030878126e-07,
    5.7410841254500495e-08,
    -1.0345762465678097e-08,
    2.0150497551970347e-09,
    -4.1903547593419254e-10,
    9.218315187605315e-11,
    -2.129967838427791e-11,
    5.139639673482343e-12,
    -1.2891739609498229e-12,
    3.348419666052243e-13,
    -8.976705182010146e-14,
    2.4771544242195988e-14,
    -7.0198370892147685e-15,
    2.038703166239861e-15,
    -6.057047270643018e-16,
    1.8380935752430455e-16,
    -5.689462849193648e-17,
    1.7940510478863572e-17,
    -5.7567444820733025e-18,
    1.8778651901623268e-18,
])

SERIES_CUTOFF = 2.0
ASYMPTOTIC_CUTOFF = 15.0


@dataclass(frozen=True)
class BesselEvalPolicy:
    """Branch cutoffs for the K0/K1 evaluators.

    The Chebyshev tables are only valid for x >= 2 and the ascending series
    loses digits past x = 4, which bounds ``series_cutoff``.  Below x = 14
    the asymptotic series cannot reach 1e-12.
    """

    series_cutoff: float = SERIES_CUTOFF
    asymptotic_cutoff: float = ASYMPTOTIC_CUTOFF
    target_rel_error: float = 1e-12

    def __post_init__(self):
        if not 2.0 <= self.series_cutoff <= 4.0:
            raise DomainError(f"series_cutoff must lie in [2, 4], got {self.series_cutoff}")
        if not (self.asymptotic_cutoff >= 14.0 and self.asymptotic_cutoff > self.series_cutoff):
            raise DomainError(
                f"asymptotic_cutoff must be >= 14 and > series_cutoff, got {self.asymptotic_cutoff}"
            )
        if not 0.0 < self.target_rel_error <= 1e-10:
            raise DomainError(f"target_rel_error must lie in (0, 1e-10], got {self.target_rel_error}")


DEFAULT_POLICY = BesselEvalPolicy()


# ---------------------------------------------------------------------------
# scalar cores
# ---------------------------------------------------------------------------

@njit(cache=True)
def _series0(x):
    # returns (I0(x) - 1, sum_k psi(k+1) (x^2/4)^k / (k!)^2)
    y = 0.25 * x * x
    term = 1.0
    psi = -EULER_GAMMA
    i0m1 = 0.0
    s = psi
    k = 0
    while True:
        k += 1
        term *= y / (k * k)
        psi += 1.0 / k
        i0m1 += term
        s += psi * term
        if term < 1e-17 * (1.0 + i0m1):
            break
    return i0m1, s


@njit(cache=True)
def _series1(x):
    # returns (I1(x), sum_k [psi(k+1) + psi(k+2)] (x^2/4)^k / (k! (k+1)!))
    y = 0.25 * x * x
    term = 1.0
    psi_a = -EULER_GAMMA
    psi_b = 1.0 - EULER_GAMMA
    tsum = 1.0
    s = psi_a + psi_b
    k = 0
    while True:
        k += 1
        term *= y / (k * (k + 1))
        psi_a += 1.0 / k
        psi_b += 1.0 / (k + 1)
        tsum += term
        s += (psi_a + psi_b) * term
        if term < 1e-17 * tsum:
            break
    return 0.5 * x * tsum, s


@njit(cache=True)
def _clenshaw(coef, t):
    b1 = 0.0
    b2 = 0.0
    for i in range(coef.shape[0] - 1, 0, -1):
        b0 = coef[i] + 2.0 * t * b1 - b2
        b2 = b1
        b1 = b0
    return coef[0] + t * b1 - b2


def _hankel_coefficients(nu, n):
    mu = 4.0 * nu * nu
    a = np.empty(n + 1)
    a[0] = 1.0
    for k in range(1, n + 1):
        odd = 2.0 * k - 1.0
        a[k] = a[k - 1] * (mu - odd * odd) / (8.0 * k)
    return a


# terms keep shrinking up to k ~ 2x, so 30 terms are usable from x = 15 on
_HANKEL0 = _hankel_coefficients(0.0, 30)
_HANKEL1 = _hankel_coefficients(1.0, 30)


@njit(cache=True)
def _asymptotic_scaled(coef, x):
    n = min(coef.shape[0] - 1, int(2.0 * x))
    y = 1.0 / x
    s = coef[n]
    for k in range(n - 1, -1, -1):
        s = s * y + coef[k]
    return math.sqrt(math.pi / (2.0 * x)) * s


@njit(cache=True)
def _k0e(x, lo, hi):
    """e^x K0(x) for x > 0 (NaN otherwise)."""
    if not x > 0.0:
        return np.nan
    if x <= lo:
        i0m1, s = _series0(x)
        return math.exp(x) * (-math.log(0.5 * x) * (1.0 + i0m1) + s)
    if x <= hi:
        return _clenshaw(_K0E_CHEB, 4.0 / x - 1.0) / math.sqrt(x)
    return _asymptotic_scaled(_HANKEL0, x)


@njit(cache=True)
def _k1e(x, lo, hi):
    """e^x K1(x) for x > 0 (NaN otherwise)."""
    if not x > 0.0:
        return np.nan
    if x <= lo:
        i1, s = _series1(x)
        return math.exp(x) * (1.0 / x + math.log(0.5 * x) * i1 - 0.25 * x * s)
    if x <= hi:
        return _clenshaw(_K1E_CHEB, 4.0 / x - 1.0) / math.sqrt(x)
    return _asymptotic_scaled(_HANKEL1, x)


@njit(cache=True)
def _k0(x, lo, hi):
    if not x > 0.0:
        return np.nan
    if x <= lo:
        i0m1, s = _series0(x)
        return -math.log(0.5 * x) * (1.0 + i0m1) + s
    v = _k0e(x, lo, hi) * math.exp(-x)
    return v if v >= _TINY else 0.0


@njit(cache=True)
def _k1(x, lo, hi):
    if not x > 0.0:
        return np.nan
    if x <= lo:
        i1, s = _series1(x)
        return 1.0 / x + math.log(0.5 * x) * i1 - 0.25 * x * s
    v = _k1e(x, lo, hi) * math.exp(-x)
    return v if v >= _TINY else 0.0


@njit(cache=True)
def _k0_plus_log(x, lo, hi):
    """K0(x) + ln(x), continuous at 0 with value ln 2 - gamma_E."""
    if x == 0.0:
        return LN2 - EULER_GAMMA
    if x <= lo:
        i0m1, s = _series0(x)
        return -math.log(0.5 * x) * i0m1 + LN2 + s
    return _k0(x, lo, hi) + math.log(x)


@njit(cache=True)
def _k1_complement(x, lo, hi):
    """(1 - x K1(x)) / x, computed without cancellation; 0 at x = 0."""
    if x == 0.0:
        return 0.0
    if x <= lo:
        i1, s = _series1(x)
        return -math.log(0.5 * x) * i1 + 0.25 * x * s
    return 1.0 / x - _k1(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k0_ufunc(x, lo, hi):
    return _k0(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k1_ufunc(x, lo, hi):
    return _k1(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k0e_ufunc(x, lo, hi):
    return _k0e(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k1e_ufunc(x, lo, hi):
    return _k1e(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k0_plus_log_ufunc(x, lo, hi):
    return _k0_plus_log(x, lo, hi)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _k1_complement_ufunc(x, lo, hi):
    return _k1_complement(x, lo, hi)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _positive(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 0.0):
        raise DomainError(f"{name} requires x > 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def bessel_k0(x, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """K0(x) for x > 0.

    Strictly decreasing; returns exactly 0.0 once the value would be
    subnormal.  Raises :class:`DomainError` for x <= 0 or NaN.
    """
    arr = _positive(x, "bessel_k0")
    return _out(_k0_ufunc(arr, policy.series_cutoff, policy.asymptotic_cutoff))


def bessel_k1(x, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """K1(x) for x > 0; same underflow convention as :func:`bessel_k0`."""
    arr = _positive(x, "bessel_k1")
    return _out(_k1_ufunc(arr, policy.series_cutoff, policy.asymptotic_cutoff))


def bessel_k0_k1_scaled(x, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """Return ``(e^x K0(x), e^x K1(x))``, finite for every x > 0."""
    arr = _positive(x, "bessel_k0_k1_scaled")
    lo, hi = policy.series_cutoff, policy.asymptotic_cutoff
    return _out(_k0e_ufunc(arr, lo, hi)), _out(_k1e_ufunc(arr, lo, hi))


def k0_plus_log(x, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """K0(x) + ln x for x >= 0, with the finite limit ln 2 - gamma_E at 0."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr >= 0.0):
        raise DomainError("k0_plus_log requires x >= 0")
    return _out(_k0_plus_log_ufunc(arr, policy.series_cutoff, policy.asymptotic_cutoff))


def k1_complement(x, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """(1 - x K1(x)) / x for x >= 0, evaluated without cancellation near 0."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr >= 0.0):
        raise DomainError("k1_complement requires x >= 0")
    return _out(_k1_complement_ufunc(arr, policy.series_cutoff, policy.asymptotic_cutoff))
