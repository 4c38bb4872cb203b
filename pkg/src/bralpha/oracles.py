"""Slow, independent reference values for the self-test and the test suite.

Nothing here calls the production Bessel or kernel code: the Bessel
functions come from adaptive quadrature of integral representations, image
sums are summed directly with an analytic tail, and the smoothed kernel uses
scipy's K1.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import k1 as _scipy_k1

# e^{-60} relative truncation of the semi-infinite representations
_CUT = 60.0


def _cosh_integral(x, order):
    # e^x K_order(x) = int_0^inf exp(-x (cosh t - 1)) cosh(order t) dt
    top = math.acosh(1.0 + _CUT / x)
    val, _ = quad(lambda t: math.exp(-x * (math.cosh(t) - 1.0)) * math.cosh(order * t),
                  0.0, top, epsabs=0.0, epsrel=1e-13, limit=500)
    return val * math.exp(-x)


def bessel_k0_quad(x: float) -> float:
    """K0(x) = int_0^inf exp(-x cosh t) dt."""
    return _cosh_integral(float(x), 0)


def bessel_k1_quad(x: float) -> float:
    """K1(x) = x int_1^inf exp(-x t) sqrt(t^2 - 1) dt, shifted to t = 1 + s."""
    x = float(x)
    val, _ = quad(lambda s: math.exp(-x * s) * math.sqrt(s * (s + 2.0)), 0.0, _CUT / x,
                  epsabs=0.0, epsrel=1e-13, limit=500)
    return x * val * math.exp(-x)


def bessel_k2_quad(x: float) -> float:
    """K2(x) = int_0^inf exp(-x cosh t) cosh 2t dt."""
    return _cosh_integral(float(x), 2)


def _raw_tail(x1, x2, period, first):
    # int_{first}^inf of the +m and -m raw images, continuous in m
    a = x1 + first * period
    b = x1 - first * period
    v = -math.log((a * a + x2 * x2) / (b * b + x2 * x2)) / (4.0 * math.pi * period)
    if x2 == 0.0:
        u = 0.0
    else:
        # int of -x2 / (2 pi ((x1 +- m L)^2 + x2^2)) dm
        span = math.pi - (math.atan(a / x2) - math.atan(b / x2)) * math.copysign(1.0, x2)
        u = -math.copysign(1.0, x2) * span / (2.0 * math.pi * period)
    return u, v


def _image_offsets(x1, period, images):
    m = np.arange(1, images + 1, dtype=float)
    return x1 + m * period, x1 - m * period


def periodic_raw_direct(x, period: float, images: int = 100_000):
    """Sum of the raw kernel over x1-translates |m| <= images, plus the
    midpoint-rule integral of the remaining tail."""
    x1, x2 = float(x[0]), float(x[1])
    plus, minus = _image_offsets(x1, period, images)

    def raw(y1):
        r2 = y1 * y1 + x2 * x2
        return -x2 / (2 * math.pi * r2), y1 / (2 * math.pi * r2)

    up, vp = raw(plus)
    um, vm = raw(minus)
    u0, v0 = raw(np.array([x1]))
    tu, tv = _raw_tail(x1, x2, period, images + 0.5)
    u = math.fsum(np.concatenate([(up + um)[::-1], u0, [tu]]))
    v = math.fsum(np.concatenate([(vp + vm)[::-1], v0, [tv]]))
    return np.array([u, v])


def smoothed_kernel_scipy(y1, y2, alpha):
    """K^alpha at points (y1, y2) using scipy's K1; not for |y| << alpha."""
    y1 = np.asarray(y1, dtype=float)
    r = np.hypot(y1, y2)
    f = (1.0 / r - _scipy_k1(r / alpha) / alpha) / (2.0 * math.pi * r)
    return -y2 * f, y1 * f


def periodic_alpha_direct(x, alpha: float, period: float, images: int = 100_000):
    """Brute-force image sum of K^alpha.  The difference K^alpha - K is below
    e^{-images * period / alpha} past the last image, so the raw tail closes
    the sum."""
    x1, x2 = float(x[0]), float(x[1])
    plus, minus = _image_offsets(x1, period, images)
    up, vp = smoothed_kernel_scipy(plus, x2, alpha)
    um, vm = smoothed_kernel_scipy(minus, x2, alpha)
    if x1 == 0.0 and x2 == 0.0:
        u0 = v0 = 0.0
    else:
        a, b = smoothed_kernel_scipy(np.array([x1]), x2, alpha)
        u0, v0 = float(a[0]), float(b[0])
    tu, tv = _raw_tail(x1, x2, period, images + 0.5)
    u = math.fsum(np.concatenate([(up + um)[::-1], [u0, tu]]))
    v = math.fsum(np.concatenate([(vp + vm)[::-1], [v0, tv]]))
    return np.array([u, v])
