"""Regenerate the Chebyshev tables in ``bralpha.special_functions``.

Fits e^x * sqrt(x) * K_nu(x) on [2, inf) in the variable t = 4/x - 1 using
40-digit arithmetic.  Dev-only: needs mpmath, which the package itself does
not import.

    python tools/gen_bessel_cheb.py
"""
import mpmath as mp

mp.mp.dps = 40
NTERMS = 26
NNODES = 80


def chebyshev_coefficients(nu):
    nodes = [mp.cos(mp.pi * (j + mp.mpf(1) / 2) / NNODES) for j in range(NNODES)]
    vals = []
    for t in nodes:
        x = 4 / (t + 1)
        vals.append(mp.exp(x) * mp.sqrt(x) * mp.besselk(nu, x))
    out = []
    for k in range(NTERMS):
        s = mp.fsum(vals[j] * mp.cos(mp.pi * k * (j + mp.mpf(1) / 2) / NNODES)
                    for j in range(NNODES))
        out.append(2 * s / NNODES)
    out[0] /= 2
    return out


if __name__ == "__main__":
    for nu in (0, 1):
        print(f"_K{nu}E_CHEB = np.array([")
        for c in chebyshev_coefficients(nu):
            print(f"    {float(c)!r},")
        print("])")
