"""Fast oracle-backed checks behind ``bralpha selftest``."""
from __future__ import annotations

import math
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import special_functions as sf
from .errors import BRAlphaError
from .kernels import KernelSpec, d_psi_alpha, eval_kernel, periodized_raw_br, psi_alpha


def _bessel(report):
    xs = np.geomspace(1e-3, 30.0, 25)
    from .oracles import bessel_k0_quad, bessel_k1_quad
    e0 = max(abs(sf.bessel_k0(x) / bessel_k0_quad(x) - 1.0) for x in xs)
    e1 = max(abs(sf.bessel_k1(x) / bessel_k1_quad(x) - 1.0) for x in xs)
    report("K0 vs quadrature, rel <= 1e-10", e0 <= 1e-10, f"max rel err {e0:.2e}")
    report("K1 vs quadrature, rel <= 1e-10", e1 <= 1e-10, f"max rel err {e1:.2e}")


def _profiles(report):
    lim = (math.log(2.0) - sf.EULER_GAMMA) / (2 * math.pi)
    report("psi_alpha(0, 1) finite limit", abs(psi_alpha(0.0, 1.0) - lim) <= 1e-15)
    report("d_psi_alpha(0) = 0", d_psi_alpha(0.0, 0.7) == 0.0)
    ok = abs(d_psi_alpha(100.0, 0.1) - 1.0 / (200 * math.pi)) <= 1e-12
    report("d_psi_alpha far field", ok)


def _antisymmetry(report):
    rng = np.random.default_rng(7)
    pts = rng.uniform(-4.0, 4.0, size=(200, 2))
    specs = [KernelSpec.br_alpha(0.4), KernelSpec.blob(0.3),
             KernelSpec.br_alpha(0.4, periodic=2 * math.pi), KernelSpec.blob(0.3, periodic=2 * math.pi)]
    ok = all(np.array_equal(eval_kernel(s, -pts), -eval_kernel(s, pts)) for s in specs)
    report("kernel antisymmetry, bit-exact", ok)


def _periodic(report):
    from .oracles import periodic_alpha_direct, periodic_raw_direct
    L = 2 * math.pi
    rng = np.random.default_rng(3)
    pts = rng.uniform([-L, -2.0], [L, 2.0], size=(10, 2))
    er = max(np.abs(periodized_raw_br(p, L) - periodic_raw_direct(p, L)).max() for p in pts)
    spec = KernelSpec.br_alpha(0.5, periodic=L)
    ea = max(np.abs(eval_kernel(spec, p) - periodic_alpha_direct(p, 0.5, L)).max() for p in pts)
    report("periodic raw kernel vs image sum", er <= 1e-9, f"max abs err {er:.2e}")
    report("periodic alpha kernel vs image sum", ea <= 1e-10, f"max abs err {ea:.2e}")


def _stability(report):
    from .stability import growth_rate, verify_fourier_identity
    res = verify_fourier_identity(1.0, 1.0)
    report("sine-transform identity at k = alpha = 1", res <= 1e-6, f"residual {res:.2e}")
    g = growth_rate(1.0, 1.0, KernelSpec.br_alpha(1e-3))
    report("growth rate near the unregularized limit", 0.499 <= g <= 0.5, f"{g:.7f}")


def _circle(report):
    from .dynamics import induced_velocity
    from .sheet import build_scenario
    c = build_scenario("circle", n=64)
    u = induced_velocity(c, KernelSpec.br_alpha(0.5))
    radial = np.abs(np.sum(u * c.positions, axis=1)).max()
    report("circle velocity tangential", radial <= 1e-12, f"max radial {radial:.1e}")


def _io(tmpdir):
    from .cli import load_run_config, run_simulate
    base = Path(tempfile.mkdtemp(prefix="bralpha-selftest-", dir=tmpdir))
    try:
        cfg = load_run_config({
            "scenario": {"name": "circle", "params": {"n": 16}},
            "kernel": {"kind": "br_alpha", "alpha": 0.5},
            "sim": {"dt": 0.05, "t_end": 0.1},
            "output_dir": str(base / "run"),
        })
        code = run_simulate(cfg)
        files = sorted(p.name for p in (base / "run" / "snapshots").iterdir())
        return code == 0 and len(files) == 3
    finally:
        shutil.rmtree(base, ignore_errors=True)


def run_selftest(mutate_bessel: bool = False, tmpdir=None, stream=None) -> int:
    """Print one line per check; 0 if all pass, 5 on any failure, 4 if the
    scratch directory is unusable."""
    stream = stream or sys.stdout
    failures = []

    def report(name, ok, detail=""):
        tag = "PASS" if ok else "FAIL"
        print(f"[{tag}] {name}" + (f"  ({detail})" if detail else ""), file=stream)
        if not ok:
            failures.append(name)

    saved = sf.bessel_k0, sf.bessel_k1
    if mutate_bessel:
        sf.bessel_k0 = lambda x, policy=sf.DEFAULT_POLICY: saved[0](x, policy) * (1.0 + 1e-6)
        sf.bessel_k1 = lambda x, policy=sf.DEFAULT_POLICY: saved[1](x, policy) * (1.0 + 1e-6)
    try:
        for check in (_bessel, _profiles, _antisymmetry, _periodic, _stability, _circle):
            try:
                check(report)
            except BRAlphaError as exc:
                report(check.__name__.strip("_"), False, str(exc))
    finally:
        sf.bessel_k0, sf.bessel_k1 = saved
    try:
        report("simulate writes snapshots", _io(tmpdir))
    except OSError as exc:
        print(f"[FAIL] scratch directory unusable: {exc}", file=stream)
        return 4
    print(f"{len(failures)} failure(s)", file=stream)
    return 5 if failures else 0
