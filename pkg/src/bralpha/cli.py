"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 run did not complete
(collapsed sheet or strip excursion), 4 I/O error, 5 self-test failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import RunStatus, build_run_report
from .dynamics import SimConfig, Stepper, resolve_workers, simulate
from .errors import BRAlphaError, ConfigError, DegenerateCurveError, SingularityError
from .kernels import KernelKind, KernelSpec, d_psi_alpha
from .sheet import SheetCurve, Topology, build_scenario, vorticity_density
from .stability import growth_rate, measure_growth_rate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COLLAPSE = 3
EXIT_IO = 4
EXIT_SELFTEST = 5

SNAPSHOT_HEADER = "t,j,gamma,x,y,u,v,density"


def fmt(v) -> str:
    return format(float(v), ".17g")


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    scenario: str
    scenario_params: dict
    sim: SimConfig
    output_dir: Path
    seed: int = 0
    workers: int = 1

    @property
    def kernel(self) -> KernelSpec:
        return self.sim.kernel

    def to_dict(self) -> dict:
        return {
            "scenario": {"name": self.scenario, "params": dict(self.scenario_params)},
            "kernel": self.kernel.to_dict(),
            "sim": {k: v for k, v in self.sim.to_dict().items() if k != "kernel"},
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "workers": self.workers,
        }


def _line_of(text: Optional[str], path) -> Optional[int]:
    # line of the innermost key of ``path``, searching each key after its parent
    if text is None:
        return None
    pos = 0
    for key in path:
        hit = text.find(f'"{key}"', pos)
        if hit < 0:
            return None
        pos = hit
    return text.count("\n", 0, pos) + 1


class _Loader:
    def __init__(self, text: Optional[str], source: str, overridden=frozenset()):
        self.text = text
        self.source = source
        self.overridden = overridden

    def fail(self, path, msg):
        path = tuple(path)
        if any(path[:i] in self.overridden for i in range(1, len(path) + 1)):
            raise ConfigError(f"command line: {'.'.join(path)}: {msg}")
        line = _line_of(self.text, path)
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: {'.'.join(path) or '<root>'}: {msg}")

    def number(self, obj, path, key, default=None, positive=False, integer=False):
        if key not in obj or obj[key] is None:
            if default is None:
                self.fail(path, f"missing required field '{key}'")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path + (key,), f"expected a number, got {v!r}")
        if not math.isfinite(v):
            self.fail(path + (key,), "must be finite")
        if integer and int(v) != v:
            self.fail(path + (key,), f"expected an integer, got {v!r}")
        if positive and not v > 0:
            self.fail(path + (key,), f"must be > 0, got {v!r}")
        return int(v) if integer else float(v)


def _deep_update(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


def _leaf_paths(d: dict, prefix=()):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _leaf_paths(v, prefix + (k,))
        else:
            yield prefix + (k,)


def load_run_config(raw: dict, text: Optional[str] = None, source: str = "<config>",
                    overrides: Optional[dict] = None) -> RunConfig:
    """Validate a config mapping, with ``overrides`` (from flags) merged on
    top.  A run manifest is accepted too: its ``config`` entry is used.
    Errors name the config line, or the command line for overridden fields."""
    overrides = overrides or {}
    ld = _Loader(text, source, frozenset(_leaf_paths(overrides)))
    if isinstance(raw, dict) and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    raw = _deep_update(raw, overrides) if isinstance(raw, dict) else raw
    if not isinstance(raw, dict):
        ld.fail((), "top level must be a JSON object")
    known = {"scenario", "kernel", "sim", "output_dir", "seed", "workers"}
    for k in raw:
        if k not in known:
            ld.fail((k,), f"unknown field (expected one of {sorted(known)})")

    sc = raw.get("scenario")
    if not isinstance(sc, dict) or "name" not in sc:
        ld.fail(("scenario",), "expected an object with 'name' and 'params'")
    name = sc["name"]
    params = sc.get("params", {}) or {}
    if not isinstance(params, dict):
        ld.fail(("scenario", "params"), "expected an object")
    try:
        curve = build_scenario(name, **params)
    except (BRAlphaError, TypeError) as exc:
        ld.fail(("scenario",), str(exc))

    kr = raw.get("kernel")
    if not isinstance(kr, dict):
        ld.fail(("kernel",), "expected an object")
    kind = kr.get("kind")
    try:
        kind = KernelKind(kind)
    except ValueError:
        ld.fail(("kernel", "kind"), f"expected one of {[k.value for k in KernelKind]}, got {kind!r}")
    kp = ("kernel",)
    alpha = ld.number(kr, kp, "alpha", positive=True) if kind is KernelKind.BR_ALPHA else None
    delta = ld.number(kr, kp, "delta", positive=True) if kind is KernelKind.BLOB else None
    periodic = kr.get("periodic")
    if periodic == "auto" or (periodic is None and curve.topology is Topology.PERIODIC_STRIP):
        periodic = abs(curve.shift[0]) if curve.shift is not None else None
    elif periodic is not None:
        periodic = ld.number(kr, kp, "periodic", positive=True)
    tol = ld.number(kr, kp, "image_tolerance", default=1e-12, positive=True)
    try:
        kernel = KernelSpec(kind, alpha=alpha, delta=delta, periodic=periodic, image_tolerance=tol)
    except BRAlphaError as exc:
        ld.fail(kp, str(exc))

    sm = raw.get("sim")
    if not isinstance(sm, dict):
        ld.fail(("sim",), "expected an object")
    sp = ("sim",)
    dt = ld.number(sm, sp, "dt", positive=True)
    t_end = ld.number(sm, sp, "t_end", positive=True)
    every = ld.number(sm, sp, "output_every", default=1, positive=True, integer=True)
    stepper = sm.get("stepper", "rk4")
    try:
        stepper = Stepper(stepper)
    except ValueError:
        ld.fail(sp + ("stepper",), f"expected 'rk4' or 'midpoint', got {stepper!r}")
    try:
        sim = SimConfig(kernel, dt, t_end, every, stepper)
    except BRAlphaError as exc:
        ld.fail(sp, str(exc))
    if abs(sim.n_steps * dt - t_end) > 1e-9 * t_end:
        ld.fail(sp + ("t_end",), f"t_end {t_end} is not a whole number of steps of {dt}")

    out = raw.get("output_dir")
    if not isinstance(out, str) or not out:
        ld.fail(("output_dir",), "expected a non-empty path string")
    seed = ld.number(raw, (), "seed", default=0, integer=True)
    if seed < 0:
        ld.fail(("seed",), "must be >= 0")
    workers = ld.number(raw, (), "workers", default=1, positive=True, integer=True)
    return RunConfig(name, params, sim, Path(out), seed, workers)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def snapshot_lines(t, curve: SheetCurve, velocity, density):
    for j in range(curve.n):
        x, y = curve.positions[j]
        u, v = velocity[j]
        yield ",".join(fmt(z) for z in (t, j, curve.gammas[j], x, y, u, v, density[j]))


def _write_snapshot(path: Path, t, curve, velocity, density):
    lines = [SNAPSHOT_HEADER, *snapshot_lines(t, curve, velocity, density)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_simulate(config: RunConfig) -> int:
    """Run a configured simulation and write snapshots, report and manifest."""
    curve = build_scenario(config.scenario, **config.scenario_params)
    out = config.output_dir
    snapdir = out / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    kept = []
    status = RunStatus.COMPLETED
    try:
        for i, snap in enumerate(simulate(curve, config.sim, workers=config.workers)):
            c = snap.state.curve
            try:
                dens = vorticity_density(c)
            except DegenerateCurveError:
                status = RunStatus.COLLAPSED_SHEET
                break
            _write_snapshot(snapdir / f"snap_{i:06d}.csv", snap.state.t, c, snap.velocity, dens)
            kept.append((snap.state.t, c))
    except (SingularityError, DegenerateCurveError):
        status = RunStatus.COLLAPSED_SHEET
    report = build_run_report(kept, config.kernel, status) if kept else None
    if report is not None:
        status = report.status
        _json_dump(report.to_dict(), out / "report.json")
    last_ok = report.regularity[-1] if report is not None and report.regularity else None
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "curve": curve.manifest(),
        "wall_time_s": time.perf_counter() - start,
        "snapshots": len(kept),
        "status": status.value,
        "invariants": {
            "max_impulse_drift": float(np.max(report.impulse_drift)) if report is not None else None,
            "max_abs_hamiltonian_drift":
                float(np.max(np.abs(report.hamiltonian_drift))) if report is not None else None,
            "final_chord_arc": last_ok.chord_arc if last_ok else None,
            "final_lipschitz": last_ok.lipschitz if last_ok else None,
        },
    }
    _json_dump(manifest, out / "manifest.json")
    return EXIT_OK if status is RunStatus.COMPLETED else EXIT_COLLAPSE


def read_snapshot_dir(run_dir) -> list:
    """(t, SheetCurve) pairs from a simulate output directory."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    side = manifest["curve"]
    topo = Topology(side["topology"])
    files = sorted((run_dir / "snapshots").glob("snap_*.csv"))
    if not files:
        raise FileNotFoundError(f"no snapshot files under {run_dir / 'snapshots'}")
    out = []
    base = build_scenario(manifest["config"]["scenario"]["name"],
                          **manifest["config"]["scenario"]["params"])
    for f in files:
        data = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
        c = SheetCurve(topo, data[:, 2], data[:, 3:5], base.weights,
                       side.get("period"), tuple(side["shift"]) if side.get("shift") else None)
        out.append((float(data[0, 0]), c))
    return out


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def parse_grid(spec: str):
    """'1,2,3' or 'log:lo:hi:n' or 'lin:lo:hi:n'."""
    try:
        if spec.startswith(("log:", "lin:")):
            kind, lo, hi, n = spec.split(":")
            fn = np.geomspace if kind == "log" else np.linspace
            return [float(v) for v in fn(float(lo), float(hi), int(n))]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid '{spec}': {exc}")


def run_dispersion(gamma0: float, alpha: float, delta: float, ks) -> str:
    if not ks:
        raise ConfigError("empty k-grid")
    if any(k == 0 or not math.isfinite(k) for k in ks):
        raise ConfigError("k-grid must be finite and exclude 0")
    if not (alpha > 0 and delta > 0):
        raise ConfigError("alpha and delta must be > 0")
    specs = (KernelSpec.raw(), KernelSpec.br_alpha(alpha), KernelSpec.blob(delta))
    rows = ["k,lambda_br,lambda_alpha,lambda_blob"]
    for k in ks:
        rows.append(",".join(fmt(v) for v in (k, *(growth_rate(k, gamma0, s) for s in specs))))
    return "\n".join(rows) + "\n"


def run_kernels(alpha: float, delta: float, rs) -> str:
    if not (alpha > 0 and delta > 0):
        raise ConfigError("alpha and delta must be > 0")
    if not rs or any(not r > 0 for r in rs):
        raise ConfigError("r-grid must be positive")
    r = np.array(rs, dtype=float)
    dpsi = d_psi_alpha(r, alpha)
    blob = r / (2 * math.pi * (r * r + delta * delta))
    raw = 1.0 / (2 * math.pi * r)
    rows = ["r,dpsi_alpha,abs_k_alpha,abs_k_blob,abs_k"]
    for vals in zip(r, dpsi, np.abs(dpsi), blob, raw):
        rows.append(",".join(fmt(v) for v in vals))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _overrides(args) -> dict:
    o: dict = {}
    if args.scenario:
        o.setdefault("scenario", {})["name"] = args.scenario
    for kv in args.param or []:
        key, _, val = kv.partition("=")
        try:
            o.setdefault("scenario", {}).setdefault("params", {})[key] = json.loads(val)
        except json.JSONDecodeError:
            raise ConfigError(f"--param {kv}: value must be JSON (e.g. n=64)")
    for name in ("kind", "alpha", "delta", "periodic"):
        v = getattr(args, name)
        if v is not None:
            o.setdefault("kernel", {})[name] = v
    for name in ("dt", "t_end", "output_every", "stepper"):
        v = getattr(args, name)
        if v is not None:
            o.setdefault("sim", {})[name] = v
    if args.output_dir is not None:
        o["output_dir"] = args.output_dir
    if args.workers is not None:
        o["workers"] = args.workers
    return o


def _cmd_simulate(args) -> int:
    raw: dict = {}
    text = None
    source = "<flags>"
    if args.config:
        source = args.config
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            print(f"error: {source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(raw, dict) and isinstance(raw.get("config"), dict):
            raw = raw["config"]
    try:
        over = _overrides(args)
        if args.workers is None and "workers" not in raw:
            over["workers"] = resolve_workers(None)
        cfg = load_run_config(raw, text, source, over)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_simulate(cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def _cmd_dispersion(args) -> int:
    try:
        text = run_dispersion(args.gamma0, args.alpha, args.delta, parse_grid(args.k))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _emit(text, args.output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_kernels(args) -> int:
    try:
        text = run_kernels(args.alpha, args.delta, parse_grid(args.r))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _emit(text, args.output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_growth_fit(args) -> int:
    try:
        snaps = read_snapshot_dir(args.run_dir)
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: cannot read snapshots: {exc}", file=sys.stderr)
        return EXIT_IO
    window = tuple(args.window) if args.window else None
    try:
        fit = measure_growth_rate(snaps, args.k, window)
    except BRAlphaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _emit(json.dumps(fit.to_dict(), indent=2, sort_keys=True) + "\n", args.output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return run_selftest(mutate_bessel=args.mutate_bessel, tmpdir=args.tmpdir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bralpha", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="evolve a sheet; flags override the JSON config")
    s.add_argument("--config", help="JSON config (or a previous run's manifest.json)")
    s.add_argument("--scenario", choices=["circle", "ellipse", "flat_perturbed"])
    s.add_argument("--param", action="append", metavar="KEY=JSON", help="scenario parameter")
    s.add_argument("--kind", choices=[k.value for k in KernelKind])
    s.add_argument("--alpha", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--periodic", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--t-end", dest="t_end", type=float)
    s.add_argument("--output-every", dest="output_every", type=int)
    s.add_argument("--stepper", choices=[m.value for m in Stepper])
    s.add_argument("--output-dir", dest="output_dir")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=_cmd_simulate)

    d = sub.add_parser("dispersion", help="tabulate growth rates over a k-grid")
    d.add_argument("--gamma0", type=float, default=1.0)
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--delta", type=float, default=1.0)
    d.add_argument("--k", default="log:1:10000:41", help="'1,2,3' or 'log:lo:hi:n' or 'lin:lo:hi:n'")
    d.add_argument("--output", "-o")
    d.set_defaults(func=_cmd_dispersion)

    g = sub.add_parser("growth-fit", help="fit a mode growth rate from simulate output")
    g.add_argument("run_dir")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    g.add_argument("--output", "-o")
    g.set_defaults(func=_cmd_growth_fit)

    k = sub.add_parser("kernels", help="tabulate radial kernel profiles")
    k.add_argument("--alpha", type=float, default=1.0)
    k.add_argument("--delta", type=float, default=1.0)
    k.add_argument("--r", default="log:1e-4:100:61")
    k.add_argument("--output", "-o")
    k.set_defaults(func=_cmd_kernels)

    t = sub.add_parser("selftest", help="fast oracle-backed checks")
    t.add_argument("--tmpdir", help="scratch directory for the I/O check")
    t.add_argument("--mutate-bessel", action="store_true", help=argparse.SUPPRESS)
    t.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
