"""Command-line entry point.

    corr2des simulate (--preset NAME | --config FILE) --out DIR [--threads N]
    corr2des compare DIR DIR [DIR ...] [--out FILE]
    corr2des dump-correlation (--preset NAME | --config FILE) --out FILE
    corr2des dump-memory-norm (--preset NAME | --config FILE) --out FILE

Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bath import QuadratureError
from .config import PRESETS, ConfigError, config_hash, dump_config, load_config, load_preset
from .dissipators import ConvergenceError, DynamicsMode, SegmentVariant
from .propagator import NumericalError

log = logging.getLogger("corr2des")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (NumericalError, ConvergenceError, QuadratureError, FloatingPointError)

_MODES = {"ca": DynamicsMode.CORRELATION_AWARE, "reset": DynamicsMode.FACTORIZED_RESET,
          "markov": DynamicsMode.STATIC_MARKOV}
_VARIANTS = {"as-printed": SegmentVariant.AS_PRINTED, "telescoping": SegmentVariant.TELESCOPING}

#: a run "beats" if its dominant peak sits this close to the exciton splitting ...
BEATING_TOLERANCE_CM1 = 20.0
#: ... and its peak-to-median ratio is at least this fraction of the sharpest run in the comparison
BEATING_RELATIVE = 0.5


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, str) else fmt(r) for r in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("give --preset or --config")
    if getattr(args, "mode", None):
        cfg = replace(cfg, dynamics_mode=_MODES[args.mode])
    if getattr(args, "variant", None):
        cfg = replace(cfg, segment_variant=_VARIANTS[args.variant])
    return cfg


def default_threads():
    env = os.environ.get("CORR2DES_THREADS")
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


class Manifest:
    def __init__(self, out, cfg):
        self.out = Path(out)
        self.data = {
            "code_version": __version__,
            "config_hash": config_hash(cfg),
            "status": "running",
            "failed_stage": None,
            "timings_s": {},
            "certificates": {},
            "files": {},
        }

    def stage(self, name, seconds):
        self.data["timings_s"][name] = seconds

    def write(self):
        files = {}
        for p in sorted(self.out.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                files[str(p.relative_to(self.out))] = p.stat().st_size
        files["manifest.json"] = None
        self.data["files"] = files
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_signals(out, res):
    sdir = out / "signals"
    sdir.mkdir(exist_ok=True)
    for sig in res.signals:
        t1, t3 = np.meshgrid(sig.t1_grid, sig.t3_grid, indexing="ij")
        v = sig.values
        rows = zip(t1.ravel(), t3.ravel(), v.real.ravel(), v.imag.ravel())
        write_csv(sdir / f"{sig.phase.value}_T{sig.T:g}.csv", ["t1_fs", "t3_fs", "re", "im"], rows)


def spectrum_times(T_list):
    """Waiting times whose 2D spectra are written: first, 10 fs if present, middle, last."""
    picks = [T_list[0], T_list[len(T_list) // 2], T_list[-1]]
    if 10.0 in T_list:
        picks.insert(1, 10.0)
    return sorted(set(picks))


def write_analysis(out, res):
    cfg = res.setup.cfg
    sdir = out / "spectra"
    sdir.mkdir(exist_ok=True)
    for T in spectrum_times(list(cfg.grids.T_list)):
        sp = res.spectra[T]
        w1, w3 = np.meshgrid(sp.w1_cm1, sp.w3_cm1, indexing="ij")
        write_csv(sdir / f"absorptive_T{T:g}.csv", ["w1_cm1", "w3_cm1", "value"],
                  zip(w1.ravel(), w3.ravel(), sp.values.ravel()))
    write_csv(out / "crosspeak.csv", ["T_fs", "A_CP"], zip(res.trace.T, res.trace.amplitude))
    write_csv(out / "crosspeak_mirror.csv", ["T_fs", "A_CP"], zip(res.mirror_trace.T, res.mirror_trace.amplitude))
    summary = {
        "window": list(res.trace.window),
        "splitting_cm1": res.setup.model.basis.delta,
        "persistence": res.persistence,
        "ppt_min_eigenvalue": res.ppt[0],
        "ppt_time_fs": res.ppt[1],
        "coupling": cfg.bath.coupling,
    }
    if res.beating is not None:
        write_csv(out / "beating.csv", ["nu_cm1", "magnitude"], zip(res.beating.nu_cm1, res.beating.magnitude))
        summary.update(peak_cm1=res.beating.peak_cm1, peak_to_median=res.beating.peak_to_median,
                       mirror_peak_cm1=res.mirror_beating.peak_cm1,
                       mirror_peak_to_median=res.mirror_beating.peak_to_median)
    write_csv(out / "ppt.csv", ["t_fs", "min_eig"], res.ppt[2])
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args):
    from . import pipeline

    cfg = resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, cfg)
    dump_config(cfg, out / "config.json")
    if args.dry_run:
        man.data["status"] = "dry-run"
        man.write()
        return EXIT_OK
    stage = "tables"
    try:
        t0 = time.perf_counter()
        setup = pipeline.build_setup(cfg)
        man.stage("tables", time.perf_counter() - t0)
        dump_config(setup.cfg, out / "config.json")
        man.data["config_hash"] = config_hash(setup.cfg)
        man.data["certificates"]["lambda_sm"] = setup.certificate
        stage = "simulate"
        timings = {}
        threads = args.threads or default_threads()
        res = pipeline.simulate(setup.cfg, threads=threads, timings=timings)
        for k, v in timings.items():
            if k != "tables":
                man.stage(k, v)
        stage = "write"
        t0 = time.perf_counter()
        write_signals(out, res)
        write_analysis(out, res)
        rows = pipeline.memory_norm_table(res.setup)
        write_csv(out / "memory_norm.csv", ["segment", "t_fs", "d_mem_fro", "d_full_fro"], rows)
        man.stage("write", time.perf_counter() - t0)
        stage = "rk4-check"
        man.data["certificates"].update(
            rk4_error_ratio=pipeline.rk4_error_ratio(res.setup),
            trace_drift=res.drift[0],
            hermiticity_drift=res.drift[1],
        )
    except NUMERICAL_ERRORS as exc:
        log.error("numerical failure in stage %s: %s", stage, exc)
        man.data.update(status="failed", failed_stage=stage, error=str(exc))
        man.write()
        return EXIT_NUMERICAL
    man.data["status"] = "ok"
    man.write()
    return EXIT_OK


def load_run(path):
    path = Path(path)
    try:
        with open(path / "summary.json", encoding="utf-8") as fh:
            summary = json.load(fh)
        with open(path / "config.json", encoding="utf-8") as fh:
            cfg = json.load(fh)
        _, rows = read_csv(path / "crosspeak.csv")
    except FileNotFoundError as exc:
        raise ConfigError(f"{path} is not a complete artifact directory ({exc.filename} missing)") from None
    trace = np.array(rows, dtype=float)
    return summary, cfg, trace


def _grid_signature(cfg):
    return {
        "grids.t1_max": cfg["grids"]["t1_max"],
        "grids.t1_points": cfg["grids"]["t1_points"],
        "grids.t3_max": cfg["grids"]["t3_max"],
        "grids.t3_points": cfg["grids"]["t3_points"],
        "grids.T_list": cfg["grids"]["T_list"],
        "integrator.dt": cfg["integrator"]["dt"],
    }


def compare_runs(dirs, sample_T=(0.0, 200.0, 600.0, 1000.0)):
    runs = [load_run(d) for d in dirs]
    ref = _grid_signature(runs[0][1])
    for d, (_, cfg, _) in zip(dirs[1:], runs[1:]):
        sig = _grid_signature(cfg)
        diff = [k for k in ref if sig[k] != ref[k]]
        if diff:
            raise ConfigError(f"{d}: grid mismatch with {dirs[0]} in {', '.join(diff)}")
    for d, (s, _, _) in zip(dirs, runs):
        if "peak_to_median" not in s:
            raise ConfigError(f"{d}: no beating spectrum (need at least 8 waiting times)")
    best = max(s["peak_to_median"] for s, _, _ in runs)
    ref_ratio = runs[0][0]["peak_to_median"]
    table = []
    for d, (s, cfg, trace) in zip(dirs, runs):
        near = abs(s["peak_cm1"] - s["splitting_cm1"]) <= BEATING_TOLERANCE_CM1
        sharp = s["peak_to_median"] >= BEATING_RELATIVE * best
        env = {}
        for T in sample_T:
            k = np.nonzero(np.isclose(trace[:, 0], T))[0]
            env[T] = float(trace[k[0], 1]) if len(k) else float("nan")
        table.append({
            "run": str(d),
            "name": cfg.get("name", ""),
            "peak_cm1": s["peak_cm1"],
            "peak_to_median": s["peak_to_median"],
            "ratio_to_first": s["peak_to_median"] / ref_ratio if ref_ratio else float("nan"),
            "class": "beating" if near and sharp else "suppressed",
            "envelope": env,
        })
    return table


def cmd_compare(args):
    if len(args.dirs) < 2:
        raise ConfigError("compare needs at least two artifact directories")
    table = compare_runs(args.dirs)
    Ts = list(table[0]["envelope"])
    header = ["run", "name", "peak_cm1", "peak_to_median", "ratio_to_first", "class"] + [f"A_CP_T{T:g}" for T in Ts]
    rows = [[r["run"], r["name"], r["peak_cm1"], r["peak_to_median"], r["ratio_to_first"], r["class"]]
            + [r["envelope"][T] for T in Ts] for r in table]
    if args.out:
        write_csv(args.out, header, rows)
    lines = [f"{'run':<30} {'peak/cm-1':>10} {'peak/median':>12} {'vs first':>9}  class"]
    for r in table:
        lines.append(f"{r['run']:<30} {r['peak_cm1']:>10.1f} {r['peak_to_median']:>12.3g} "
                     f"{r['ratio_to_first']:>9.3g}  {r['class']}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_dump_correlation(args):
    from . import pipeline

    cfg = resolve_config(args)
    setup = pipeline.build_setup(cfg)
    c = setup.corr
    write_csv(args.out, ["t_fs", "re_C", "im_C"], zip(c.times, c.samples.real, c.samples.imag))
    return EXIT_OK


def cmd_dump_memory_norm(args):
    from . import pipeline

    cfg = resolve_config(args)
    setup = pipeline.build_setup(cfg)
    write_csv(args.out, ["segment", "t_fs", "d_mem_fro", "d_full_fro"], pipeline.memory_norm_table(setup))
    return EXIT_OK


def _add_source(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--config", help="JSON run configuration (overrides --preset)")
    p.add_argument("--mode", choices=sorted(_MODES))
    p.add_argument("--variant", choices=sorted(_VARIANTS))


def build_parser():
    ap = argparse.ArgumentParser(prog="corr2des", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a full waiting-time sweep and write artifacts")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--dry-run", action="store_true", help="write resolved config and manifest only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare beating statistics of artifact directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-correlation", help="write C(t) as CSV")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_correlation)

    p = sub.add_parser("dump-memory-norm", help="write ||D_mem|| and ||D_full|| per segment as CSV")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_memory_norm)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command != "compare" and not (args.preset or args.config):
        print("error: give --preset or --config", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
