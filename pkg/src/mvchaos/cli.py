"""Command-line experiment runner.

Subcommands ``chaos``, ``verify``, ``moments`` and ``decay`` run one
experiment each and write ``results.csv`` plus ``manifest.json`` into the
output directory. ``rerun`` replays a manifest; ``plot-script`` emits a
gnuplot script for chaos-sweep CSVs.

CSV schemas (the ``schema`` field of the manifest names the version):

    chaos-sweep/1  level,N,error,stderr,log2_error,slope_vs_previous,status
    verify/1       assumption,name,samples,violations,verdict,max_lhs_over_rhs,note
    moments/1      t,mean,second_moment,second_moment_stderr,ode_mean,ode_second_moment
    decay/1        t,moment

Exit codes: 0 success, 1 verification failure, 2 input/output error,
3 numerical blow-up (details in ``diagnostics.json``).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .chaos import run_chaos_sweep
from .config import ConfigError, from_dict, parse_config
from .integrator import BlowUpError, Normal, PointMass, SchemeConfig, integrate, sample_initial
from .model import build_model, linear_moment_ode
from .rng import BrownianDriver
from .verify import FAIL, estimate_decay_rate, lemma_decay_bound, run_audit

EXIT_OK, EXIT_VERIFY, EXIT_IO, EXIT_BLOWUP = 0, 1, 2, 3

SCHEMAS = {
    "chaos-sweep": ("chaos-sweep/1", ["level", "N", "error", "stderr", "log2_error", "slope_vs_previous", "status"]),
    "verify": ("verify/1", ["assumption", "name", "samples", "violations", "verdict", "max_lhs_over_rhs", "note"]),
    "moments": ("moments/1", ["t", "mean", "second_moment", "second_moment_stderr", "ode_mean", "ode_second_moment"]),
    "decay": ("decay/1", ["t", "moment"]),
}
SUBCOMMAND_MODES = {"chaos": "chaos-sweep", "verify": "verify", "moments": "moments", "decay": "decay"}


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return "" if value is None else str(value)


class CsvSink:
    """Row-at-a-time CSV writer that flushes after every row."""

    def __init__(self, path, header):
        self.path = Path(path)
        self.fh = open(self.path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(header)
        self.fh.flush()

    def row(self, values):
        self.writer.writerow([fmt(v) for v in values])
        self.fh.flush()

    def truncate(self, reason):
        self.fh.write(f"# TRUNCATED: {reason}\r\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def _initial(cfg):
    if cfg.initial.law == "point":
        return PointMass(cfg.initial.mean)
    return Normal(cfg.initial.mean, cfg.initial.var)


def _model(cfg):
    if cfg.model.name == "linear_mean_field":
        return build_model(cfg.model.name, theta=cfg.model.theta, kappa=cfg.model.kappa, sigma=cfg.model.sigma)
    return build_model(cfg.model.name)


def _scheme(cfg):
    return SchemeConfig(cfg.scheme.kind, cfg.dt, cfg.scheme.outer_m)


def _threads(cfg):
    return cfg.threads or os.cpu_count() or 1


def run_chaos(cfg, sink, results):
    model = _model(cfg)
    level = iter(range(cfg.chaos.levels))
    prev = {"log": None}

    def on_level(N_l, err, se):
        ok = math.isfinite(err) and err > 0
        lg = math.log2(err) if ok else float("nan")
        slope = lg - prev["log"] if ok and prev["log"] is not None else float("nan")
        sink.row([next(level), N_l, err, se, lg, slope, "ok" if math.isfinite(err) else "blowup"])
        print(f"  N={N_l:<7d} error={err:.6g}  stderr={se:.3g}")
        if ok:
            prev["log"] = lg

    report = run_chaos_sweep(model, cfg.chaos.N_1, cfg.chaos.levels, cfg.horizon.T, cfg.chaos.U, _scheme(cfg),
                             cfg.seed, _threads(cfg), _initial(cfg), on_level=on_level)
    results.update(fitted_slope=report.fitted_slope, monotone_within_stderr=report.monotone_within_stderr(),
                   strictly_positive=report.strictly_positive())
    print(f"  fitted log2 slope {report.fitted_slope:.4f}")
    if report.failures:
        results["failures"] = {str(k): v for k, v in report.failures.items()}
        return EXIT_BLOWUP, {"failures": results["failures"]}
    return EXIT_OK, None


def run_verify(cfg, sink, results):
    model = _model(cfg)
    keys = cfg.verify.assumptions
    selected = None if keys.strip() == "all" else tuple(k.strip() for k in keys.split(","))
    radii = tuple(float(r) for r in cfg.verify.radii.split(","))
    kwargs = {} if selected is None else {"assumptions": selected}
    reports = run_audit(model, radii=radii, n_samples=cfg.verify.n_samples, seed=cfg.seed, **kwargs)
    print(f"{'id':<5} {'check':<34} {'samples':>8} {'viol':>6}  {'verdict':<12} constants")
    for rep in reports:
        print(rep.table_row())
        if rep.note:
            print(f"      note: {rep.note}")
        ratio = rep.estimated_constants.get("max_lhs_over_rhs")
        sink.row([rep.assumption, rep.name, rep.samples, rep.n_violations, rep.verdict, ratio, rep.note])
    failed = [r.assumption for r in reports if r.verdict == FAIL]
    results.update(failed=failed, n_reports=len(reports))
    return (EXIT_VERIFY if failed else EXIT_OK), None


def run_moments(cfg, sink, results):
    model = _model(cfg)
    T, n_obs = cfg.horizon.T, cfg.moments.n_obs
    dt = cfg.dt
    n = round(T / dt)
    times = [round(k * n / (n_obs - 1)) * dt for k in range(n_obs)]
    driver = BrownianDriver(cfg.seed)
    ens0 = sample_initial(_initial(cfg), cfg.moments.N, driver, dim=model.dim)
    traj = integrate(ens0, model, _scheme(cfg), driver, T, observe=times)
    ode = (None, None)
    if cfg.model.name == "linear_mean_field" and cfg.initial.law == "normal":
        p = model.params
        ode = linear_moment_ode(traj.times, cfg.initial.mean, cfg.initial.var, p["theta"], p["kappa"], p["sigma"])
    for i, snap in enumerate(traj.snapshots):
        x = snap.states.reshape(-1)
        x2 = x * x
        se = float(np.std(x2, ddof=1) / math.sqrt(len(x2))) if len(x2) > 1 else float("nan")
        sink.row([traj.times[i], float(x.mean()), float(x2.mean()), se,
                  None if ode[0] is None else float(ode[0][i]), None if ode[1] is None else float(ode[1][i])])
    return EXIT_OK, None


def run_decay(cfg, sink, results):
    model = _model(cfg)
    slope, t, moms = estimate_decay_rate(model, cfg.decay.p, cfg.decay.N, cfg.decay.T_long, dt=cfg.dt,
                                         seed=cfg.seed, initial=_initial(cfg), return_series=True)
    for ti, mi in zip(t, moms):
        sink.row([float(ti), float(mi)])
    results.update(fitted_rate=slope, lemma_bound=lemma_decay_bound(model, cfg.decay.p))
    print(f"  fitted rate {slope:.5g}, lemma bound {results['lemma_bound']:.5g}")
    return EXIT_OK, None


RUNNERS = {"chaos-sweep": run_chaos, "verify": run_verify, "moments": run_moments, "decay": run_decay}


def versions():
    import numba
    import scipy

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "mvchaos": __version__}


def run(cfg, out_dir):
    """Run one experiment, writing results.csv and manifest.json; returns the exit code."""
    out = Path(out_dir)
    schema, header = SCHEMAS[cfg.mode]
    try:
        out.mkdir(parents=True, exist_ok=True)
        sink = CsvSink(out / "results.csv", header)
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    results = {}
    diagnostics = None
    try:
        code, diagnostics = RUNNERS[cfg.mode](cfg, sink, results)
    except BlowUpError as exc:
        code, diagnostics = EXIT_BLOWUP, exc.diagnostics()
        sink.truncate(str(exc))
    except OSError as exc:
        sink.truncate(f"I/O error: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_IO
    except BaseException as exc:
        sink.truncate(f"{type(exc).__name__}: {exc}")
        raise
    finally:
        sink.close()
    manifest = {
        "schema": schema,
        "columns": header,
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "seed": cfg.seed,
        "threads_used": _threads(cfg),
        "versions": versions(),
        "started_at": started,
        "wall_time_s": time.perf_counter() - t0,
        "exit_code": code,
        "results": results,
    }
    try:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
        if diagnostics is not None:
            (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2, default=_json_default) + "\n")
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def plot_script(csv_paths, output="chaos.png"):
    """Gnuplot script drawing log-log error-vs-N panels, one per chaos-sweep CSV."""
    lines = [
        f"set terminal pngcairo size {520 * len(csv_paths)},420",
        f"set output '{output}'",
        "set datafile separator ','",
        "set logscale xy 2",
        "set xlabel 'N'",
        "set ylabel 'splitting error'",
        "set key top right",
        f"set multiplot layout 1,{len(csv_paths)}",
    ]
    for path in csv_paths:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.DictReader(row for row in fh if not row.startswith("#"))]
        anchor = next((r for r in rows if r["status"] == "ok"), None)
        lines.append(f"set title '{Path(path).parent.name or Path(path).stem}'")
        ref = ""
        if anchor is not None:
            ref = (f", {anchor['error']} * (x / {anchor['N']}) ** (-0.5) "
                   "with lines dashtype 2 title 'slope -1/2'")
        lines.append(f"plot '{path}' using 2:3:4 skip 1 with yerrorlines title 'error'{ref}")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def build_parser():
    ap = argparse.ArgumentParser(prog="mvchaos", description="Mean-field SDE particle experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set horizon.T=30")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out", help="output directory (default: output.path)")
        p.add_argument("--paper-scale", action="store_true", help="U = 500 replications")
        p.add_argument("--print-config", action="store_true", help="echo the resolved config and exit")
    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p = sub.add_parser("plot-script", help="gnuplot script for chaos-sweep CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--image", default="chaos.png")
    p.add_argument("--output", help="write the script here instead of stdout")
    return ap


def resolve_config(args):
    text = ""
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
    overrides = [f"mode = {SUBCOMMAND_MODES[args.command]}"] + list(args.set)
    if args.seed is not None:
        overrides.append(f"seed = {args.seed}")
    if args.threads is not None:
        overrides.append(f"threads = {args.threads}")
    if args.paper_scale:
        overrides.append("chaos.U = 500")
    if args.out:
        overrides.append(f"output.path = {args.out}")
    return parse_config(text, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot-script":
            script = plot_script(args.csv, args.image)
            if args.output:
                Path(args.output).write_text(script)
            else:
                sys.stdout.write(script)
            return EXIT_OK
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text())
            cfg = from_dict(manifest["config"])
            return run(cfg, args.out)
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    print(f"mvchaos {cfg.mode}: model={cfg.model.name} scheme={cfg.scheme.kind} dt={cfg.dt:g} "
          f"T={cfg.horizon.T:g} seed={cfg.seed} -> {cfg.output.path}")
    return run(cfg, cfg.output.path)


if __name__ == "__main__":
    sys.exit(main())
