"""Command-line front end: benchmark runs, convergence studies and timing tables.

Every command writes ``<command>_results.csv`` whose first line is a schema
comment, plus ``<command>_plot.svg`` for ``convergence`` and ``jets`` unless
``--no-plot`` is given. Timings (``bench``) go to a separate file so that the
results file is byte-identical between runs with the same settings.

Exit codes: 0 ok, 2 configuration error, 3 divergence, 4 oracle failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergenceError, MetdError
from .problems import (Ce2JetConfig, care_problem, cgnn_sylvester_problem, convergence_study,
                       integrate_jets, lyapunov_problem, riccati_bench_problem)
from .stepper import SCHEMES, build_table, initial_state, integrate, step_metd1, vectorized_etd1_step
from .svg import heatmap_svg, loglog_svg

SCHEMA_VERSION = "v1"
OUTPUT_ENV = "METD_OUTPUT_DIR"

COLUMNS = {
    "convergence": ["problem", "scheme", "dt", "error", "slope", "exact"],
    "lyapunov": ["step", "t", "error"],
    "care": ["step", "t", "error"],
    "jets": ["step", "t", "kx", "norm", "distance", "hermitian_error"],
    "cgnn": ["bch_order", "dt", "t_end", "residual", "distance_to_stationary", "gate_margin", "converged_gate"],
    "bench": ["n", "max_abs_difference"],
    "bench_timings": ["n", "method", "seconds_per_step", "ratio"],
}

DEFAULTS = {
    "convergence": dict(problem="lyapunov", schemes="metd1,metd2,metd2rk",
                        dts="0.2,0.1,0.05,0.025,0.0125", t_end=None, seed=0, parallel=False),
    "lyapunov": dict(scheme="metd2", dt=0.05, t_end=10.0),
    "care": dict(scheme="metd2rk", dt=0.05, t_end=100.0, seed=0),
    "jets": dict(nx=16, ny=32, dt=0.5, steps=200, modes=None, form="plain", scheme="metd2",
                 parallel=False, jets=None),
    "cgnn": dict(nodes=10, d=4, alpha=0.5, bch_orders="1,3", dt=0.0025, t_end=50.0, seed=1,
                 w_scale=0.2),
    "bench": dict(problem="care", compare="vectorized", sizes="2,4,8", repeats=5, seed=0),
}
COMMON = dict(out=None, force=False, plot=True)


# --- argument handling -------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
        p.add_argument("--force", action="store_true", default=None, help="overwrite existing files")
        p.add_argument("--no-plot", dest="plot", action="store_false", default=None)
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        return p

    p = common(sub.add_parser("convergence", help="error vs dt and fitted order"))
    p.add_argument("--problem", choices=["lyapunov", "care"])
    p.add_argument("--schemes")
    p.add_argument("--dts")
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", action="store_true", default=None)

    for name in ("lyapunov", "care"):
        p = common(sub.add_parser(name, help=f"trajectory of the {name} benchmark"))
        p.add_argument("--scheme", choices=sorted(SCHEMES))
        p.add_argument("--dt", type=float)
        p.add_argument("--t-end", type=float)
        if name == "care":
            p.add_argument("--seed", type=int)

    p = common(sub.add_parser("jets", help="CE2 fluctuation covariance per zonal mode"))
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--modes", help="comma-separated zonal wavenumbers (default: all retained)")
    p.add_argument("--form", choices=["plain", "bch2"])
    p.add_argument("--scheme", choices=sorted(SCHEMES))
    p.add_argument("--parallel", action="store_true", default=None)

    p = common(sub.add_parser("cgnn", help="non-square Sylvester fixed point on a random graph"))
    p.add_argument("--nodes", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--bch-orders")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--w-scale", type=float)

    p = common(sub.add_parser("bench", help="matrix-form vs vectorized step timing"))
    p.add_argument("--problem", choices=["care"])
    p.add_argument("--compare", choices=["vectorized"])
    p.add_argument("--sizes")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(COMMON, **DEFAULTS[args.command])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown keys for '{args.command}': {sorted(unknown)}")
        cfg.update(data)
    for key, value in vars(args).items():
        if key in cfg and value is not None:
            cfg[key] = value
    cfg["out"] = Path(cfg["out"] or os.environ.get(OUTPUT_ENV) or "results")
    cfg["command"] = args.command
    return cfg


def _floats(text, name):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--{name} must be a comma-separated list of numbers") from exc


def _ints(text, name):
    vals = _floats(text, name)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"--{name} must hold integers")
    return [int(v) for v in vals]


def _words(text):
    if isinstance(text, (list, tuple)):
        return [str(x).lower() for x in text]
    return [w.strip().lower() for w in str(text).split(",") if w.strip()]


# --- output ----------------------------------------------------------------------------------

class Outputs:
    """Collects files and refuses to overwrite anything unless forced."""

    def __init__(self, directory: Path, force: bool):
        self.dir = directory
        self.force = force
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.dir}: {exc}") from exc
        if not os.access(self.dir, os.W_OK):
            raise ConfigError(f"output directory {self.dir} is not writable")

    def claim(self, *names):
        for name in names:
            if (self.dir / name).exists() and not self.force:
                raise ConfigError(f"{self.dir / name} exists; pass --force to overwrite")

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(schema: str, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: metd.{schema}/{SCHEMA_VERSION} columns={','.join(COLUMNS[schema])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS[schema])
    for row in rows:
        w.writerow([_fmt(row[c]) for c in COLUMNS[schema]])
    return buf.getvalue()


# --- commands -------------------------------------------------------------------------------

def cmd_convergence(cfg, out: Outputs):
    schemes = _words(cfg["schemes"])
    bad = set(schemes) - set(SCHEMES)
    if bad:
        raise ConfigError(f"unknown schemes {sorted(bad)}; choose from {sorted(SCHEMES)}")
    dts = _floats(cfg["dts"], "dts")
    if len(dts) < 3 or min(dts) <= 0:
        raise ConfigError("--dts needs at least three positive values")
    if cfg["problem"] == "lyapunov":
        problem, stationary = lyapunov_problem()
        t_end = cfg["t_end"] or 10.0
    else:
        problem, stationary, _ = care_problem(int(cfg["seed"]))
        t_end = cfg["t_end"] or 100.0
    out.claim("convergence_results.csv", *(["convergence_plot.svg"] if cfg["plot"] else []))
    reports = convergence_study(problem, schemes, dts, t_end, "stationary", stationary=stationary,
                                parallel=bool(cfg["parallel"]))
    rows = [dict(problem=cfg["problem"], scheme=r.scheme, dt=dt, error=e, slope=r.slope, exact=r.exact)
            for r in reports for dt, e in zip(r.dts, r.errors)]
    out.write("convergence_results.csv", csv_text("convergence", rows))
    if cfg["plot"]:
        series = {f"{r.scheme} (slope {r.slope:.2f})" if r.slope is not None else r.scheme: (r.dts, r.errors)
                  for r in reports}
        out.write("convergence_plot.svg",
                  loglog_svg(series, "dt", "terminal error", f"{cfg['problem']}, t = {t_end:g}"))
    for r in reports:
        slope = "exact" if r.exact else ("n/a" if r.slope is None else f"{r.slope:.3f}")
        print(f"{r.scheme:8s} slope {slope}")
    return 0


def _trajectory(cfg, out, name, problem, stationary):
    out.claim(f"{name}_results.csv")
    rows = []

    def observe(t, Q):
        rows.append(dict(step=len(rows) + 1, t=t, error=float(np.linalg.norm(Q - stationary))))

    try:
        integrate(problem, cfg["scheme"], float(cfg["dt"]), float(cfg["t_end"]), observer=observe)
    finally:
        out.write(f"{name}_results.csv", csv_text(name, rows))
    print(f"{name}: final error vs stationary {rows[-1]['error']:.3e}" if rows else f"{name}: no steps")
    return 0


def cmd_lyapunov(cfg, out):
    problem, C_inf = lyapunov_problem()
    return _trajectory(cfg, out, "lyapunov", problem, C_inf)


def cmd_care(cfg, out):
    problem, X_inf, _ = care_problem(int(cfg["seed"]))
    return _trajectory(cfg, out, "care", problem, X_inf)


def cmd_jets(cfg, out):
    overrides = dict(cfg["jets"] or {})
    overrides.update(Nx=int(cfg["nx"]), Ny=int(cfg["ny"]))
    config = Ce2JetConfig.from_dict(overrides)
    modes = config.modes if cfg["modes"] is None else _ints(cfg["modes"], "modes")
    if int(cfg["steps"]) < 1:
        raise ConfigError("--steps must be positive")
    out.claim("jets_results.csv", *(["jets_plot.svg"] if cfg["plot"] else []))
    runs = integrate_jets(config, float(cfg["dt"]), int(cfg["steps"]), modes, cfg["form"],
                          cfg["scheme"], parallel=bool(cfg["parallel"]))
    rows = []
    for kx, tr in runs.items():
        for k, t in enumerate(tr.times):
            rows.append(dict(step=k, t=t, kx=kx, norm=tr.norms[k], distance=tr.distances[k],
                             hermitian_error=tr.hermitian_errors[k]))
    out.write("jets_results.csv", csv_text("jets", rows))
    diverged = {kx: tr.diverged_at for kx, tr in runs.items() if tr.diverged_at is not None}
    if cfg["plot"]:
        length = min(len(tr.diagonals) for tr in runs.values())
        anomaly = sum(np.array(tr.diagonals[:length]) - tr.stationary_diagonal for tr in runs.values())
        out.write("jets_plot.svg", heatmap_svg(anomaly.T, "step", "y",
                                               "covariance diagonal minus stationary"))
    for kx, tr in runs.items():
        status = f"diverged at step {tr.diverged_at}" if tr.diverged_at is not None else \
            f"max norm {max(tr.norms):.3e}, final distance {tr.distances[-1]:.3e}"
        print(f"kx={kx}: {status}")
    if diverged:
        first = min(diverged.values())
        raise DivergenceError(first, f"modes {sorted(diverged)} diverged")
    return 0


def cmd_cgnn(cfg, out):
    orders = _ints(cfg["bch_orders"], "bch-orders")
    if any(o not in (1, 2, 3) for o in orders):
        raise ConfigError("BCH orders must be in {1, 2, 3}")
    inst = cgnn_sylvester_problem(int(cfg["nodes"]), int(cfg["d"]), float(cfg["alpha"]),
                                  int(cfg["seed"]), float(cfg["w_scale"]))
    out.claim("cgnn_results.csv")
    dt, t_end = float(cfg["dt"]), float(cfg["t_end"])
    rows = []
    for order in orders:
        Z, expansion = inst.generator(dt, order)
        state = integrate(inst.problem, "metd2", dt, t_end, Z=Z)
        rows.append(dict(bch_order=order, dt=dt, t_end=t_end, residual=inst.residual(state.Q),
                         distance_to_stationary=float(np.linalg.norm(state.Q - inst.stationary)),
                         gate_margin=expansion.gate_margin, converged_gate=expansion.converged_gate))
        print(f"BCH{order}: residual {rows[-1]['residual']:.3e}, gate {'ok' if expansion.converged_gate else 'violated'}")
    out.write("cgnn_results.csv", csv_text("cgnn", rows))
    return 0


def _time_per_call(fn, repeats, number):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def bench_sizes(sizes, repeats=5, seed=0, dt=0.05):
    """Per-step seconds for the matrix form (cached table) and the vectorized form."""
    results = []
    for n in sizes:
        problem = riccati_bench_problem(n, seed)
        state = initial_state(problem)
        table = build_table(problem, dt)
        diff = float(np.abs(step_metd1(state, table, problem).Q
                            - vectorized_etd1_step(problem, problem.Q0, problem.t0, dt)).max())
        t_mat = _time_per_call(lambda: step_metd1(state, table, problem), repeats, 200)
        t_vec = _time_per_call(lambda: vectorized_etd1_step(problem, problem.Q0, problem.t0, dt), repeats, 20)
        results.append(dict(n=n, diff=diff, matrix=t_mat, vectorized=t_vec))
    return results


def cmd_bench(cfg, out):
    sizes = _ints(cfg["sizes"], "sizes")
    out.claim("bench_results.csv", "bench_timings.csv")
    res = bench_sizes(sizes, int(cfg["repeats"]), int(cfg["seed"]))
    out.write("bench_results.csv", csv_text("bench", [dict(n=r["n"], max_abs_difference=r["diff"]) for r in res]))
    rows = []
    for r in res:
        ratio = r["vectorized"] / r["matrix"]
        rows.append(dict(n=r["n"], method="matrix", seconds_per_step=r["matrix"], ratio=None))
        rows.append(dict(n=r["n"], method="vectorized", seconds_per_step=r["vectorized"], ratio=ratio))
        print(f"n={r['n']}: matrix {r['matrix']:.2e} s, vectorized {r['vectorized']:.2e} s, ratio {ratio:.1f}")
    out.write("bench_timings.csv", csv_text("bench_timings", rows))
    return 0


COMMANDS = {
    "convergence": cmd_convergence,
    "lyapunov": cmd_lyapunov,
    "care": cmd_care,
    "jets": cmd_jets,
    "cgnn": cmd_cgnn,
    "bench": cmd_bench,
}


def run(cfg: dict) -> int:
    out = Outputs(Path(cfg["out"]), bool(cfg["force"]))
    return COMMANDS[cfg["command"]](cfg, out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return run(resolve_config(args))
    except MetdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
