"""Command-line front end.

Exit codes: 0 on success (a blow-up is a result, not a failure), 1 for usage,
config or file errors, 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import ParameterError
from .config import ConfigError, load_config
from .diagnostics import DiagnosticsError, convergence_order, fit_decay_rate
from .dynamics import AccelerationError
from .experiments import SUMMARY_FILE, simulate, sweep
from .forcing import ForcingError
from .integrators import IntegrationError
from .io import OutputError, dumps_json, read_trajectory_csv, trajectory_modal_arrays
from .modes import ModeBasisError, build_basis, characteristic_residual
from .quadrature import QuadratureError, build_context

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
USAGE_ERRORS = (ConfigError, ParameterError, ForcingError, OutputError, FileNotFoundError)
NUMERIC_ERRORS = (IntegrationError, AccelerationError, ModeBasisError, QuadratureError,
                  DiagnosticsError, FloatingPointError)
CONVERGE_METRICS = ("identity", "drift", "successive")

log = logging.getLogger("inextbeam")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="TOML experiment file")
    g.add_argument("--out", metavar="PATH", default=argparse.SUPPRESS,
                   help="output directory (modes: output CSV file)")
    g.add_argument("--tensor-cache", metavar="DIR", default=argparse.SUPPRESS,
                   help="reuse assembled tensors across runs")
    g.add_argument("--threads", metavar="N", type=int, default=argparse.SUPPRESS,
                   help="worker processes for sweeps")
    g.add_argument("--allow-undamped-inertia", action="store_true", default=argparse.SUPPRESS,
                   help="permit iota=1 with k2=0")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="inextbeam", parents=[common],
                     description="Modal simulation of an inextensible cantilever beam.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    m = sub.add_parser("modes", parents=[common], help="wavenumbers and shape coefficients as CSV")
    m.add_argument("--n-modes", type=int, help="number of modes (default: from --config, else 6)")
    m.add_argument("--length", type=float, help="beam length (default: from --config, else 1)")

    sub.add_parser("simulate", parents=[common], help="run one configured simulation")
    sub.add_parser("sweep", parents=[common], help="run the [sweep] section of a config")

    d = sub.add_parser("decay", parents=[common], help="fit E <= M exp(-omega t) to trajectory CSVs")
    d.add_argument("trajectories", nargs="+", type=Path)
    d.add_argument("--t-start", type=float, help="window start (default: [decay] or first record)")
    d.add_argument("--t-end", type=float, help="window end (default: [decay] or last record)")
    d.add_argument("--floor", type=float, help="energy floor; the fit stops at the first crossing")

    c = sub.add_parser("converge", parents=[common], help="observed order from runs at several dt")
    c.add_argument("trajectories", nargs="+", type=Path)
    c.add_argument("--dt", type=float, nargs="+", help="step of each run (default: from summary.json)")
    c.add_argument("--metric", choices=CONVERGE_METRICS, default="identity",
                   help="identity: max |identity residual|; drift: |E(T) - E(0)| / E(0); "
                        "successive: max |q(T) difference| between neighbouring dt")
    return parser


def _opt(args, name, default=None):
    return getattr(args, name, default)


def _config(args, required=True):
    path = _opt(args, "config")
    if path is None:
        if required:
            raise UsageError(f"{args.command} requires --config")
        return None
    return load_config(path, bool(_opt(args, "allow_undamped_inertia")))


def cmd_modes(args) -> int:
    cfg = _config(args, required=False)
    n = args.n_modes if args.n_modes is not None else (cfg.n_modes if cfg else 6)
    length = args.length if args.length is not None else (cfg.beam.L if cfg else 1.0)
    if n < 1 or not length > 0:
        raise UsageError("need --n-modes >= 1 and --length > 0")
    qopts = cfg.quadrature if cfg else {}
    quad = build_context(length=length, **qopts)
    basis = build_basis(n, length, quad)
    rows = []
    for j in range(n):
        k = float(basis.wavenumbers[j])
        c, C = basis.shape_coeffs[j]
        rows.append([str(j + 1), repr(k), repr(k * length), repr(float(c)), repr(float(C)),
                     repr(float(characteristic_residual(k * length)))])
    header = ["n", "kappa", "kappa_L", "c", "C", "residual"]
    out = _opt(args, "out")
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return EXIT_OK
    path = Path(out)
    if path.is_dir():
        path = path / "modes.csv"
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(_opt(args, "out", "out"))
    summary = simulate(cfg, out, _opt(args, "tensor_cache"))
    print(dumps_json({k: summary[k] for k in ("status", "t_reached", "max_identity_residual",
                                              "blowup_time", "wall_clock_seconds")}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section", "sweep")
    threads = _opt(args, "threads", 1)
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    rows = sweep(cfg, Path(_opt(args, "out", "out")), _opt(args, "tensor_cache"), workers=threads)
    counts = {}
    for r in rows:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    print(dumps_json({"runs": len(rows), "status_counts": counts}))
    return EXIT_OK


def cmd_decay(args) -> int:
    cfg = _config(args, required=False)
    window = (cfg.decay if cfg else None) or {}
    results = []
    for path in args.trajectories:
        cols = read_trajectory_csv(path)
        t, E = cols["t"], cols["E_total"]
        ta = args.t_start if args.t_start is not None else window.get("t_start", float(t[0]))
        tb = args.t_end if args.t_end is not None else window.get("t_end", float(t[-1]))
        floor = args.floor if args.floor is not None else window.get("floor", 0.0)
        fit = fit_decay_rate(t, E, (ta, tb), floor)
        results.append({"file": str(path), "omega": fit.omega, "M": fit.M, "r2": fit.r2,
                        "n_points": fit.n_points, "t_start": fit.t_start, "t_end": fit.t_end})
    print(dumps_json(results[0] if len(results) == 1 else results))
    return EXIT_OK


def _run_dt(path: Path) -> float:
    summary = path.parent / SUMMARY_FILE
    if not summary.is_file():
        raise UsageError(f"no --dt given and no {SUMMARY_FILE} next to {path}")
    return float(json.loads(summary.read_text())["dt"])


def cmd_converge(args) -> int:
    paths = list(args.trajectories)
    dts = args.dt if args.dt is not None else [_run_dt(p) for p in paths]
    if len(dts) != len(paths):
        raise UsageError(f"got {len(dts)} --dt values for {len(paths)} trajectories")
    runs = sorted(zip(dts, paths), key=lambda r: -r[0])
    data = [(dt, read_trajectory_csv(p)) for dt, p in runs]
    if args.metric == "identity":
        pairs = [(dt, float(np.max(np.abs(c["identity_residual"])))) for dt, c in data]
    elif args.metric == "drift":
        pairs = [(dt, abs(c["E_total"][-1] - c["E_total"][0]) / c["E_total"][0]) for dt, c in data]
    else:
        finals = [trajectory_modal_arrays(c)[0][-1] for _, c in data]
        pairs = [(data[k][0], float(np.max(np.abs(finals[k] - finals[k + 1]))))
                 for k in range(len(data) - 1)]
    order = convergence_order(pairs)
    print(dumps_json({"metric": args.metric, "dt": [p[0] for p in pairs],
                      "error": [p[1] for p in pairs], "order": order,
                      "files": [str(p) for _, p in runs]}))
    return EXIT_OK


COMMANDS = {"modes": cmd_modes, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "decay": cmd_decay, "converge": cmd_converge}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = {0: logging.WARNING, 1: logging.INFO}.get(_opt(args, "verbose", 0), logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"inextbeam {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        print(f"inextbeam {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"inextbeam {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
