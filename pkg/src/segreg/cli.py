"""Command-line interface: ``segreg {fit,select,mc,asym}``.

Exit status is 0 on success, 1 on usage errors, 2 on data errors and 3 on
numerical failures; diagnostics go to stderr as a single line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import date
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import BROWNIAN, RANDOM_WALK, WalkConfig, sample_path, \
    simulate_brownian_functional, simulate_random_walk_q
from .criteria import AIC, BIC, CRITERIA, criterion_name, score
from .errors import (DataError, DegenerateSegmentError, DomainError, ExperimentAbortedError,
                     HorizonTooSmallError, InfeasibleError, InvalidModelError,
                     NonConvergenceError, ResponseSupportError, SegRegError)
from .families import FAMILY_KINDS, GAUSSIAN_UNIT, ResponseFamily
from .ingest import IDENTITY, LOG, Series, SeriesSpec, load_series_csv, parse_date
from .model import Dataset, SegmentedModel
from .montecarlo import (PRESETS, ExperimentConfig, bias_experiment, format_bias_table,
                         format_selection_table, preset_cells, select_cells,
                         selection_experiment)
from .search import CANDIDATE_RULES, STRATEGIES, ContinuityPattern, SearchConfig, fit_mixed
from .selection import (ALL_CONTINUOUS, ALL_DISCONTINUOUS, ALL_PATTERNS, SelectionSpace,
                        build_report, fits_for_space)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CURVE_POINTS = 1000

_POLICY = {"all": ALL_PATTERNS, "cont": ALL_CONTINUOUS, "disc": ALL_DISCONTINUOUS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

def _load_xy(path, x_col, y_col, domain) -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            for col in (x_col, y_col):
                if col not in (reader.fieldnames or []):
                    raise DataError(f"column {col!r} not found in {path}")
            rows = [(r[x_col], r[y_col]) for r in reader]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        x = np.array([float(a) for a, _ in rows])
        y = np.array([float(b) for _, b in rows])
    except ValueError as exc:
        raise DataError(f"non-numeric entry in {path}: {exc}") from None
    if x.size < 2:
        raise DataError("insufficient data: need at least two rows")
    return Dataset(x, y, domain)


def _load(args):
    """Dataset and optional date sidecar from the data flags."""
    if args.x_column:
        return _load_xy(args.data, args.x_column, args.y_column, tuple(args.domain)), None
    spec = SeriesSpec(args.data, args.date_column, args.value_column, args.transform,
                      parse_date(args.start) if args.start else None,
                      parse_date(args.end) if args.end else None, args.max_rows)
    series = load_series_csv(spec)
    return series.data, series


def _data_echo(args) -> dict:
    keys = ("data", "x_column", "y_column", "domain", "date_column", "value_column",
            "transform", "start", "end", "max_rows")
    return {k: getattr(args, k) for k in keys}


def _search(args) -> SearchConfig:
    return SearchConfig(args.min_segment_points, args.candidate_rule, args.grid_resolution,
                        args.strategy)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _write_json(path: Optional[str], payload: dict) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, date):
        return obj.isoformat()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def curve_rows(model: SegmentedModel, series: Optional[Series] = None) -> list:
    """Fitted mean on a 1000-point grid plus one marker row per change-point.

    Columns are ``x, date, fitted_mean, segment_index, kind``; a marker row
    carries the left-segment value at the change-point.
    """
    a, b = model.domain
    grid = np.linspace(a, b, CURVE_POINTS + 1)[1:]
    mean = model.mean_function(grid)
    seg = model.segment_indices(grid)
    stamp = (lambda v: series.date_at(v).isoformat()) if series is not None else (lambda v: "")
    rows = [(float(x), stamp(x), float(mu), int(k) + 1, "curve")
            for x, mu, k in zip(grid, mean, seg)]
    for k, cp in enumerate(model.change_points):
        mu = float(model.mean_function(np.array([cp.location]))[0])
        rows.append((float(cp.location), stamp(cp.location), mu, k + 1,
                     f"change-point:{cp.continuity}"))
    return rows


def write_curve(path: str, model: SegmentedModel, series: Optional[Series] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["x", "date", "fitted_mean", "segment_index", "kind"])
        for x, d, mu, k, kind in curve_rows(model, series):
            w.writerow([repr(x), d, repr(mu), k, kind])


def _describe(model: SegmentedModel, series: Optional[Series]) -> str:
    parts = []
    for cp in model.change_points:
        where = series.date_at(cp.location).isoformat() if series else f"{cp.location:.6g}"
        parts.append(f"{where} ({cp.continuity[0]})")
    return ", ".join(parts) if parts else "none"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_fit(args, out) -> int:
    data, series = _load(args)
    if args.pattern is not None:
        pattern = ContinuityPattern.parse(args.pattern)
        if args.m is not None and args.m != pattern.m:
            raise UsageError("--m disagrees with the length of --pattern")
    else:
        pattern = ContinuityPattern.uniform(args.m or 0, "continuous")
    family = ResponseFamily(args.family)
    fit = fit_mixed(data, pattern, family, args.p, _search(args))
    sc = score(fit, args.criterion, data.n)
    payload = {
        "command": "fit",
        "config": {**_data_echo(args), "m": pattern.m, "pattern": pattern.code,
                   "family": args.family, "p": args.p, "criterion": sc.criterion,
                   "search": _search(args).to_dict()},
        "n": data.n, "loglik": fit.loglik, "score": sc.to_dict(),
        "candidates_evaluated": fit.candidates_evaluated, "strategy": fit.strategy,
        "model": fit.model.to_dict(),
    }
    _write_json(args.json_out, payload)
    if args.curve_out:
        write_curve(args.curve_out, fit.model, series)
    print(f"n={data.n} m={pattern.m} pattern={pattern.code or '-'} loglik={fit.loglik:.6f} "
          f"{sc.criterion}={sc.total:.4f}", file=out)
    print(f"change-points: {_describe(fit.model, series)}", file=out)
    return EXIT_OK


def format_selection_text(reports: dict, series: Optional[Series] = None) -> str:
    lines = []
    for crit, rep in reports.items():
        best = rep.best
        lines.append(f"[{crit}] best m={best.m} pattern={best.pattern.code or '-'} "
                     f"total={best.total:.4f} change-points: {_describe(best.fit.model, series)}")
        lines.append(f"  {'m':>2} {'pattern':<8} {'loglik':>12} {'penalty':>9} {'total':>12}")
        for i in rep.ranking:
            e = rep.table[i]
            if e.feasible:
                lines.append(f"  {e.m:>2} {e.pattern.code or '-':<8} {e.fit.loglik:12.4f} "
                             f"{e.score.penalty:9.3f} {e.total:12.4f}")
            else:
                lines.append(f"  {e.m:>2} {e.pattern.code or '-':<8} infeasible: {e.error}")
    return "\n".join(lines)


def _cmd_select(args, out) -> int:
    criteria = [criterion_name(c) for c in args.criteria.split(",") if c.strip()]
    if not criteria:
        raise UsageError("--criteria is empty")
    data, series = _load(args)
    family = ResponseFamily(args.family)
    search = _search(args)
    space = SelectionSpace(args.m_max, _POLICY[args.patterns], criteria[0])
    fits = fits_for_space(data, space, family, args.p, search)
    reports = {c: build_report(fits, SelectionSpace(args.m_max, space.pattern_policy, c), data.n)
               for c in criteria}
    payload = {
        "command": "select",
        "config": {**_data_echo(args), "m_max": args.m_max, "pattern_policy": space.pattern_policy,
                   "criteria": criteria, "family": args.family, "p": args.p,
                   "search": search.to_dict()},
        "n": data.n,
        "reports": {c: r.to_dict() for c, r in reports.items()},
    }
    _write_json(args.json_out, payload)
    if args.curve_out:
        for c, r in reports.items():
            write_curve(f"{args.curve_out}.{c}.tsv", r.best.fit.model, series)
    print(format_selection_text(reports, series), file=out)
    return EXIT_OK


def _cmd_mc(args, out) -> int:
    if (args.preset is None) == (args.config is None):
        raise UsageError("give exactly one of --preset or --config")
    reports = []
    if args.preset:
        cells = preset_cells(args.preset, replications=args.reps or 1000,
                             seed=args.seed if args.seed is not None else 0)
        cells = select_cells(cells, args.preset, args.n, args.m, args.scale, args.case,
                             args.theta_index, args.all_cells)
        if not cells:
            raise UsageError("no preset cell matches the filters")
        jobs = [(c.experiment, c.config) for c in cells]
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        items = raw if isinstance(raw, list) else [raw]
        jobs = []
        for item in items:
            kind = item.get("experiment", "selection")
            if kind not in ("bias", "selection"):
                raise UsageError(f"unknown experiment {kind!r}")
            cfg = ExperimentConfig.from_dict(item)
            overrides = {}
            if args.reps:
                overrides["replications"] = args.reps
            if args.seed is not None:
                overrides["seed"] = args.seed
            if overrides:
                cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
            jobs.append((kind, cfg))
    bias, sel = [], []
    for kind, cfg in jobs:
        if kind == "bias":
            rep = bias_experiment(cfg, args.workers)
            bias.append(rep)
        else:
            rep = selection_experiment(cfg, args.workers)
            sel.append(rep)
        reports.append({"experiment": kind, **rep.to_dict()})
    if bias:
        print(format_bias_table(bias), file=out)
    if sel:
        print(format_selection_table(sel), file=out)
    _write_json(args.json_out, {"command": "mc", "preset": args.preset, "reports": reports})
    return EXIT_OK


def _cmd_asym(args, out) -> int:
    cfg = WalkConfig(horizon=args.horizon, step=args.step, sigma=args.sigma,
                     replications=args.reps, seed=args.seed, mode=args.mode,
                     delta=tuple(args.delta or ()), alpha_n=args.alpha_n, n=args.n or 0,
                     tau_star=args.tau_star)
    if cfg.mode == BROWNIAN:
        est = simulate_brownian_functional(cfg)
    else:
        est = simulate_random_walk_q(cfg)
    _write_json(args.json_out, {"command": "asym", **est.to_dict()})
    if args.trace_out:
        if cfg.mode != BROWNIAN:
            raise UsageError("--trace-out is available in brownian mode")
        s, v = sample_path(cfg)
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write("s\tV\n")
            for a, b in zip(s, v):
                fh.write(f"{float(a)!r}\t{float(b)!r}\n")
    print(f"e_sup={est.e_sup:.4f} (se {est.se_sup:.4f})  "
          f"e_neg_copy={est.e_neg_copy_at_argsup:.4f} (se {est.se_neg_copy:.4f})  "
          f"e_total={est.e_total:.4f} (se {est.std_error:.4f})  "
          f"escape_rate={est.escape_rate:.4g}  reps={est.replications}", file=out)
    if est.e_sup_grid is not None:
        print(f"grid sup h={cfg.step:g}: {est.e_sup_grid:.4f}  h/2: {est.e_sup_half_grid:.4f}  "
              f"extrapolated: {est.e_sup_richardson:.4f}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_data_flags(p) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--date-column", default="date")
    p.add_argument("--value-column", default="value")
    p.add_argument("--transform", choices=(LOG, IDENTITY), default=LOG)
    p.add_argument("--start", help="first date kept (ISO or DD-MMM-YY)")
    p.add_argument("--end", help="last date kept")
    p.add_argument("--max-rows", type=int, help="keep the first N rows of the window")
    p.add_argument("--x-column", help="read numeric (x, y) columns instead of a dated series")
    p.add_argument("--y-column", default="y")
    p.add_argument("--domain", type=float, nargs=2, default=(0.0, 1.0), metavar=("A", "B"),
                   help="covariate domain (A, B] for --x-column input")


def _add_model_flags(p) -> None:
    p.add_argument("--family", choices=FAMILY_KINDS, default=GAUSSIAN_UNIT)
    p.add_argument("--p", type=int, default=2, help="coefficients per segment")
    p.add_argument("--min-segment-points", type=int)
    p.add_argument("--candidate-rule", choices=CANDIDATE_RULES)
    p.add_argument("--grid-resolution", type=float, default=0.01)
    p.add_argument("--strategy", choices=STRATEGIES, default="dynamic-programming")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segreg", description="Segmented regression with change-points.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one model")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--m", type=int, help="number of change-points (all continuous)")
    p.add_argument("--pattern", help="continuity string such as 'cdc'")
    p.add_argument("--criterion", choices=CRITERIA + ("aic-proposed",), default=AIC)
    p.add_argument("--json-out")
    p.add_argument("--curve-out", help="TSV file for the fitted curve")

    p = sub.add_parser("select", help="select the number and continuity of change-points")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--patterns", choices=tuple(_POLICY), default="all")
    p.add_argument("--criteria", default=f"{AIC},{BIC}", help="comma-separated list")
    p.add_argument("--json-out")
    p.add_argument("--curve-out", help="prefix for per-criterion curve TSV files")

    p = sub.add_parser("mc", help="Monte Carlo experiments")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--config", help="JSON experiment config (object or list)")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="preset filter: sample size")
    p.add_argument("--m", type=int, help="preset filter: true change-point count")
    p.add_argument("--scale", type=int, help="table1 filter: theta0 multiplier")
    p.add_argument("--case", choices=("continuous", "discontinuous"), help="preset filter")
    p.add_argument("--theta-index", type=int, help="selection-table filter: theta* row 0-3")
    p.add_argument("--all-cells", action="store_true", help="run every cell of the preset")
    p.add_argument("--workers", type=int, help="worker processes (default JOINPOINT_THREADS)")
    p.add_argument("--json-out")

    p = sub.add_parser("asym", help="simulate the change-point limit functional")
    p.add_argument("--mode", choices=(BROWNIAN, RANDOM_WALK), default=BROWNIAN)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, nargs="+", help="random-walk coefficient jump")
    p.add_argument("--alpha-n", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--tau-star", type=float, default=0.5)
    p.add_argument("--json-out")
    p.add_argument("--trace-out", help="TSV file for one sample path (s, V)")
    return parser


_COMMANDS = {"fit": _cmd_fit, "select": _cmd_select, "mc": _cmd_mc, "asym": _cmd_asym}

_DATA_ERRORS = (DataError, DomainError, ResponseSupportError, InvalidModelError)
_NUMERIC_ERRORS = (NonConvergenceError, DegenerateSegmentError, InfeasibleError,
                   HorizonTooSmallError, ExperimentAbortedError)


def run_cli(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    """Run the command line and return the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: fit, select, mc or asym")
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"segreg: usage error: {exc}", file=err)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"segreg: data error: {exc}", file=err)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"segreg: numerical failure: {exc}", file=err)
        return EXIT_NUMERIC
    except SegRegError as exc:
        print(f"segreg: numerical failure: {exc}", file=err)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"segreg: usage error: {exc}", file=err)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
