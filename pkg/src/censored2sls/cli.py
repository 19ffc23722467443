"""Command-line interface: ``fit`` on CSV data and ``simulate`` the Monte Carlo design.

Exit status is 0 on success, 2 for usage errors, 3 for invalid data and 4
for numerical failures (rank deficiency, too many failed replications).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from .errors import DataError, RankDeficiencyError
from .estimator import fit
from .km import Sample
from .simulation import DgpConfig, McConfig, SimulationError, run_monte_carlo

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def read_columns(path, names):
    """Read the named columns of a CSV file as float arrays.

    Row numbers in error messages are file line numbers (the header is line 1).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty; a header row is required")
        header = [h.strip() for h in header]
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise DataError(f"duplicate column(s) in header: {', '.join(dupes)}")
        missing = [c for c in names if c not in header]
        if missing:
            raise DataError(f"column(s) not found: {', '.join(missing)}")
        index = {c: header.index(c) for c in names}
        cols = {c: [] for c in names}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            for c, j in index.items():
                cell = row[j].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"row {lineno}, column {c!r}: not a number: {cell!r}") from None
                if not math.isfinite(value):
                    raise DataError(f"row {lineno}, column {c!r}: value is not finite")
                cols[c].append(value)
    if not cols[names[0]]:
        raise DataError(f"{path} has no data rows")
    return {c: np.array(v) for c, v in cols.items()}


def build_sample(cols, outcome, status, endog, instruments, exog, intercept):
    """Assemble X = [1?, endog, exog] and Z = [1?, instruments, exog]."""
    delta = cols[status]
    bad = np.flatnonzero((delta != 0) & (delta != 1))
    if bad.size:
        raise DataError(
            f"row {bad[0] + 2}, column {status!r}: status must be 0 or 1, got {delta[bad[0]]:g}"
        )
    n = delta.shape[0]
    lead = [np.ones(n)] if intercept else []
    x = np.column_stack(lead + [cols[c] for c in endog] + [cols[c] for c in exog])
    z = np.column_stack(lead + [cols[c] for c in instruments] + [cols[c] for c in exog])
    names = (["const"] if intercept else []) + list(endog) + list(exog)
    return Sample(y=cols[outcome], delta=delta.astype(np.int8), x=x, z=z), names


def fit_report(res, names) -> dict:
    coefs = []
    for k, name in enumerate(names):
        coefs.append(
            {
                "name": name,
                "estimate": float(res.beta[k]),
                "std_error": float(res.se[k]),
                "ci_lower": float(res.ci[k, 0]),
                "ci_upper": float(res.ci[k, 1]),
                "z": float(res.zstat[k]),
                "p_value": float(res.pvalues[k]),
            }
        )
    return {
        "coefficients": coefs,
        "n": int(res.n),
        "censoring_fraction": float(res.censoring_fraction),
        "weight_sum": float(res.weight_sum),
        "alpha": float(res.alpha),
    }


def _g6(v):
    return f"{v:.6g}"


def format_fit_table(report) -> str:
    level = 100 * (1 - report["alpha"])
    head = ["", "estimate", "std.err", f"[{level:g}% lo", "hi]", "z", "p"]
    rows = [
        [c["name"]]
        + [_g6(c[k]) for k in ("estimate", "std_error", "ci_lower", "ci_upper", "z", "p_value")]
        for c in report["coefficients"]
    ]
    widths = [max(len(r[j]) for r in [head] + rows) for j in range(len(head))]
    lines = ["  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)) for r in [head] + rows]
    lines.append("")
    lines.append(f"n = {report['n']}")
    lines.append(f"censoring fraction = {_g6(report['censoring_fraction'])}")
    lines.append(f"weight sum = {_g6(report['weight_sum'])}")
    return "\n".join(lines)


def format_summary_table(summary: dict) -> str:
    keys = ["bias", "variance", "mse", "coverage", "width", "pct_significant", "n_failed", "reps"]
    wd = max(map(len, keys))
    return "\n".join(
        f"{k.ljust(wd)}  {_g6(summary[k]) if isinstance(summary[k], float) else summary[k]}"
        for k in keys
    )


def cmd_fit(args) -> int:
    groups = {
        "outcome": [args.outcome],
        "status": [args.status],
        "endog": args.endog,
        "instruments": args.instruments,
        "exog": args.exog,
    }
    seen = {}
    for group, cols in groups.items():
        for c in cols:
            if c in seen:
                raise _UsageError(f"column {c!r} given for both {seen[c]} and {group}")
            seen[c] = group
    if len(args.instruments) < len(args.endog):
        raise _UsageError(
            f"{len(args.endog)} endogenous regressor(s) need at least as many instruments"
        )

    names = [args.outcome, args.status, *args.endog, *args.instruments, *args.exog]
    cols = read_columns(args.data, names)
    sample, coef_names = build_sample(
        cols, args.outcome, args.status, args.endog, args.instruments, args.exog, args.intercept
    )
    report = fit_report(fit(sample, alpha=args.alpha), coef_names)
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(format_fit_table(report))
    return 0


def cmd_simulate(args) -> int:
    cfg = McConfig(
        dgp=DgpConfig(n=args.n, rho=args.rho, seed=args.seed),
        reps=args.reps,
        alpha=args.alpha,
        target=args.target,
    )
    summary = run_monte_carlo(cfg, workers=args.workers).as_dict()
    summary.update(n=args.n, rho=args.rho, seed=args.seed, alpha=args.alpha)
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(format_summary_table(summary))
    return 0


class _UsageError(Exception):
    pass


def _alpha(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return v


def _at_least(lo):
    def parse(text):
        v = int(text)
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be at least {lo}, got {text}")
        return v

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="censored2sls",
        description="2SLS with a right-censored outcome (Kaplan-Meier weighted).",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the estimator on a CSV file")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--outcome", required=True, help="observed follow-up column")
    p.add_argument("--status", required=True, help="event indicator column (1 = uncensored)")
    p.add_argument("--endog", nargs="+", required=True, action="extend", default=[])
    p.add_argument("--instruments", nargs="+", required=True, action="extend", default=[])
    p.add_argument("--exog", nargs="+", action="extend", default=[],
                   help="exogenous regressors, added to both X and Z")
    p.add_argument("--intercept", action="store_true", help="prepend a constant to X and Z")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run the Monte Carlo design")
    p.add_argument("--n", type=_at_least(10), default=1000)
    p.add_argument("--reps", type=_at_least(1), default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rho", type=float, default=None, help="censoring shift, C = rho + Exp(1)")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--target", type=int, choices=(0, 1, 2), default=1,
                   help="coefficient to summarize (0 = intercept)")
    p.add_argument("--workers", type=_at_least(1), default=1)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RankDeficiencyError, np.linalg.LinAlgError, SimulationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def run():
    sys.exit(main())
