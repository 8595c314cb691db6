"""Command-line interface: ``orderfit <subcommand> [options]``.

Exit status is 0 on success, 2 on usage errors and 1 when reading the data
or the computation fails.  Randomised subcommands print the seed they used
on standard error; ``--seed`` overrides ``$ORDERFIT_SEED``, which overrides
the built-in default.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .fitcore import FitError, FitMethod, NonPositiveDataError, bootstrap_se, fit
from .params import DistributionKind, DistributionParams, LocScaleParams, PlottingScheme
from .resweights import (
    MomentMethod,
    NumericalInstabilityError,
    mc_covariance,
    moment_table,
    read_table_csv,
    write_table_csv,
)
from .sampling import sample
from .simstudy import StudyConfig, figure_csv, figure_data, report_csv, run_study

DEFAULT_SEED = 20130917
SEED_ENV = "ORDERFIT_SEED"

_EPILOG = (
    "Numbers are written with the shortest repr that round-trips (at most 17 "
    "significant digits) in JSON and in the weights, cov, sample and "
    "figure-data CSV files; the simstudy summary CSV uses 7 significant digits."
)


class ObservationError(ValueError):
    pass


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ObservationError(f"cannot read {path}: {exc.strerror or exc}") from None
    values, rows = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or cells == [""]:
            continue
        if len(cells) != 1:
            raise ObservationError(f"row {lineno}: expected a single column, got {len(cells)}")
        if lineno == 1 and cells[0].lower() == "x":
            continue
        try:
            values.append(float(cells[0]))
        except ValueError:
            raise ObservationError(f"row {lineno}: non-numeric value {cells[0]!r}") from None
        rows.append(lineno)
    if not values:
        raise ObservationError(f"{path} contains no observations")
    return values, rows


def read_observations(path) -> list[float]:
    """Values from a one-per-line file or a single-column CSV with optional header ``x``."""
    return _read_rows(path)[0]


# --------------------------------------------------------------------------
# argument parsing

def _dist(value):
    try:
        return DistributionKind.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(value):
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(value):
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _float_list(value):
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None


def _int_list(value):
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orderfit",
        description="Order-statistics regression and ML fitting for log-logistic, Weibull and logistic data.",
        epilog=_EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def common(p, formats=("csv", "json"), default="csv"):
        p.add_argument("--dist", type=_dist, required=True, help="loglogistic, weibull or logistic")
        p.add_argument("--output", "-o", help="output file (default: standard output)")
        p.add_argument("--format", choices=formats, default=default)

    def seeded(p):
        p.add_argument("--seed", type=_seed, default=None,
                       help=f"RNG seed (default: ${SEED_ENV} or {DEFAULT_SEED})")

    p = sub.add_parser("fit", help="estimate parameters from data", epilog=_EPILOG)
    common(p, default="json")
    p.add_argument("--input", "-i", required=True, help="one value per line, or a CSV column headed x")
    p.add_argument("--method", default="wls-exact", choices=[m.value for m in FitMethod])
    p.add_argument("--scheme", default="standard", choices=[s.value for s in PlottingScheme])
    p.add_argument("--m", type=_positive_int, default=5000, help="MC replications for wls-mc/gls-full")
    p.add_argument("--weights", help="weight table CSV (rank,mean,variance,weight) for wls methods")
    p.add_argument("--bootstrap", type=_positive_int, default=None, metavar="REPS",
                   help="also report bootstrap standard errors")
    seeded(p)

    p = sub.add_parser("weights", help="residual moment and weight table", epilog=_EPILOG)
    common(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--method", default="exact", choices=["exact", "asymptotic", "mc"])
    p.add_argument("--scheme", default="standard", choices=[s.value for s in PlottingScheme])
    p.add_argument("--m", type=_positive_int, default=None, help="MC replications (method mc)")
    seeded(p)

    p = sub.add_parser("cov", help="Monte-Carlo residual covariance matrix", epilog=_EPILOG)
    common(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, default=5000)
    seeded(p)

    p = sub.add_parser("sample", help="draw random variates", epilog=_EPILOG)
    common(p, formats=("lines", "csv"), default="lines")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--alpha", type=float, help="scale (loglogistic, weibull)")
    p.add_argument("--beta", type=float, help="shape (loglogistic, weibull)")
    p.add_argument("--mu", type=float, help="location (logistic)")
    p.add_argument("--sigma", type=float, help="scale (logistic)")
    seeded(p)

    p = sub.add_parser("simstudy", help="bias/MSE study of regression vs ML", epilog=_EPILOG)
    common(p)
    p.add_argument("--betas", type=_float_list, default=None, help="comma-separated true shapes")
    p.add_argument("--ns", type=_int_list, default=None, help="comma-separated sample sizes")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--methods", default="wls-exact,ml", help="comma-separated fit methods")
    p.add_argument("--workers", type=_positive_int, default=1)
    seeded(p)

    p = sub.add_parser("figure-data", help="exact vs simulated vs asymptotic residual variances",
                       epilog=_EPILOG)
    common(p, formats=("csv",))
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, default=5000)
    p.add_argument("--scheme", default="standard", choices=[s.value for s in PlottingScheme])
    seeded(p)
    return parser


def _resolve_seed(args, parser):
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get(SEED_ENV, "").strip():
        try:
            seed = _seed(os.environ[SEED_ENV].strip())
        except argparse.ArgumentTypeError as exc:
            parser.error(f"${SEED_ENV}: {exc}")
    else:
        seed = DEFAULT_SEED
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _emit(text, args):
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2) + "\n"


# --------------------------------------------------------------------------
# subcommands

def _cmd_fit(args, parser):
    method = FitMethod(args.method)
    seed = None
    if method in (FitMethod.WLS_MC, FitMethod.GLS_FULL) or args.bootstrap:
        seed = _resolve_seed(args, parser)
    if args.weights and method not in (FitMethod.WLS_EXACT, FitMethod.WLS_ASYMPTOTIC, FitMethod.WLS_MC):
        parser.error("--weights only applies to wls-* methods")
    if args.bootstrap is not None and args.bootstrap < 100:
        parser.error("--bootstrap needs at least 100 replications")
    values, rows = _read_rows(args.input)
    table = None
    if args.weights:
        with open(args.weights) as fh:
            mm = {FitMethod.WLS_EXACT: MomentMethod.EXACT, FitMethod.WLS_ASYMPTOTIC: MomentMethod.ASYMPTOTIC,
                  FitMethod.WLS_MC: MomentMethod.MONTECARLO}[method]
            table = read_table_csv(fh.read(), args.dist, mm)
    try:
        res = fit(args.dist, values, method, scheme=args.scheme, mc_m=args.m, seed=seed, table=table)
    except NonPositiveDataError as exc:
        raise FitError(f"row {rows[exc.index]}: value {exc.value!r} is not positive;"
                       f" {args.dist.value} data must be > 0") from None
    record = res.to_record()
    if args.bootstrap:
        bs = bootstrap_se(args.dist, values, method, reps=args.bootstrap, seed=seed,
                          scheme=args.scheme, mc_m=args.m)
        record.update(se_alpha=bs.se_alpha, se_beta=bs.se_beta, bootstrap_failures=bs.failures)
    if args.format == "json":
        return _json(record)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(record))
    w.writerow([";".join(v) if isinstance(v, list) else ("" if v is None else
                (repr(v) if isinstance(v, float) else v)) for v in record.values()])
    return buf.getvalue()


def _cmd_weights(args, parser):
    method = MomentMethod.parse(args.method)
    seed = None
    if method is MomentMethod.MONTECARLO:
        if args.m is None:
            parser.error("--method mc needs --m")
        seed = _resolve_seed(args, parser)
    elif args.m is not None:
        parser.error("--m only applies to --method mc")
    if args.n < 2:
        parser.error("--n must be >= 2")
    if method is MomentMethod.MONTECARLO and args.m < 100:
        parser.error("--m must be >= 100")
    table = moment_table(args.dist, args.n, method, args.scheme, mc_m=args.m, seed=seed)
    if args.format == "csv":
        return write_table_csv(table)
    return _json({
        "dist": table.dist.value, "n": table.n, "method": table.method.value,
        "rank": list(range(1, table.n + 1)), "mean": table.means.tolist(),
        "variance": table.variances.tolist(), "weight": table.weights.tolist(),
    })


def _cmd_cov(args, parser):
    if args.n < 2:
        parser.error("--n must be >= 2")
    if args.m < 100:
        parser.error("--m must be >= 100")
    seed = _resolve_seed(args, parser)
    est = mc_covariance(args.dist, args.n, args.m, seed)
    logdet = est.log_det()
    det = float(np.exp(logdet))
    print(f"log_det: {logdet!r}\ndet: {det!r}", file=sys.stderr)
    if args.format == "json":
        return _json({"dist": est.dist.value, "n": est.n, "m": est.m, "seed": est.seed,
                      "log_det": logdet, "det": det, "matrix": est.matrix.tolist()})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"r{j}" for j in range(1, est.n + 1)])
    for row in est.matrix:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _cmd_sample(args, parser):
    if args.dist is DistributionKind.LOGISTIC:
        if args.mu is None or args.sigma is None:
            parser.error("logistic sampling needs --mu and --sigma")
        if args.alpha is not None or args.beta is not None:
            parser.error("--alpha/--beta do not apply to the logistic family")
        build = lambda: LocScaleParams(args.mu, args.sigma)  # noqa: E731
    else:
        if args.alpha is None or args.beta is None:
            parser.error(f"{args.dist.value} sampling needs --alpha and --beta")
        if args.mu is not None or args.sigma is not None:
            parser.error("--mu/--sigma only apply to the logistic family")
        build = lambda: DistributionParams(args.alpha, args.beta)  # noqa: E731
    try:
        params = build()
    except ValueError as exc:
        parser.error(str(exc))
    seed = _resolve_seed(args, parser)
    xs = sample(args.dist, params, args.n, seed)
    lines = [repr(float(v)) for v in xs]
    head = ["x"] if args.format == "csv" else []
    return "\n".join(head + lines) + "\n"


def _cmd_simstudy(args, parser):
    try:
        methods = [FitMethod.parse(m) for m in args.methods.split(",") if m.strip()]
    except ValueError as exc:
        parser.error(str(exc))
    seed = _resolve_seed(args, parser)
    kwargs = {"dist": args.dist, "reps": args.reps, "seed": seed, "alpha": args.alpha, "methods": methods}
    if args.betas:
        kwargs["beta_grid"] = args.betas
    if args.ns:
        kwargs["n_grid"] = args.ns
    try:
        config = StudyConfig(**kwargs)
    except ValueError as exc:
        parser.error(str(exc))
    report = run_study(config, workers=args.workers)
    if args.format == "csv":
        return report_csv(report)
    cells = [
        {"dist": report.dist.value, "n": n, "beta_true": b, "method": m.value, "parameter": p,
         "bias": c.bias, "mse": c.mse, "failures": c.failures}
        for (n, b, m, p), c in sorted(report.cells.items(),
                                      key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value, kv[0][3]))
    ]
    return _json(cells)


def _cmd_figure_data(args, parser):
    if args.n < 2:
        parser.error("--n must be >= 2")
    if args.m < 100:
        parser.error("--m must be >= 100")
    seed = _resolve_seed(args, parser)
    return figure_csv(figure_data(args.dist, args.n, args.m, seed, args.scheme))


_COMMANDS = {
    "fit": _cmd_fit,
    "weights": _cmd_weights,
    "cov": _cmd_cov,
    "sample": _cmd_sample,
    "simstudy": _cmd_simstudy,
    "figure-data": _cmd_figure_data,
}


def main(argv=None) -> int:
    """Parse ``argv`` and run the subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = _COMMANDS[args.command](args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (FitError, ObservationError, NumericalInstabilityError, ValueError, OSError) as exc:
        print(f"orderfit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    _emit(text, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
