"""Command-line interface.

Every failure prints one line ``cram: error kind=<kind> code=<code>: <message>``
to stderr and exits with the code of its family: input 2, contract 3,
numeric 4, io 5.
"""

import argparse
import json
import sys

import numpy as np

from . import data as dio
from .core import (
    FitConfig,
    fit,
    predict_raw,
    prepare_smoothers,
    rank_path,
    stationarity_certificate,
)
from .errors import CramError, InputError, PersistenceError
from .experiments import (
    SyntheticSpec,
    default_lambda_grid,
    generate_synthetic,
    kfold_cv,
    risk_scaling_study,
)
from .smoothing import SmootherSpec


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _fail(InputError(message))


def _fail(exc):
    code = getattr(exc, "exit_code", 1)
    kind = getattr(exc, "kind", "error")
    msg = " ".join(str(exc).split())
    print(f"cram: error kind={kind} code={code}: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _add_data(p):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--x-columns", type=_names, default=None,
                   help="comma list of covariate columns (default: every column not in --y-columns)")
    p.add_argument("--y-columns", type=_names, required=True, help="comma list of response columns")


def _add_fit_flags(p, with_lambda=True):
    p.add_argument("--penalty", choices=["per-component", "joint"], default="joint",
                   help="per-component: one nuclear-norm penalty per covariate; joint: one penalty on the stacked components")
    if with_lambda:
        p.add_argument("--lambda", dest="lam", type=_floats, default=[0.0],
                       help="penalty level(s) in standardized response units; a scalar, or a comma list of length p for per-component")
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian",
                   help="smoothing kernel")
    p.add_argument("--bandwidth", type=_floats, default=None,
                   help="bandwidth in standardized covariate units; scalar or comma list of length p (default: 1.06*sd*n^(-1/5) per covariate)")
    p.add_argument("--tol", type=float, default=1e-6, help="relative component change for convergence")
    p.add_argument("--max-sweeps", type=int, default=500, help="maximum backfitting sweeps")
    p.add_argument("--rank-tol", type=float, default=1e-6, help="relative singular-value cutoff for ranks")


def _add_grid_flags(p):
    p.add_argument("--lambdas", type=_floats, default=None,
                   help="comma list of lambda values (default: log grid from 1e-3 to the smallest all-zero lambda)")
    p.add_argument("--grid-size", type=int, default=30, help="size of the default lambda grid")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="cram", description="Constrained-rank additive models", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model and write it to a JSON file", formatter_class=fmt)
    _add_data(p)
    _add_fit_flags(p)
    p.add_argument("--out", required=True, help="model file to write (JSON)")
    p.add_argument("--diagnostics", default=None, help="optional JSON file for ranks, sweeps and objective trace")
    p.add_argument("--curves", default=None, help="optional directory for per-covariate curve CSVs")
    p.add_argument("--curve-points", type=int, default=100, help="grid points per exported curve")

    p = sub.add_parser("predict", help="predict responses for new covariates", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file written by 'fit'")
    p.add_argument("--data", required=True, help="CSV holding the model's covariate columns (raw scale)")
    p.add_argument("--out", required=True, help="CSV of predictions on the original response scale")

    p = sub.add_parser("cv", help="k-fold cross-validation over lambda", formatter_class=fmt)
    _add_data(p)
    _add_fit_flags(p, with_lambda=False)
    _add_grid_flags(p)
    p.add_argument("--k", type=int, default=10, help="number of folds")
    p.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    p.add_argument("--rule", choices=["min", "1se"], default="min", help="lambda selection rule")
    p.add_argument("--out", required=True, help="CSV report: lambda,cv_error,cv_se")

    p = sub.add_parser("rank-path", help="ranks and objectives along a lambda grid", formatter_class=fmt)
    _add_data(p)
    _add_fit_flags(p, with_lambda=False)
    _add_grid_flags(p)
    p.add_argument("--out", required=True, help="CSV: lambda,rank,objective")

    p = sub.add_parser("simulate", help="write the four-component synthetic dataset", formatter_class=fmt)
    p.add_argument("--n", type=int, default=150, help="sample size")
    p.add_argument("--sigma", type=float, default=1.0, help="noise standard deviation")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--x-low", type=float, default=-2.0, help="lower end of the covariate range")
    p.add_argument("--x-high", type=float, default=2.0, help="upper end of the covariate range")
    p.add_argument("--out", required=True, help="CSV with columns x1..x4,y1..y3")

    p = sub.add_parser("risk-study", help="held-out risk of the CV-tuned joint fit versus n", formatter_class=fmt)
    p.add_argument("--n-list", type=_ints, default=[50, 150], help="ascending comma list of sample sizes")
    p.add_argument("--repetitions", type=int, default=20, help="seeded repetitions per sample size")
    p.add_argument("--sigma", type=float, default=1.0, help="noise standard deviation")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--k", type=int, default=5, help="CV folds")
    p.add_argument("--grid-size", type=int, default=15, help="lambda grid size")
    p.add_argument("--bandwidth", type=float, default=0.3, help="bandwidth in standardized covariate units")
    p.add_argument("--out", required=True, help="CSV: n,mean_risk,se")

    p = sub.add_parser("certify", help="stationarity certificate of a single-covariate fit", formatter_class=fmt)
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--x-column", required=True, help="the single covariate column")
    p.add_argument("--y-columns", type=_names, required=True, help="comma list of response columns")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="penalty level (> 0)")
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian", help="smoothing kernel")
    p.add_argument("--bandwidth", type=float, default=None, help="bandwidth in standardized covariate units")
    p.add_argument("--tol", type=float, default=1e-6, help="tolerance for each condition")
    return parser


# ---------------------------------------------------------------------------


def _load(args):
    y_cols = args.y_columns
    x_cols = args.x_columns
    if x_cols is None:
        x_cols = [c for c in dio.csv_header(args.data) if c not in y_cols]
    return dio.standardize(dio.load_csv(args.data, x_cols, y_cols))


def _config(args, p, lam=None):
    penalty = args.penalty.replace("-", "_")
    if lam is None:
        lam = args.lam
        if penalty == "joint":
            if len(lam) != 1:
                raise InputError("--lambda takes a single value with the joint penalty")
            lam = lam[0]
        else:
            lam = lam[0] if len(lam) == 1 else tuple(lam)
            if isinstance(lam, tuple) and len(lam) != p:
                raise InputError(f"--lambda needs 1 or {p} values, got {len(lam)}")
    bw = args.bandwidth
    if bw is None:
        smoother = SmootherSpec(args.kernel)
    elif len(bw) == 1:
        smoother = SmootherSpec(args.kernel, bw[0])
    elif len(bw) == p:
        smoother = tuple(SmootherSpec(args.kernel, h) for h in bw)
    else:
        raise InputError(f"--bandwidth needs 1 or {p} values, got {len(bw)}")
    return FitConfig(penalty, lam, smoother, args.max_sweeps, args.tol, args.rank_tol)


def _grid(args, data, config):
    if args.lambdas is not None:
        if not args.lambdas:
            raise InputError("--lambdas is empty")
        return np.asarray(sorted(args.lambdas))
    return default_lambda_grid(data, config, size=args.grid_size)


def cmd_fit(args):
    data = _load(args)
    config = _config(args, data.p)
    model = fit(data, config)
    dio.save_model(model, args.out)
    d = model.diagnostics
    if args.diagnostics:
        dio.atomic_write(args.diagnostics, json.dumps(d.to_dict(), indent=2))
    if args.curves:
        dio.export_curves(model, args.curve_points, args.curves)
    print(f"sweeps={d.sweeps_run} converged={str(d.converged).lower()}")
    print("component_ranks=" + ",".join(str(r) for r in d.component_ranks))
    print(f"joint_rank={d.joint_rank}")
    print("objective=" + (dio.format_float(d.objective_trace[-1]) if len(d.objective_trace) else "nan"))


def cmd_predict(args):
    model = dio.load_model(args.model)
    x = dio.load_matrix(args.data, model.x_names)
    pred = predict_raw(model, x)
    dio.write_table(args.out, list(model.y_names), pred)


def cmd_cv(args):
    data = _load(args)
    config = _config(args, data.p, lam=0.0)
    grid = _grid(args, data, config)
    report = kfold_cv(data, config, grid, k=args.k, seed=args.seed, rule=args.rule)
    dio.write_table(args.out, ["lambda", "cv_error", "cv_se"], report.rows())
    print(f"selected_lambda={dio.format_float(report.selected)}")


def cmd_rank_path(args):
    data = _load(args)
    config = _config(args, data.p, lam=0.0)
    grid = _grid(args, data, config)
    path = rank_path(data, config, grid)
    dio.write_table(
        args.out, ["lambda", "rank", "objective"],
        [(dio.format_float(pt.lam), str(pt.rank), dio.format_float(pt.objective)) for pt in path],
    )


def cmd_simulate(args):
    spec = SyntheticSpec(args.n, args.sigma, args.seed, args.x_low, args.x_high)
    dio.write_dataset(args.out, generate_synthetic(spec))


def cmd_risk_study(args):
    config = FitConfig("joint", 0.0, SmootherSpec("gaussian", args.bandwidth))
    rows = risk_scaling_study(
        SyntheticSpec(seed=args.seed, sigma=args.sigma), args.n_list, args.repetitions, config,
        k=args.k, grid_size=args.grid_size,
    )
    dio.write_table(
        args.out, ["n", "mean_risk", "se"],
        [(str(r.n), dio.format_float(r.mean_risk), dio.format_float(r.se)) for r in rows],
    )


def cmd_certify(args):
    data = dio.standardize(dio.load_csv(args.data, [args.x_column], args.y_columns))
    config = FitConfig("per_component", args.lam, SmootherSpec(args.kernel, args.bandwidth), tol=1e-12,
                       max_sweeps=5)
    model = fit(data, config)
    S, _ = prepare_smoothers(data, model.config)
    P = S[0] @ model.residual_targets[0]
    M = model.components[0] + model.shrinkage[0].offset
    report = stationarity_certificate(P, M, args.lam, tol=args.tol)
    for c in report.conditions:
        print(f"{c.name}={dio.format_float(c.value)} bound={dio.format_float(c.bound)} "
              f"{'pass' if c.passed else 'fail'}")
    print(f"certificate={'pass' if report.passed else 'fail'}")


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "rank-path": cmd_rank_path,
    "simulate": cmd_simulate,
    "risk-study": cmd_risk_study,
    "certify": cmd_certify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except CramError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(PersistenceError(str(exc)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
