"""Command-line surface: fit, adme, ph, simulate.

Results go to the files named in flags, never to stdout; warnings go to
stderr. Exit codes: 0 success, 1 invalid input or usage, 2 numerical
failure. Every stochastic subcommand requires an explicit --seed; reruns
with the same inputs are bitwise identical.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import serialize
from .cox import fit_ph
from .errors import InputError, KmdrError, NumericalError
from .fit import GridSpec, build_grid, fit_path
from .inference import bootstrap_bands, compute_influence, estimate_adme
from .kaplan_meier import km_weights
from .links import LINK_NAMES, get_link
from .sample import load_csv, order_sample
from .simulate import ESTIMATOR_NAMES, DgpSpec, run_experiment


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _warn(message: str) -> None:
    print(f"kmdr: warning: {message}", file=sys.stderr)


def _default_threads() -> int:
    env = os.environ.get("KMDR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _add_column_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--duration-col", default="y", help="duration column (default: y)")
    parser.add_argument("--event-col", default="delta",
                        help="event-indicator column (default: delta)")
    parser.add_argument("--covariates", default=None,
                        help="comma-separated covariate columns "
                             "(default: every remaining column)")


def _resolve_covariates(path, duration_col, event_col, covariates):
    if covariates is not None:
        return [c for c in covariates.split(",") if c]
    import csv as _csv
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(_csv.reader(fh), None)
    if header is None:
        from .errors import EmptyInputError
        raise EmptyInputError(f"{path}: file is empty")
    return [c for c in header if c not in (duration_col, event_col)]


def _parse_grid_spec(args) -> GridSpec:
    if args.grid_quantiles is not None:
        parts = args.grid_quantiles.split(":")
        if len(parts) != 3:
            raise InputError("--grid-quantiles must look like lo:hi:count, e.g. 0.1:0.9:100")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise InputError(f"cannot parse --grid-quantiles {args.grid_quantiles!r}") from None
        return GridSpec(quantiles=(lo, hi, count))
    try:
        values = np.array([float(v) for v in args.grid.split(",") if v], dtype=float)
    except ValueError:
        raise InputError(f"cannot parse --grid {args.grid!r}") from None
    return GridSpec(explicit=values)


def build_parser() -> _Parser:
    parser = _Parser(prog="kmdr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the coefficient path on a CSV dataset")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--link", required=True, choices=list(LINK_NAMES))
    group = p_fit.add_mutually_exclusive_group(required=True)
    group.add_argument("--grid-quantiles", default=None, metavar="LO:HI:COUNT")
    group.add_argument("--grid", default=None, metavar="T1,T2,...")
    p_fit.add_argument("--out", required=True)
    _add_column_flags(p_fit)

    p_adme = sub.add_parser("adme", help="marginal-effect estimates and bootstrap bands")
    p_adme.add_argument("--fit", required=True, help="fit artifact from `kmdr fit`")
    p_adme.add_argument("--data", required=True)
    p_adme.add_argument("--alpha", type=float, default=0.10)
    p_adme.add_argument("--bootstrap", type=int, required=True, metavar="DRAWS")
    p_adme.add_argument("--seed", type=int, required=True)
    p_adme.add_argument("--out", required=True)
    p_adme.add_argument("--plot-csv", default=None, help="also write plot-ready CSV here")
    p_adme.add_argument("--plot-png", default=None, help="also render the band figure here")
    p_adme.add_argument("--fisher", action="store_true",
                        help="propagate coefficient uncertainty through the "
                             "information-equality matrix instead of the Hessian")
    p_adme.add_argument("--threads", type=int, default=_default_threads())
    _add_column_flags(p_adme)

    p_ph = sub.add_parser("ph", help="proportional-hazards baseline fit")
    p_ph.add_argument("--data", required=True)
    p_ph.add_argument("--out", required=True)
    _add_column_flags(p_ph)

    p_sim = sub.add_parser("simulate", help="replicated synthetic-data experiment")
    p_sim.add_argument("--dgp", type=int, required=True, choices=[1, 2, 3])
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--censoring", type=int, required=True, choices=[0, 10, 30])
    p_sim.add_argument("--reps", type=int, required=True)
    p_sim.add_argument("--estimators", default=",".join(ESTIMATOR_NAMES))
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--threads", type=int, default=_default_threads())

    return parser


def _cmd_fit(args) -> int:
    covariates = _resolve_covariates(args.data, args.duration_col, args.event_col,
                                     args.covariates)
    sample = load_csv(args.data, args.duration_col, args.event_col, covariates)
    weights = km_weights(order_sample(sample))
    grid = build_grid(weights, _parse_grid_spec(args))
    link = get_link(args.link)
    path = fit_path(weights, link, grid, warm_start=True)
    bad = int((~path.ok).sum())
    if bad:
        _warn(f"{bad} of {path.n_thresholds} thresholds did not converge or were skipped")
    columns = {"duration": args.duration_col, "event": args.event_col,
               "covariates": covariates}
    serialize.write_json(serialize.path_to_dict(path, columns=columns), args.out)
    return 0


def _cmd_adme(args) -> int:
    artifact = serialize.read_json(args.fit)
    path = serialize.path_from_dict(artifact)
    columns = artifact.get("columns", {})
    duration_col = columns.get("duration", args.duration_col)
    event_col = columns.get("event", args.event_col)
    covariates = columns.get("covariates") or _resolve_covariates(
        args.data, duration_col, event_col, args.covariates)
    sample = load_csv(args.data, duration_col, event_col, covariates)
    if sample.k != path.k:
        raise InputError(f"fit artifact has {path.k} covariates, data has {sample.k}")
    link = get_link(path.link_kind)
    weights = km_weights(order_sample(sample))
    influence = compute_influence(weights, link, path, sample, use_fisher=args.fisher)
    adme = estimate_adme(path, link, sample)
    band = bootstrap_bands(adme, influence.zeta_adme, alpha=args.alpha,
                           n_boot=args.bootstrap, seed=args.seed, grid=path.grid,
                           n_workers=args.threads)
    serialize.write_json(serialize.band_to_dict(band), args.out)
    if args.plot_csv:
        serialize.write_band_csv(band, args.plot_csv)
    if args.plot_png:
        from .plots import render_band_figure
        render_band_figure(band, args.plot_png, covariate_names=covariates)
    return 0


def _cmd_ph(args) -> int:
    covariates = _resolve_covariates(args.data, args.duration_col, args.event_col,
                                     args.covariates)
    sample = load_csv(args.data, args.duration_col, args.event_col, covariates)
    fit = fit_ph(sample)
    serialize.write_json(serialize.ph_to_dict(fit), args.out)
    if not fit.converged:
        _warn("partial-likelihood fit did not converge (possible separation)")
        return 2
    return 0


def _cmd_simulate(args) -> int:
    estimators = tuple(e for e in args.estimators.split(",") if e)
    spec = DgpSpec(dgp_id=args.dgp, n=args.n, censoring_pct=args.censoring, seed=args.seed)
    report = run_experiment(spec, reps=args.reps, estimators=estimators,
                            n_workers=args.threads)
    if report.flagged:
        _warn("more than 5% of replications failed for at least one estimator")
    serialize.write_json(report.to_dict(), args.out)
    return 0


_COMMANDS = {"fit": _cmd_fit, "adme": _cmd_adme, "ph": _cmd_ph, "simulate": _cmd_simulate}


def dispatch(argv) -> int:
    """Parse arguments and run a subcommand, mapping failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"kmdr: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"kmdr: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (KmdrError, OSError) as exc:
        print(f"kmdr: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
