"""Command-line interface: ``mprsel {fit,select,simulate,km-check}``.

Every option may also be supplied through ``--config FILE.json`` whose keys
are the long option names with dashes replaced by underscores; options given
on the command line take precedence over the file.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
Errors are written to stderr as a single line ``CODE: message``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import reports
from .data import standardize, validate, destandardize_covariance, destandardize_theta
from .diagnostics import kaplan_meier, weibull_check_points
from .errors import ConfigError, MPRError
from .penalties import Family, PenaltySpec, TuningMode, alasso_weights, expand_lambda
from .selection import DEConfig, bic_value, select_and_fit
from .simulation import TRUE_ALPHA, TRUE_BETA, SimScenario, run_scenario
from .solver import SolverConfig, fit_penalized, fit_unpenalized

_ADAPTIVE = {TuningMode.SINGLE: TuningMode.SINGLE_ADAPTIVE,
             TuningMode.SEPARATE: TuningMode.SEPARATE_ADAPTIVE}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _add_data_args(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--time-col", default="time")
    p.add_argument("--status-col", default="status", help="1 = event, 0 = censored")


def _add_model_args(p):
    p.add_argument("--scale-covs", type=_names, default=[],
                   help="comma-separated covariates for the scale (log tau) predictor")
    p.add_argument("--shape-covs", type=_names, default=None,
                   help="covariates for the shape (log gamma) predictor; defaults to --scale-covs")
    p.add_argument("--penalty", choices=[f.value for f in Family], default="none")
    p.add_argument("--tuning", choices=[m.value for m in TuningMode], default="single",
                   help="'single'/'separate' are promoted to their adaptive forms for alasso")
    p.add_argument("--scad-a", type=float, default=3.7)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--zero-tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--no-standardize", action="store_true")


def _add_de_args(p):
    p.add_argument("--lambda-bounds", type=_floats, default=[0.0, 1.0])
    p.add_argument("--de-pop", type=int, default=None, help="default 10 x number of tuning scalars")
    p.add_argument("--de-gens", type=int, default=60)
    p.add_argument("--de-f", type=float, default=0.8)
    p.add_argument("--de-cr", type=float, default=0.9)


def _add_common(p, formats=True):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--output", help="output path (stdout if omitted)")
    if formats:
        p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="mprsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("fit", help="fit at fixed tuning parameter(s)")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--lambda", dest="lam", type=_floats, default=[0.0],
                   help="tuning scalar(s); two values for separate modes")
    _add_common(p)

    p = sub.add_parser("select", help="choose tuning parameters by BIC and refit")
    _add_data_args(p)
    _add_model_args(p)
    _add_de_args(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="run the simulation study")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--censoring", type=float, default=0.25)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--true-beta", type=_floats, default=list(TRUE_BETA))
    p.add_argument("--true-alpha", type=_floats, default=list(TRUE_ALPHA))
    p.add_argument("--penalty", choices=[f.value for f in Family if f is not Family.NONE],
                   default="alasso")
    p.add_argument("--tuning", choices=[m.value for m in TuningMode], default="single")
    p.add_argument("--zero-tol", type=float, default=1e-3)
    _add_de_args(p)
    _add_common(p, formats=False)

    p = sub.add_parser("km-check", help="Kaplan-Meier log-log Weibull check")
    _add_data_args(p)
    _add_common(p)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        renamed = {("lam" if k == "lambda" else k.replace("-", "_")): v for k, v in cfg.items()}
        unknown = sorted(set(renamed) - known)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        sub.set_defaults(**renamed)
        args = parser.parse_args(argv)
        for key in ("scale_covs", "shape_covs"):
            if isinstance(getattr(args, key, None), (list, tuple)):
                setattr(args, key, _names(getattr(args, key)))
        for key in ("lam", "lambda_bounds", "true_beta", "true_alpha"):
            if hasattr(args, key):
                setattr(args, key, _floats(getattr(args, key)))
    return args


# --- helpers ---------------------------------------------------------------

def _penalty(args) -> PenaltySpec:
    family = Family(args.penalty)
    mode = TuningMode(args.tuning)
    if family is Family.ALASSO:
        mode = _ADAPTIVE.get(mode, mode)
    return PenaltySpec(family, mode, getattr(args, "scad_a", 3.7), getattr(args, "epsilon", 1e-4))


def _solver(args) -> SolverConfig:
    try:
        return SolverConfig(max_iter=getattr(args, "max_iter", 100), zero_tol=args.zero_tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _de(args, dim) -> DEConfig:
    b = args.lambda_bounds
    if len(b) != 2:
        raise ConfigError("--lambda-bounds takes exactly two numbers lo,hi")
    try:
        return DEConfig(args.de_pop, args.de_gens, args.de_f, args.de_cr,
                        [tuple(b)] * dim, rng_seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _shape_covs(args):
    return args.scale_covs if args.shape_covs is None else args.shape_covs


def _load(args):
    return reports.read_survival_csv(args.input, args.time_col, args.status_col,
                                     args.scale_covs, _shape_covs(args))


def _emit(args, text: str) -> None:
    if args.output:
        reports.write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _fit_report(command, args, data, penalty, lam_scalars, fit, theta_orig, cov_orig,
                standardized):
    se_orig = None if cov_orig is None else np.sqrt(np.clip(np.diag(cov_orig), 0.0, None))
    return {
        "schema_version": reports.SCHEMA_VERSION,
        "command": command,
        "n": data.n,
        "n_events": int(np.sum(data.delta)),
        "penalty": penalty.family.value,
        "tuning_mode": penalty.tuning_mode.value,
        "lambda": [float(v) for v in lam_scalars],
        "standardized": standardized,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "loglik": fit.loglik,
        "penalized_loglik": fit.penalized_loglik,
        "effective_df": fit.effective_df,
        "df_scale": fit.df_scale,
        "df_shape": fit.df_shape,
        "coefficients": reports.coefficient_table(fit, theta_orig, se_orig, args.scale_covs,
                                                  _shape_covs(args)),
    }


def _write_fit_report(args, report):
    if args.format == "csv":
        _emit(args, reports.write_rows_csv(report["coefficients"], reports.COEFFICIENT_COLUMNS))
    else:
        _emit(args, reports.dumps(report))


def _convergence_status(fit) -> int:
    if fit.converged:
        return 0
    sys.stderr.write(f"NOT_CONVERGED: Newton iteration stopped after {fit.n_iter} iterations; "
                     "report written with converged=false\n")
    return 4


# --- commands --------------------------------------------------------------

def cmd_fit(args) -> int:
    penalty = _penalty(args)
    config = _solver(args)
    data = _load(args)
    validate(data)
    standardized = not args.no_standardize
    if standardized:
        std, record = standardize(data)
    else:
        from .data import StandardizationRecord
        std, record = data, StandardizationRecord.identity(data.p, data.q)
    if penalty.family is Family.NONE:
        fit = fit_unpenalized(std, config=config)
        scalars = [0.0]
    else:
        scalars = args.lam
        kb = std.X.shape[1]
        if penalty.family is Family.ALASSO:
            unpen = fit_unpenalized(std, config=config)
            penalty = penalty.with_weights(*alasso_weights(unpen.theta_hat, kb))
        lam = expand_lambda(scalars, penalty, (std.p, std.q))
        fit = fit_penalized(std, penalty, lam, None, config)
    theta_orig = destandardize_theta(fit.theta_hat, record)
    cov_orig = None if fit.covariance is None else destandardize_covariance(fit.covariance, record)
    report = _fit_report("fit", args, data, penalty, scalars, fit, theta_orig, cov_orig,
                         standardized)
    _write_fit_report(args, report)
    return _convergence_status(fit)


def cmd_select(args) -> int:
    penalty = _penalty(args)
    if penalty.family is not Family.NONE and not (args.scale_covs or _shape_covs(args)):
        raise ConfigError("select with a penalty needs at least one covariate")
    config = _solver(args)
    de_config = _de(args, penalty.tuning_mode.n_scalars)
    data = _load(args)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            res = select_and_fit(data, penalty, config, de_config, map_fn=pool.map,
                                 do_standardize=not args.no_standardize)
    else:
        res = select_and_fit(data, penalty, config, de_config,
                             do_standardize=not args.no_standardize)
    fit = res.fit
    report = _fit_report("select", args, data, res.penalty, res.lambda_star, fit,
                         res.theta_original, res.covariance_original, not args.no_standardize)
    mask = fit.selected_mask
    kb = data.X.shape[1]
    report.update({
        "bic": bic_value(fit, data.n),
        "bic_trace": res.bic_trace,
        "n_inner_fits": res.n_inner_fits,
        "selected_covariates": {
            "scale": [n for n, m in zip(args.scale_covs, mask[1:kb]) if m],
            "shape": [n for n, m in zip(_shape_covs(args), mask[kb + 1:]) if m],
        },
    })
    _write_fit_report(args, report)
    return _convergence_status(fit)


def cmd_simulate(args) -> int:
    if len(args.true_beta) != len(args.true_alpha):
        raise ConfigError("--true-beta and --true-alpha must have equal length")
    family = Family(args.penalty)
    mode = TuningMode(args.tuning)
    if family is Family.ALASSO:
        mode = _ADAPTIVE.get(mode, mode)
    scenario = SimScenario(n=args.n, rho=args.rho, true_beta=tuple(args.true_beta),
                           true_alpha=tuple(args.true_alpha), target_censoring=args.censoring,
                           family=family, tuning_mode=mode, n_replicates=args.replicates,
                           rng_seed=args.seed)
    PenaltySpec(family, mode)  # surface incompatible modes as a config error
    report = run_scenario(scenario, _solver(args), _de(args, mode.n_scalars),
                          workers=max(1, args.threads))
    payload = {"schema_version": reports.SCHEMA_VERSION, "command": "simulate",
               **report.to_dict()}
    payload["scenario"] = {k: (v.value if hasattr(v, "value") else v)
                           for k, v in payload["scenario"].items()}
    text = reports.dumps(payload)
    if not args.output:
        sys.stdout.write(text)
        return 0
    stem = reports.output_stem(args.output)
    reports.write_text(stem.with_suffix(".json"), text)
    rows = reports.simulation_rows(reports._clean(payload))
    reports.write_text(stem.with_suffix(".csv"),
                       reports.write_rows_csv(rows, reports.SIMULATION_COLUMNS))
    return 0


def cmd_km_check(args) -> int:
    data = reports.read_survival_csv(args.input, args.time_col, args.status_col, [], [])
    validate(data)
    check = weibull_check_points(kaplan_meier(data.t, data.delta))
    summary = {"schema_version": reports.SCHEMA_VERSION, "command": "km-check",
               "n_points": int(check.log_t.shape[0]), "slope": check.slope,
               "intercept": check.intercept, "r_squared": check.r_squared}
    points = [dict(zip(reports.KM_COLUMNS, r)) for r in check.rows()]
    if args.format == "csv":
        _emit(args, reports.write_rows_csv(points, reports.KM_COLUMNS))
        if args.output:
            stem = reports.output_stem(args.output)
            reports.write_text(Path(f"{stem}.summary.json"), reports.dumps(summary))
        else:
            sys.stderr.write(f"slope={check.slope!r} intercept={check.intercept!r} "
                             f"r_squared={check.r_squared!r}\n")
    else:
        _emit(args, reports.dumps({**summary, "columns": list(reports.KM_COLUMNS),
                                   "points": [list(r) for r in check.rows()]}))
    return 0


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate,
            "km-check": cmd_km_check}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except MPRError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"{exc.code}: {msg}\n")
        return exc.exit_code
    except (ValueError, argparse.ArgumentTypeError) as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"{ConfigError.code}: {msg}\n")
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
