"""Command-line surface: fit, predict-cv, simulate, km-check.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 fitting error.
All output files are plain CSV with full-precision floats, so identical
inputs and seeds reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, EstimationError
from .gehan import DesignData, fit_aft, predict_aft
from .simulation import (
    parse_scenario_text,
    run_estimation_scenario,
    run_prediction_scenario,
    summary_csv_text,
    with_prediction_ratios,
)
from .survfit import Truncation, curve_points

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FIT = 4


@dataclass(frozen=True)
class RunConfig:
    """Everything one subcommand invocation needs."""

    command: str
    input_path: str | None
    output_path: str | None
    response: str | None
    event: str | None
    covariates: tuple[str, ...]
    log_time: bool
    truncation: Truncation
    bootstrap: int
    seed: int
    threshold: float
    scenario: str | None
    reps_override: int | None


def load_csv(
    path: str,
    response: str,
    event: str,
    covariates: tuple[str, ...],
    log_time: bool = False,
) -> DesignData:
    """Read a headered CSV into a DesignData, optionally log-transforming the response."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    wanted = [response, event, *covariates]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}; header has {header}")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    idx = {c: header.index(c) for c in wanted}

    def cell(row_values, row_no, col):
        raw = row_values[idx[col]].strip()
        try:
            return float(raw)
        except ValueError as exc:
            raise DataError(
                f"{path}: row {row_no}, column {col!r}: non-numeric value {raw!r}"
            ) from exc

    times, events, xs = [], [], []
    for row_no, values in enumerate(rows[1:], start=2):
        if not any(v.strip() for v in values):
            continue
        t = cell(values, row_no, response)
        e = cell(values, row_no, event)
        if e not in (0.0, 1.0):
            raise DataError(
                f"{path}: row {row_no}, column {event!r}: event flag must be 0 or 1, got {e:g}"
            )
        if log_time:
            if t <= 0:
                raise DataError(
                    f"{path}: row {row_no}: response must be positive for --log-time, got {t:g}"
                )
            t = math.log(t)
        times.append(t)
        events.append(bool(e))
        xs.append([cell(values, row_no, c) for c in covariates])
    return DesignData(np.asarray(times), np.asarray(events), np.asarray(xs))


def save_design_csv(path: str, data: DesignData, response: str, event: str,
                    covariates: tuple[str, ...]) -> None:
    """Write a DesignData back to CSV (full-precision floats)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([response, event, *covariates])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.time[i])), int(data.event[i])]
                + [repr(float(v)) for v in data.covariates[i]]
            )


def _truncation_from(args) -> Truncation:
    if args.mode == "maxobs":
        return Truncation.max_observed()
    return Truncation.theoretical(args.epsilon)


def _config_from(args) -> RunConfig:
    covs = tuple(args.covariates.split(",")) if getattr(args, "covariates", None) else ()
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        output_path=getattr(args, "output", None),
        response=getattr(args, "response", None),
        event=getattr(args, "event", None),
        covariates=covs,
        log_time=getattr(args, "log_time", False),
        truncation=_truncation_from(args),
        bootstrap=getattr(args, "boot", 0),
        seed=args.seed,
        threshold=getattr(args, "threshold", 0.15),
        scenario=getattr(args, "scenario", None),
        reps_override=getattr(args, "reps", None),
    )


def _load_design(cfg: RunConfig) -> DesignData:
    if not cfg.covariates:
        raise ConfigError("at least one covariate column is required (--covariates)")
    return load_csv(cfg.input_path, cfg.response, cfg.event, cfg.covariates, cfg.log_time)


def _km_curve_path(output: str) -> Path:
    out = Path(output)
    suffix = out.suffix or ".csv"
    return out.with_name(out.stem + "_km" + suffix)


def cmd_fit(cfg: RunConfig) -> int:
    data = _load_design(cfg)
    fit = fit_aft(
        data,
        truncation=cfg.truncation,
        bootstrap=cfg.bootstrap,
        seed=cfg.seed,
        tail_threshold=cfg.threshold,
    )
    terms = ["intercept", *cfg.covariates]
    estimates = [fit.intercept, *fit.slopes]
    ses = fit.bootstrap_se if fit.bootstrap_se is not None else [None] * len(terms)
    with open(cfg.output_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["term", "estimate", "bootstrap_se"])
        for term, est, se in zip(terms, estimates, ses):
            writer.writerow([term, repr(float(est)), "" if se is None else repr(float(se))])
    km_path = _km_curve_path(cfg.output_path)
    with open(km_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "cdf", "survival"])
        for t, f, s in curve_points(fit.residual_dist):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(s))])
    verdict = "adequate" if fit.tail.adequate else "NOT adequate"
    for term, est in zip(terms, estimates):
        print(f"{term:>12s}  {est:.6g}")
    print(
        f"residual KM tail {fit.tail.tail_value:.6g} -> {verdict} "
        f"(threshold {fit.tail.threshold:g})"
    )
    print(f"wrote {cfg.output_path} and {km_path}")
    return EXIT_OK


def cmd_predict_cv(cfg: RunConfig) -> int:
    data = _load_design(cfg)
    if data.n < 3:
        raise DataError("leave-one-out cross-validation needs at least 3 subjects")
    full = fit_aft(data, truncation=cfg.truncation)
    predictions = np.full(data.n, np.nan)
    failed = np.zeros(data.n, dtype=bool)
    for i in range(data.n):
        keep = np.arange(data.n) != i
        try:
            fold = fit_aft(
                data.subset(keep), truncation=cfg.truncation, init=full.slopes
            )
            predictions[i] = predict_aft(fold, data.covariates[i])
        except EstimationError:
            failed[i] = True
    with open(cfg.output_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["subject", "observed", "event", "predicted", "fold_failed"])
        for i in range(data.n):
            writer.writerow(
                [
                    i + 1,
                    repr(float(data.time[i])),
                    int(data.event[i]),
                    "" if failed[i] else repr(float(predictions[i])),
                    int(failed[i]),
                ]
            )
    ok_events = data.event & ~failed
    if ok_events.any():
        mse = float(np.mean((data.time[ok_events] - predictions[ok_events]) ** 2))
        print(f"leave-one-out MSE over {int(ok_events.sum())} events: {mse:.6g}")
    if failed.any():
        print(f"{int(failed.sum())} fold(s) failed to fit")
    print(f"wrote {cfg.output_path}")
    return EXIT_OK


def _scenario_text(name: str) -> str:
    path = Path(name)
    if path.exists():
        return path.read_text()
    stem = name if name.endswith(".cfg") else name + ".cfg"
    bundled = resources.files("aftmean").joinpath("configs", stem)
    if bundled.is_file():
        return bundled.read_text()
    raise ConfigError(f"scenario {name!r}: no such file and no bundled config")


def cmd_simulate(cfg: RunConfig) -> int:
    text = _scenario_text(cfg.scenario)
    scenario = parse_scenario_text(
        text,
        reps_override=cfg.reps_override,
        seed_override=None if cfg.seed == _SEED_DEFAULT else cfg.seed,
    )
    if scenario.study == "estimation":
        table = run_estimation_scenario(scenario)
    else:
        table = run_prediction_scenario(scenario)
        if scenario.uncensored:
            table = with_prediction_ratios(table, table)
        else:
            baseline = run_prediction_scenario(replace(scenario, censoring=None))
            table = with_prediction_ratios(table, baseline)
    csv_text = summary_csv_text(table)
    with open(cfg.output_path, "w", newline="") as handle:
        handle.write(csv_text)
    sys.stdout.write(csv_text)
    print(f"wrote {cfg.output_path}")
    return EXIT_OK


def cmd_km_check(cfg: RunConfig) -> int:
    data = _load_design(cfg)
    fit = fit_aft(data, truncation=cfg.truncation, tail_threshold=cfg.threshold)
    verdict = "adequate" if fit.tail.adequate else "NOT adequate"
    print(
        f"residual KM tail value {fit.tail.tail_value:.6g}: intercept estimation "
        f"{verdict} (threshold {fit.tail.threshold:g})"
    )
    return EXIT_OK


_SEED_DEFAULT = 20260810


def _add_model_flags(sub):
    sub.add_argument("--input", required=True, help="input CSV path")
    sub.add_argument("--response", required=True, help="response (time) column")
    sub.add_argument("--event", required=True, help="event flag column (1=event, 0=censored)")
    sub.add_argument("--covariates", required=True, help="comma-separated covariate columns")
    sub.add_argument("--log-time", dest="log_time", action="store_true",
                     help="fit on the natural log of the response")


def _add_common_flags(sub):
    sub.add_argument("--mode", choices=("maxobs", "theoretical"), default="maxobs",
                     help="residual-distribution truncation rule")
    sub.add_argument("--epsilon", type=float, default=0.125,
                     help="epsilon for --mode theoretical")
    sub.add_argument("--seed", type=int, default=_SEED_DEFAULT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aftmean",
        description="Censored linear regression with mean survival time estimation",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="fit the censored linear model")
    _add_model_flags(fit)
    _add_common_flags(fit)
    fit.add_argument("--output", required=True, help="coefficient CSV output path")
    fit.add_argument("--boot", type=int, default=0, help="bootstrap replicates for SEs")
    fit.add_argument("--threshold", type=float, default=0.15,
                     help="tail-adequacy threshold")

    cv = commands.add_parser("predict-cv", help="leave-one-out prediction report")
    _add_model_flags(cv)
    _add_common_flags(cv)
    cv.add_argument("--output", required=True, help="per-subject prediction CSV path")

    sim = commands.add_parser("simulate", help="run a Monte Carlo scenario")
    sim.add_argument("--scenario", required=True,
                     help="scenario file path or bundled config name")
    sim.add_argument("--output", required=True, help="summary CSV output path")
    sim.add_argument("--reps", type=int, default=None,
                     help="override the scenario's replication count")
    _add_common_flags(sim)

    km = commands.add_parser("km-check", help="residual KM tail diagnostic")
    _add_model_flags(km)
    _add_common_flags(km)
    km.add_argument("--threshold", type=float, default=0.15,
                    help="tail-adequacy threshold")
    return parser


_HANDLERS = {
    "fit": cmd_fit,
    "predict-cv": cmd_predict_cv,
    "simulate": cmd_simulate,
    "km-check": cmd_km_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _config_from(args)
        return _HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
