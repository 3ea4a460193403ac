"""Scenario-driven Monte Carlo engine for the estimation and prediction studies.

Each replicate draws its own RNG stream from (master seed, replicate index),
so summaries are bit-reproducible and independent of evaluation order.
Failed replicates are recorded and excluded from the summaries; more than 5%
failures aborts the run.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .cox import fit_cox, predict_cox_mean
from .distributions import CensoringLaw, CovariateLaw, ErrorLaw, SeedSpec, SubjectModel
from .errors import ConfigError, DataError, EstimationError, SimulationError
from .gehan import DesignData, fit_aft, predict_aft
from .survfit import Truncation

MAX_FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class Scenario:
    """One simulation setting: laws, truth, sample size, replication plan."""

    study: str  # "estimation" | "prediction"
    error: ErrorLaw
    covariates: tuple[CovariateLaw, ...]
    slopes: tuple[float, ...]
    intercept: float
    censoring: CensoringLaw | None
    n: int
    replications: int
    seed: int
    truncation: Truncation = Truncation.max_observed()

    def __post_init__(self):
        if self.study not in ("estimation", "prediction"):
            raise ConfigError(f"unknown study kind {self.study!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n < 2:
            raise ConfigError("sample size must be >= 2")

    @classmethod
    def estimation(
        cls,
        error: ErrorLaw,
        x2: CovariateLaw,
        tau: float,
        n: int,
        replications: int,
        seed: int,
        x1: CovariateLaw | None = None,
        censor_base: tuple[float, float] = (0.0, 5.0),
        truncation: Truncation = Truncation.max_observed(),
    ) -> "Scenario":
        """Intercept study: T = 2 + X1 + X2 + error, C ~ U(0,5) ^ tau."""
        x1 = x1 or CovariateLaw.bernoulli(0.5)
        cens = CensoringLaw.uniform(censor_base[0], censor_base[1], tau)
        return cls(
            study="estimation",
            error=error,
            covariates=(x1, x2),
            slopes=(1.0, 1.0),
            intercept=2.0 + error.mean(),
            censoring=cens,
            n=n,
            replications=replications,
            seed=seed,
            truncation=truncation,
        )

    @classmethod
    def prediction(
        cls,
        x: CovariateLaw,
        tau: float | None,
        n: int,
        replications: int,
        seed: int,
        censor_base: tuple[float, float] = (-3.0, 3.0),
        truncation: Truncation = Truncation.max_observed(),
    ) -> "Scenario":
        """Prediction study: T = X + e0 (min-extreme-value), C ~ U(-3,3) ^ tau.

        ``tau = None`` is the no-censoring row of the comparison table.
        """
        error = ErrorLaw.extreme_value_min()
        cens = (
            None
            if tau is None
            else CensoringLaw.uniform(censor_base[0], censor_base[1], tau)
        )
        return cls(
            study="prediction",
            error=error,
            covariates=(x,),
            slopes=(1.0,),
            intercept=error.mean(),
            censoring=cens,
            n=n,
            replications=replications,
            seed=seed,
            truncation=truncation,
        )

    def subject_model(self) -> SubjectModel:
        return SubjectModel(
            intercept=self.intercept,
            slopes=self.slopes,
            error=self.error,
            covariates=self.covariates,
            censoring=self.censoring,
        )

    @property
    def uncensored(self) -> bool:
        return self.censoring is None or self.censoring.is_none


@dataclass(frozen=True)
class ReplicationResult:
    """Per-replicate estimates or prediction errors, plus the failure cause."""

    estimates: np.ndarray | None
    censoring_rate: float
    failed: bool = False
    error: str | None = None


@dataclass(frozen=True)
class OlsFit:
    intercept: float
    slopes: np.ndarray


@dataclass(frozen=True)
class SummaryTable:
    """Aggregated replication statistics for one scenario."""

    study: str
    parameters: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    censoring_rate: float
    n_replications: int
    n_failed: int
    ratios: np.ndarray | None = None


def mse_p(predictions, truths) -> float:
    """Mean squared prediction error against true failure times."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise DataError("predictions and truths must be equal-length vectors")
    if predictions.size == 0:
        raise DataError("empty prediction vector")
    return float(np.mean((truths - predictions) ** 2))


def censoring_rate(data: DesignData) -> float:
    """Fraction of censored subjects."""
    return float(1.0 - data.event.mean())


def ols_fit(data: DesignData) -> OlsFit:
    """Ordinary least squares on uncensored data (normal-equations solution)."""
    if not data.event.all():
        raise DataError("OLS baseline requires fully uncensored data")
    a = np.column_stack([np.ones(data.n), data.covariates])
    coef, _, rank, _ = np.linalg.lstsq(a, data.time, rcond=None)
    if rank < a.shape[1]:
        raise DataError("rank-deficient design matrix")
    return OlsFit(float(coef[0]), coef[1:])


def _aggregate(scenario: Scenario, parameters, results) -> SummaryTable:
    failed = [r for r in results if r.failed]
    if len(failed) > MAX_FAILURE_FRACTION * scenario.replications:
        causes = {r.error for r in failed}
        raise SimulationError(
            f"{len(failed)} of {scenario.replications} replicates failed "
            f"(cap 5%); causes: {sorted(causes)}"
        )
    good = np.vstack([r.estimates for r in results if not r.failed])
    means = good.mean(axis=0)
    if good.shape[0] > 1:
        sds = good.std(axis=0, ddof=1)
    else:
        sds = np.full(good.shape[1], np.nan)
    return SummaryTable(
        study=scenario.study,
        parameters=tuple(parameters),
        means=means,
        sds=sds,
        censoring_rate=float(np.mean([r.censoring_rate for r in results])),
        n_replications=scenario.replications,
        n_failed=len(failed),
    )


def run_estimation_scenario(scenario: Scenario) -> SummaryTable:
    """Monte Carlo over fits of the intercept-study model; means and SDs."""
    if scenario.study != "estimation":
        raise ConfigError("scenario is not an estimation study")
    model = scenario.subject_model()
    results = []
    for r in range(scenario.replications):
        rng = SeedSpec(scenario.seed, r).generator()
        y, ev, x = model.sample(rng, scenario.n)
        rate = 1.0 - float(ev.mean())
        try:
            fit = fit_aft(DesignData(y, ev, x), truncation=scenario.truncation)
            est = np.concatenate([[fit.intercept], fit.slopes])
            results.append(ReplicationResult(est, rate))
        except EstimationError as exc:
            results.append(ReplicationResult(None, rate, failed=True, error=str(exc)))
    names = ("alpha",) + tuple(f"beta{k + 1}" for k in range(len(scenario.slopes)))
    return _aggregate(scenario, names, results)


def run_prediction_scenario(scenario: Scenario) -> SummaryTable:
    """Monte Carlo prediction comparison: per-replicate test-set MSEs.

    Each replicate draws an independent training set (censored) and test set
    (true failure times), fits the linear and Cox models on the training
    data, and records both MSEs; the OLS baseline is added when the scenario
    is censoring-free.  Ratios against the no-censoring table are attached
    separately by :func:`with_prediction_ratios`.
    """
    if scenario.study != "prediction":
        raise ConfigError("scenario is not a prediction study")
    model = scenario.subject_model()
    with_ols = scenario.uncensored
    names = ("linear", "cox") + (("ols",) if with_ols else ())
    results = []
    for r in range(scenario.replications):
        rng = SeedSpec(scenario.seed, r).generator()
        y, ev, x = model.sample(rng, scenario.n)
        t_star, x_star = model.sample_true(rng, scenario.n)
        rate = 1.0 - float(ev.mean())
        try:
            data = DesignData(y, ev, x)
            aft = fit_aft(data, truncation=scenario.truncation)
            mse_lin = mse_p(predict_aft(aft, x_star), t_star)
            cox = fit_cox(data)
            mse_cox = mse_p(predict_cox_mean(cox, x_star), t_star)
            mses = [mse_lin, mse_cox]
            if with_ols:
                ols = ols_fit(data)
                mses.append(mse_p(ols.intercept + x_star @ ols.slopes, t_star))
            results.append(ReplicationResult(np.asarray(mses), rate))
        except EstimationError as exc:
            results.append(ReplicationResult(None, rate, failed=True, error=str(exc)))
    return _aggregate(scenario, names, results)


def with_prediction_ratios(table: SummaryTable, baseline: SummaryTable) -> SummaryTable:
    """Attach mean-MSE ratios (no-censoring mean over this table's mean)."""
    if table.study != "prediction" or baseline.study != "prediction":
        raise ConfigError("ratios are defined for prediction tables only")
    base = dict(zip(baseline.parameters, baseline.means))
    ratios = np.array(
        [base.get(p, np.nan) / m for p, m in zip(table.parameters, table.means)]
    )
    return replace(table, ratios=ratios)


# ---------------------------------------------------------------------------
# Flat key=value scenario files and the summary CSV layouts.

_ERROR_FACTORIES = {
    "normal": lambda p: ErrorLaw.normal(*p),
    "gumbel": lambda p: ErrorLaw.gumbel_max(*p),
    "laplace": lambda p: ErrorLaw.laplace(*p),
    "logistic": lambda p: ErrorLaw.logistic(*p),
    "t": lambda p: ErrorLaw.student_t(*p),
    "evmin": lambda p: ErrorLaw.extreme_value_min(),
}

_COVARIATE_FACTORIES = {
    "bernoulli": lambda p: CovariateLaw.bernoulli(*p),
    "normal": lambda p: CovariateLaw.normal(*p),
    "uniform": lambda p: CovariateLaw.uniform(*p),
}


def _parse_law(text: str, factories, what: str):
    text = text.strip()
    if "(" in text:
        name, _, rest = text.partition("(")
        rest = rest.rstrip()
        if not rest.endswith(")"):
            raise ConfigError(f"malformed {what} law {text!r}")
        args = rest[:-1].strip()
        params = tuple(float(v) for v in args.split(",")) if args else ()
    else:
        name, params = text, ()
    name = name.strip().lower()
    if name not in factories:
        raise ConfigError(f"unknown {what} law {name!r}")
    try:
        return factories[name](params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {what} law {text!r}") from exc


def parse_error_law(text: str) -> ErrorLaw:
    return _parse_law(text, _ERROR_FACTORIES, "error")


def parse_covariate_law(text: str) -> CovariateLaw:
    return _parse_law(text, _COVARIATE_FACTORIES, "covariate")


_SCENARIO_KEYS = {
    "study", "error", "x", "x1", "x2", "cens", "tau", "n", "reps", "seed",
    "mode", "epsilon",
}


def parse_scenario_text(text: str, *, reps_override: int | None = None,
                        seed_override: int | None = None) -> Scenario:
    """Build a Scenario from flat ``key = value`` text (# starts a comment)."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"scenario line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"scenario line {lineno}: unknown key {key!r}")
        entries[key] = value.strip()

    def need(key):
        if key not in entries:
            raise ConfigError(f"scenario file is missing required key {key!r}")
        return entries[key]

    study = need("study").lower()
    n = int(need("n"))
    reps = reps_override if reps_override is not None else int(need("reps"))
    seed = seed_override if seed_override is not None else int(need("seed"))
    mode = entries.get("mode", "maxobs").lower()
    if mode == "maxobs":
        truncation = Truncation.max_observed()
    elif mode == "theoretical":
        truncation = Truncation.theoretical(float(entries.get("epsilon", 0.125)))
    else:
        raise ConfigError(f"unknown truncation mode {mode!r}")

    tau_text = entries.get("tau", "inf").lower()
    tau = None if tau_text == "none" else float(tau_text)

    if study == "estimation":
        error = parse_error_law(need("error"))
        x2 = parse_covariate_law(need("x2"))
        x1 = parse_covariate_law(entries["x1"]) if "x1" in entries else None
        if tau is None:
            tau = math.inf
        base = (0.0, 5.0)
        if "cens" in entries and entries["cens"].lower() != "none":
            law = _parse_law(entries["cens"], _COVARIATE_FACTORIES, "censoring")
            if law.kind != "uniform":
                raise ConfigError("censoring base must be a uniform law")
            base = law.params
        return Scenario.estimation(
            error, x2, tau, n, reps, seed, x1=x1, censor_base=base, truncation=truncation
        )
    if study == "prediction":
        x = parse_covariate_law(need("x"))
        base = (-3.0, 3.0)
        if entries.get("cens", "").lower() == "none":
            tau = None
        elif "cens" in entries:
            law = _parse_law(entries["cens"], _COVARIATE_FACTORIES, "censoring")
            if law.kind != "uniform":
                raise ConfigError("censoring base must be a uniform law")
            base = law.params
        return Scenario.prediction(
            x, tau, n, reps, seed, censor_base=base, truncation=truncation
        )
    raise ConfigError(f"unknown study {study!r}")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def summary_csv_text(table: SummaryTable) -> str:
    """SummaryTable as CSV, matching the reproduction table layouts."""
    out = io.StringIO()
    if table.study == "estimation":
        out.write("parameter,mean,sd,censoring_rate,n_replications,n_failed\n")
        for name, mean, sd in zip(table.parameters, table.means, table.sds):
            out.write(
                f"{name},{_fmt(mean)},{_fmt(sd)},{_fmt(table.censoring_rate)},"
                f"{table.n_replications},{table.n_failed}\n"
            )
    else:
        out.write("model,ratio,mse,censoring_rate,n_replications,n_failed\n")
        ratios = table.ratios if table.ratios is not None else [None] * len(table.means)
        for name, ratio, mean in zip(table.parameters, ratios, table.means):
            out.write(
                f"{name},{_fmt(ratio)},{_fmt(mean)},{_fmt(table.censoring_rate)},"
                f"{table.n_replications},{table.n_failed}\n"
            )
    return out.getvalue()
