"""Gehan-weighted rank regression for censored linear models.

The slope estimate minimizes the convex piecewise-linear objective

    L(beta) = n**-2 * sum_i sum_j  event_i * max(e_j(beta) - e_i(beta), 0),

whose (almost-everywhere) gradient is the rank-based estimating function

    score(beta) = n**-2 * sum_i sum_j  event_i * 1(e_j >= e_i) * (x_i - x_j).

The intercept is the mean of the Kaplan-Meier estimate fitted to the
residuals at the estimated slopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .distributions import SeedSpec
from .errors import DataError, EstimationError, GehanSolverError
from .survfit import (
    ResidualSample,
    StepDistribution,
    TailDiagnostic,
    Truncation,
    km_fit,
    mean_of,
    tail_diagnostic,
)

_SLACK_REL = 1e-10  # relative slack when locating zero crossings of the profile


@dataclass(frozen=True)
class DesignData:
    """A right-censored regression sample: times, event flags, covariate matrix."""

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        time = np.asarray(self.time, dtype=np.float64)
        event = np.asarray(self.event)
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if time.ndim != 1 or event.ndim != 1 or x.ndim != 2:
            raise DataError("time and event must be vectors, covariates a matrix")
        n = time.shape[0]
        if n < 1 or event.shape[0] != n or x.shape[0] != n:
            raise DataError("time, event, and covariate lengths disagree")
        if x.shape[1] < 1:
            raise DataError("at least one covariate column is required")
        if event.dtype != bool:
            vals = np.unique(event)
            if not np.isin(vals, (0, 1)).all():
                raise DataError(f"event flags must be 0/1, got values {vals!r}")
            event = event.astype(bool)
        if not np.isfinite(time).all() or not np.isfinite(x).all():
            raise DataError("times and covariates must be finite (no missing entries)")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "covariates", x)

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, idx) -> "DesignData":
        return DesignData(self.time[idx], self.event[idx], self.covariates[idx])


@dataclass(frozen=True)
class GehanScore:
    """Estimating-function value plus the per-subject risk-set averages behind it."""

    value: np.ndarray
    h1: np.ndarray  # at-risk fraction at each subject's own residual
    h2: np.ndarray  # covariate sum over that risk set, divided by n


@dataclass(frozen=True)
class SolverReport:
    """What the slope solver did and how well the score vanished.

    The score here is evaluated with machine-precision near-tie grouping
    (see ``_tie_safe_score``); ``score_ratio`` is the max over coordinates
    of |score| divided by the acceptance bound (coordinate range / n).
    """

    loss: float
    score_norm: float
    score_ratio: float
    iterations: int
    converged: bool
    method: str


@dataclass(frozen=True)
class AftFit:
    """Fitted censored linear model: slopes, KM-mean intercept, diagnostics."""

    intercept: float
    slopes: np.ndarray
    bootstrap_se: np.ndarray | None
    residual_dist: StepDistribution
    tail: TailDiagnostic
    report: SolverReport


def residuals(data: DesignData, beta) -> np.ndarray:
    return data.time - data.covariates @ np.asarray(beta, dtype=np.float64)


def _sorted_parts(data: DesignData, beta):
    eps = residuals(data, beta)
    order = np.argsort(eps, kind="stable")
    return eps[order], data.event[order].astype(np.float64), data.covariates[order]


def gehan_loss(beta, data: DesignData) -> float:
    """Convex rank objective at ``beta``."""
    es, ds, _ = _sorted_parts(data, beta)
    return kernels.gehan_loss_sorted(es, ds) / data.n**2


def gehan_score(beta, data: DesignData) -> np.ndarray:
    """Rank-based estimating function at ``beta`` (O(n log n) path)."""
    es, ds, xs = _sorted_parts(data, beta)
    return kernels.gehan_score_sorted(es, ds, xs) / data.n**2


def gehan_score_detail(beta, data: DesignData) -> GehanScore:
    """Score together with the risk-set evaluations at each subject's residual."""
    n, d = data.n, data.d
    eps = residuals(data, beta)
    order = np.argsort(eps, kind="stable")
    es = eps[order]
    xs = data.covariates[order]
    lo = np.searchsorted(es, es, side="left")
    suffix = np.vstack([np.cumsum(xs[::-1], axis=0)[::-1], np.zeros((1, d))])
    h1_sorted = (n - lo) / n
    h2_sorted = suffix[lo] / n
    h1 = np.empty(n)
    h2 = np.empty((n, d))
    h1[order] = h1_sorted
    h2[order] = h2_sorted
    ds = data.event.astype(np.float64)
    value = (ds[:, None] * (h1[:, None] * data.covariates - h2)).sum(axis=0) / n
    return GehanScore(value, h1, h2)


def _profile_minimum(bp, w, s0):
    """Minimize a piecewise-linear convex profile given its kink structure.

    Returns (minimizer, kinks) treating near-zero derivative stretches as
    flat intervals (midpoint rule).  Raises on unbounded descent.
    """
    order = np.argsort(bp, kind="stable")
    bp = bp[order]
    w = w[order]
    cum = s0 + np.cumsum(w)
    slack = _SLACK_REL * float(np.sum(w))
    if s0 >= -slack:
        raise GehanSolverError(
            "unbounded direction: loss nonincreasing toward -inf",
            best=np.array([bp[0]]),
        )
    k = int(np.searchsorted(cum, -slack, side="left"))
    if k >= bp.size:
        raise GehanSolverError(
            "unbounded direction: loss nonincreasing toward +inf",
            best=np.array([bp[-1]]),
        )
    if cum[k] > slack:
        return float(bp[k]), bp.size
    k2 = k
    while k2 + 1 < bp.size and cum[k2 + 1] <= slack:
        k2 += 1
    if k2 + 1 >= bp.size:
        raise GehanSolverError(
            "unbounded direction: loss flat toward +inf",
            best=np.array([bp[k]]),
        )
    return float(0.5 * (bp[k] + bp[k2 + 1])), bp.size


def _solve_coordinate(y, delta, x):
    """Exact minimizer along one coordinate; None when the profile is flat."""
    bp, w, s0 = kernels.d1_pair_profile(y, delta, x)
    if bp.size == 0:
        return None, 0
    return _profile_minimum(bp, w, s0)


def _ols_event_slopes(data: DesignData) -> np.ndarray | None:
    ev = data.event
    if ev.sum() < data.d + 1:
        return None
    a = np.column_stack([np.ones(int(ev.sum())), data.covariates[ev]])
    coef, _, rank, _ = np.linalg.lstsq(a, data.time[ev], rcond=None)
    if rank < a.shape[1]:
        return None
    return coef[1:]


def _score_bounds(data: DesignData) -> np.ndarray:
    spread = data.covariates.max(axis=0) - data.covariates.min(axis=0)
    return spread / data.n


def _tie_safe_score(beta, data: DesignData) -> np.ndarray:
    """Score with residuals snapped at machine precision.

    Exactly-fitting data leaves residual ties broken only by rounding noise,
    which turns the literal score into an arbitrary subgradient; grouping
    near-ties restores the antisymmetric cancellation the mathematics has.
    Used for the convergence check only.
    """
    eps = residuals(data, beta)
    scale = max(
        1.0,
        float(np.max(np.abs(data.time))),
        float(np.max(np.abs(data.covariates @ beta))),
    )
    quantum = 64.0 * np.finfo(np.float64).eps * scale
    snapped = np.round(eps / quantum) * quantum
    order = np.argsort(snapped, kind="stable")
    es = snapped[order]
    ds = data.event[order].astype(np.float64)
    xs = data.covariates[order]
    return kernels.gehan_score_sorted(es, ds, xs) / data.n**2


def _solve_with_report(data: DesignData, init, tol) -> tuple[np.ndarray, SolverReport]:
    if data.n_events() == 0:
        raise GehanSolverError("no events: the rank objective is identically zero")
    delta = data.event.astype(np.float64)
    y = data.time
    x = data.covariates
    d = data.d

    if d == 1:
        beta1, kinks = _solve_coordinate(y, delta, x[:, 0])
        if beta1 is None:
            raise GehanSolverError(
                "covariate constant across all informative pairs; slope not identified"
            )
        beta = np.array([beta1])
        method = "exact-scan"
        iterations = kinks
    else:
        starts = [np.zeros(d) if init is None else np.asarray(init, dtype=np.float64)]
        ols = _ols_event_slopes(data)
        if ols is not None:
            starts += [ols, ols + 1.0, ols - 1.0]
        else:
            starts += [np.ones(d), -np.ones(d)]

        loss = lambda b: gehan_loss(b, data)
        iterations = 0
        candidates = []
        for start in starts:
            nm = minimize(
                loss,
                start,
                method="Nelder-Mead",
                options=dict(xatol=tol, fatol=1e-12, maxiter=200 * d, maxfev=200 * d),
            )
            iterations += nm.nit
            candidates.append(nm.x)
        best = min(candidates, key=loss)
        best, sweeps = _coordinate_descent(y, delta, x, best.copy(), tol, max_sweeps=8)
        iterations += sweeps
        beta = best
        method = "nelder-mead+coordinate"

    def check(beta_hat):
        score = _tie_safe_score(beta_hat, data)
        bounds = _score_bounds(data)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(bounds > 0, np.abs(score) / bounds, np.abs(score) > 1e-300)
        return float(np.max(np.abs(score))), float(np.max(ratios))

    score_norm, ratio = check(beta)
    if ratio > 1.0 + 1e-9 and d > 1:
        # escalate: full coordinate descent from every start, then re-polish
        for start in starts:
            cand, sweeps = _coordinate_descent(y, delta, x, start.copy(), tol)
            iterations += sweeps
            candidates.append(cand)
        best = min(candidates + [beta], key=loss)
        nm = minimize(
            loss,
            best,
            method="Nelder-Mead",
            options=dict(xatol=tol * 1e-2, fatol=1e-14, maxiter=400 * d, maxfev=400 * d),
        )
        iterations += nm.nit
        best = nm.x if nm.fun < loss(best) else best
        beta, sweeps = _coordinate_descent(y, delta, x, np.asarray(best).copy(), tol)
        iterations += sweeps
        score_norm, ratio = check(beta)

    converged = ratio <= 1.0 + 1e-9
    report = SolverReport(
        loss=gehan_loss(beta, data),
        score_norm=score_norm,
        score_ratio=ratio,
        iterations=int(iterations),
        converged=converged,
        method=method,
    )
    if not converged:
        raise GehanSolverError(
            f"score norm {report.score_norm:.3e} exceeds the n**-1 acceptance bound",
            best=beta,
        )
    return beta, report


def _coordinate_descent(y, delta, x, beta, tol, max_sweeps=20):
    d = beta.shape[0]
    for sweep in range(max_sweeps):
        shift = 0.0
        for k in range(d):
            others = np.delete(np.arange(d), k)
            y_adj = y - x[:, others] @ beta[others]
            bk, _ = _solve_coordinate(y_adj, delta, x[:, k])
            if bk is None:
                continue  # flat coordinate: leave as-is
            shift = max(shift, abs(bk - beta[k]))
            beta[k] = bk
        if shift <= tol:
            break
    return beta, sweep + 1


def solve_gehan(data: DesignData, init=None, tol: float = 1e-6) -> np.ndarray:
    """Slope estimate minimizing the Gehan rank objective.

    ``d = 1`` is solved exactly by scanning the kinks of the piecewise-linear
    profile (midpoint of a flat bottom); higher dimensions run deterministic
    multi-start coordinate descent with a Nelder-Mead polish.  The result must
    drive the estimating function below the discreteness-scale bound
    (coordinate range / n) or a :class:`GehanSolverError` is raised carrying
    the best iterate.
    """
    beta, _ = _solve_with_report(data, init, tol)
    return beta


def fit_aft(
    data: DesignData,
    *,
    truncation: Truncation = Truncation.max_observed(),
    init=None,
    tol: float = 1e-6,
    bootstrap: int = 0,
    seed: int = 0,
    tail_threshold: float = 0.15,
) -> AftFit:
    """Full pipeline: rank-based slopes, then KM-mean intercept on the residuals."""
    beta, report = _solve_with_report(data, init, tol)
    sample = ResidualSample.from_arrays(residuals(data, beta), data.event)
    dist = km_fit(sample, truncation)
    alpha = mean_of(dist)
    tail = tail_diagnostic(dist, tail_threshold)
    se = None
    if bootstrap:
        se = bootstrap_se(
            data, bootstrap, seed, init=beta, truncation=truncation, tol=tol
        )
    return AftFit(alpha, beta, se, dist, tail, report)


def bootstrap_se(
    data: DesignData,
    replicates: int,
    seed: int = 0,
    *,
    init=None,
    truncation: Truncation = Truncation.max_observed(),
    tol: float = 1e-6,
) -> np.ndarray:
    """Nonparametric bootstrap standard errors for (intercept, slopes).

    Resamples subjects with replacement; resamples whose fit fails are
    dropped, and more than 20% failures aborts with an error.
    """
    if replicates < 2:
        raise GehanSolverError("bootstrap needs at least 2 replicates")
    if init is None:
        init, _ = _solve_with_report(data, None, tol)
    estimates = []
    failures = 0
    for b in range(replicates):
        rng = SeedSpec(seed, b).generator()
        idx = rng.integers(0, data.n, data.n)
        sub = data.subset(idx)
        try:
            beta, _ = _solve_with_report(sub, init, tol)
            sample = ResidualSample.from_arrays(residuals(sub, beta), sub.event)
            alpha = mean_of(km_fit(sample, truncation))
        except EstimationError:
            failures += 1
            continue
        estimates.append(np.concatenate([[alpha], beta]))
    if failures > 0.2 * replicates:
        raise GehanSolverError(
            f"bootstrap failed on {failures} of {replicates} resamples (>20%)"
        )
    return np.std(np.vstack(estimates), axis=0, ddof=1)


def predict_aft(fit: AftFit, xnew) -> float | np.ndarray:
    """Predicted mean failure time ``intercept + x'slopes``."""
    xnew = np.asarray(xnew, dtype=np.float64)
    if xnew.ndim == 1:
        return float(fit.intercept + xnew @ fit.slopes)
    return fit.intercept + xnew @ fit.slopes
