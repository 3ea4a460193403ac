"""Cox proportional hazards comparator.

Partial-likelihood slopes (Newton-Raphson with step halving, Breslow tie
handling), the Breslow baseline cumulative hazard, and mean-survival
prediction with the conditional distribution forced to one at the last
observed time.  Negative event times are fine throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CoxFitError
from .gehan import DesignData


@dataclass(frozen=True)
class BaselineHazard:
    """Breslow step estimate of the baseline cumulative hazard."""

    times: np.ndarray  # distinct event times, ascending
    cumhaz: np.ndarray

    def cumulative(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate([[0.0], self.cumhaz])
        out = padded[idx]
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoxReport:
    loglik: float
    score_norm: float
    iterations: int


@dataclass(frozen=True)
class CoxFit:
    """Fitted comparator: slopes, baseline hazard, last observed time."""

    slopes: np.ndarray
    baseline: BaselineHazard
    t_max: float
    report: CoxReport


def _descending(data: DesignData):
    order = np.argsort(-data.time, kind="stable")
    return (
        data.time[order],
        data.event[order].astype(np.float64),
        data.covariates[order],
    )


def _suffstats(beta, ys, ds, xs):
    eta = xs @ beta
    shift = float(eta.max())
    return kernels.cox_suffstats(eta, ys, ds, xs, shift)


def cox_partial_loglik(beta, data: DesignData) -> float:
    """Breslow partial log-likelihood, log-sum-exp stabilized."""
    beta = np.asarray(beta, dtype=np.float64)
    ys, ds, xs = _descending(data)
    ll, _, _ = _suffstats(beta, ys, ds, xs)
    return ll


def fit_cox(
    data: DesignData,
    tol: float = 1e-9,
    max_iter: int = 60,
    divergence_bound: float = 50.0,
) -> CoxFit:
    """Newton-Raphson partial-likelihood fit from beta = 0 with step halving.

    Convergence means the score norm drops below ``tol * n``.  A slope
    escaping ``divergence_bound`` with a non-vanishing score is reported as
    monotone-likelihood divergence, naming the coordinate.
    """
    if data.n_events() == 0:
        raise CoxFitError("no events: the partial likelihood is empty")
    ys, ds, xs = _descending(data)
    d = data.d
    beta = np.zeros(d)
    threshold = tol * data.n
    ll, score, hess = _suffstats(beta, ys, ds, xs)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(score)) <= threshold:
            break
        try:
            step = np.linalg.solve(-hess, score)
        except np.linalg.LinAlgError as exc:
            raise CoxFitError(f"singular information matrix: {exc}") from exc
        scale = 1.0
        improved = False
        for _ in range(40):
            candidate = beta + scale * step
            ll_new, score_new, hess_new = _suffstats(candidate, ys, ds, xs)
            if ll_new >= ll - 1e-13 * max(1.0, abs(ll)):
                improved = True
                break
            scale *= 0.5
        if not improved:
            break  # stalled; the score check below decides
        beta, ll, score, hess = candidate, ll_new, score_new, hess_new
        if np.max(np.abs(beta)) > divergence_bound and np.max(np.abs(score)) > threshold:
            worst = int(np.argmax(np.abs(beta)))
            raise CoxFitError(
                f"monotone-likelihood divergence in coordinate {worst}: "
                f"|beta[{worst}]| exceeded {divergence_bound} with nonvanishing score"
            )
    score_norm = float(np.max(np.abs(score)))
    if score_norm > threshold:
        raise CoxFitError(
            f"Newton did not converge in {max_iter} iterations "
            f"(score norm {score_norm:.3e})"
        )
    baseline = breslow(beta, data)
    report = CoxReport(loglik=ll, score_norm=score_norm, iterations=iterations)
    return CoxFit(beta, baseline, float(data.time.max()), report)


def breslow(beta, data: DesignData) -> BaselineHazard:
    """Baseline cumulative hazard: sum over event times of d / risk-set exp sum."""
    beta = np.asarray(beta, dtype=np.float64)
    order = np.argsort(data.time, kind="stable")
    ys = data.time[order]
    ds = data.event[order].astype(np.float64)
    eta = data.covariates[order] @ beta
    shift = float(eta.max())
    w = np.exp(eta - shift)
    suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    times, first = np.unique(ys, return_index=True)
    d_g = np.add.reduceat(ds, first)
    risk = suffix[first] * np.exp(shift)
    has_event = d_g > 0
    cumhaz = np.cumsum(d_g[has_event] / risk[has_event])
    return BaselineHazard(times[has_event], cumhaz)


def predict_cox_mean(fit: CoxFit, xnew) -> float | np.ndarray:
    """Mean of 1 - exp(-Lambda0(t) * exp(x'beta)), forced to one at t_max.

    The integral is the exact finite sum over the baseline jump points plus
    the leftover mass placed at the last observed time.
    """
    xnew = np.asarray(xnew, dtype=np.float64)
    single = xnew.ndim == 1
    xmat = xnew[None, :] if single else xnew
    eta = np.clip(xmat @ fit.slopes, -700.0, 700.0)
    keep = fit.baseline.times < fit.t_max
    t_ev = fit.baseline.times[keep]
    lam = fit.baseline.cumhaz[keep]
    if t_ev.size == 0:
        out = np.full(xmat.shape[0], fit.t_max)
        return float(out[0]) if single else out
    z = lam[None, :] * np.exp(eta)[:, None]
    cdf = -np.expm1(-z)
    masses = np.diff(np.concatenate([np.zeros((xmat.shape[0], 1)), cdf], axis=1), axis=1)
    mean = masses @ t_ev + fit.t_max * (1.0 - cdf[:, -1])
    return float(mean[0]) if single else mean
