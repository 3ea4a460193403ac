import numpy as np
import pytest

from aftmean.cox import breslow, cox_partial_loglik, fit_cox, predict_cox_mean
from aftmean.distributions import CovariateLaw, ErrorLaw, SeedSpec, SubjectModel
from aftmean.errors import CoxFitError
from aftmean.gehan import DesignData, solve_gehan
from aftmean.survfit import ResidualSample, km_fit, mean_of
from conftest import random_censored_sample
from oracles import bisect_root, cox_loglik_direct, cox_score_direct


def model41_sample(seed, n, censored=False):
    model = SubjectModel(
        intercept=-0.5772156649015329,
        slopes=(1.0,),
        error=ErrorLaw.extreme_value_min(),
        covariates=(CovariateLaw.normal(0.0, 1.0),),
        censoring=None,
    )
    y, ev, x = model.sample(SeedSpec(seed).generator(), n)
    return DesignData(y, ev, x)


# ------------------------------------------------------------- loglik


def test_loglik_flat_for_constant_covariate():
    data = DesignData(
        np.array([1.0, 2.0, 3.0]), np.array([1, 1, 0]), np.full((3, 1), 4.0)
    )
    vals = [cox_partial_loglik([b], data) for b in (-2.0, 0.0, 1.0, 5.0)]
    np.testing.assert_allclose(vals, vals[0], atol=1e-12)


def test_loglik_two_subject_hand_value():
    data = DesignData(np.array([1.0, 2.0]), np.array([1, 1]), np.array([[1.0], [0.0]]))
    assert cox_partial_loglik([0.0], data) == pytest.approx(np.log(0.5), abs=1e-12)


def test_loglik_at_zero_is_risk_set_sizes(rng):
    y, ev, x = random_censored_sample(rng, 25, d=2)
    data = DesignData(y, ev, x)
    expected = -sum(np.log(np.sum(y >= y[i])) for i in range(25) if ev[i])
    assert cox_partial_loglik([0.0, 0.0], data) == pytest.approx(expected, abs=1e-10)


def test_loglik_matches_direct_sums(rng):
    for _ in range(50):
        n = int(rng.integers(3, 30))
        y, ev, x = random_censored_sample(rng, n, d=1)
        if not ev.any():
            continue
        data = DesignData(y, ev, x)
        beta = rng.normal(0.0, 1.0)
        assert cox_partial_loglik([beta], data) == pytest.approx(
            cox_loglik_direct(beta, y, ev.astype(float), x[:, 0]), abs=1e-9
        )


# ------------------------------------------------------------- fitting


def test_fit_no_events_raises():
    data = DesignData(np.arange(1.0, 5.0), np.zeros(4), np.arange(4.0)[:, None])
    with pytest.raises(CoxFitError, match="no events"):
        fit_cox(data)


def test_fit_three_subject_bisection_oracle():
    y = np.array([1.0, 2.0, 3.0])
    ev = np.array([1, 1, 1])
    x = np.array([[1.0], [0.0], [1.0]])
    data = DesignData(y, ev, x)
    fit = fit_cox(data)
    root = bisect_root(
        lambda b: cox_score_direct(b, y, ev.astype(float), x[:, 0]), -10.0, 10.0
    )
    assert fit.slopes[0] == pytest.approx(root, abs=1e-8)


def test_fit_score_norm_invariant(rng):
    for seed in range(5):
        y, ev, x = random_censored_sample(np.random.default_rng(seed), 60, d=2)
        data = DesignData(y, ev, x)
        fit = fit_cox(data)
        assert fit.report.score_norm <= 1e-8 * data.n


def test_fit_model41_slope_near_minus_one():
    data = model41_sample(314, 2000)
    fit = fit_cox(data)
    assert fit.slopes[0] == pytest.approx(-1.0, abs=0.1)


def test_fit_monotone_likelihood_divergence():
    # the covariate perfectly orders the two event times, so the slope walks
    # off to infinity; a tight bound catches it while the score is still live
    data = DesignData(np.array([1.0, 2.0]), np.array([1, 1]), np.array([[1.0], [0.0]]))
    with pytest.raises(CoxFitError, match="coordinate 0"):
        fit_cox(data, divergence_bound=5.0)


def test_shift_invariance(rng):
    y, ev, x = random_censored_sample(rng, 50, d=2)
    data = DesignData(y, ev, x)
    fit = fit_cox(data)
    c = np.array([1.5, -2.0])
    shifted = fit_cox(DesignData(y, ev, x + c))
    np.testing.assert_allclose(shifted.slopes, fit.slopes, atol=1e-7)
    # the baseline compensates: Lambda_shifted = Lambda * exp(-c'beta)
    factor = np.exp(-c @ fit.slopes)
    np.testing.assert_allclose(
        shifted.baseline.cumhaz, fit.baseline.cumhaz * factor, rtol=1e-6
    )


def test_loglik_concavity_numeric_hessian(rng):
    # negative-definite numeric Hessian at random slopes on random data
    h = 1e-5
    for _ in range(100):
        n = int(rng.integers(10, 40))
        y, ev, x = random_censored_sample(rng, n, d=2)
        if ev.sum() < 3:
            continue
        data = DesignData(y, ev, x)
        beta = rng.normal(0.0, 1.0, 2)
        hess = np.empty((2, 2))
        for a in range(2):
            for b in range(2):
                ea = np.zeros(2)
                eb = np.zeros(2)
                ea[a] = h
                eb[b] = h
                hess[a, b] = (
                    cox_partial_loglik(beta + ea + eb, data)
                    - cox_partial_loglik(beta + ea - eb, data)
                    - cox_partial_loglik(beta - ea + eb, data)
                    + cox_partial_loglik(beta - ea - eb, data)
                ) / (4 * h * h)
        eig = np.linalg.eigvalsh(0.5 * (hess + hess.T))
        assert (eig <= 1e-4).all()


# ------------------------------------------------------------- breslow


def test_breslow_zero_beta_is_nelson_aalen(rng):
    y, ev, x = random_censored_sample(rng, 30, d=1)
    data = DesignData(y, ev, x)
    base = breslow(np.zeros(1), data)
    times = np.unique(y[ev])
    na = np.cumsum([np.sum(ev & (y == t)) / np.sum(y >= t) for t in times])
    np.testing.assert_allclose(base.times, times)
    np.testing.assert_allclose(base.cumhaz, na, atol=1e-12)


def test_breslow_single_event():
    y = np.array([0.5, 0.7, 1.0, 1.2])
    ev = np.array([0, 0, 1, 0])
    data = DesignData(y, ev, np.zeros((4, 1)))
    base = breslow(np.zeros(1), data)
    np.testing.assert_allclose(base.times, [1.0])
    # two subjects still at risk at t=1.0
    np.testing.assert_allclose(base.cumhaz, [0.5])


def test_breslow_three_subject_hand_sums():
    y = np.array([1.0, 2.0, 3.0])
    ev = np.array([1, 1, 1])
    x = np.array([[1.0], [0.0], [1.0]])
    data = DesignData(y, ev, x)
    beta = 0.3
    base = breslow(np.array([beta]), data)
    e = np.exp(beta * x[:, 0])
    expected = np.cumsum([1 / e.sum(), 1 / (e[1] + e[2]), 1 / e[2]])
    np.testing.assert_allclose(base.cumhaz, expected, atol=1e-12)
    assert base.cumulative(0.5) == 0.0
    assert base.cumulative(2.5) == pytest.approx(expected[1])


# ------------------------------------------------------------- prediction


def test_predict_single_event_last_observation():
    y = np.array([0.5, 0.7, 1.0])
    ev = np.array([0, 0, 1])
    x = np.array([[0.1], [0.9], [0.4]])
    fit = fit_cox(DesignData(y, ev, x))
    for xn in (-3.0, 0.0, 2.0):
        assert predict_cox_mean(fit, np.array([xn])) == pytest.approx(1.0)


def test_predict_beta_zero_close_to_km_mean(rng):
    n = 400
    vals = rng.normal(1.0, 2.0, n)
    data = DesignData(vals, np.ones(n), np.zeros((n, 1)))
    fit = fit_cox(data)  # constant covariate: slope 0, flat likelihood
    assert fit.slopes[0] == 0.0
    km_mean = mean_of(km_fit(ResidualSample.from_arrays(vals, np.ones(n))))
    cox_mean = predict_cox_mean(fit, np.array([0.0]))
    spread = vals.max() - vals.min()
    assert abs(cox_mean - km_mean) <= 5.0 * spread / n
    assert km_mean == pytest.approx(vals.mean(), abs=1e-10)


def test_predict_vectorized(rng):
    y, ev, x = random_censored_sample(rng, 50, d=1)
    fit = fit_cox(DesignData(y, ev, x))
    xs = np.array([[-1.0], [0.0], [1.0]])
    out = predict_cox_mean(fit, xs)
    singles = [predict_cox_mean(fit, row) for row in xs]
    np.testing.assert_allclose(out, singles, atol=1e-12)


def test_cross_model_slopes_cancel_uncensored():
    for seed in (41, 42):
        data = model41_sample(seed, 2000)
        bc = fit_cox(data).slopes[0]
        bg = solve_gehan(data)[0]
        assert abs(bc + bg) <= 0.1
