import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import special, stats

from seqprior.model import (
    BERNOULLI,
    GAMMA,
    INVERSE_GAMMA,
    INVERSE_GAUSSIAN,
    NORMAL,
    TABLE1_INSTANCES,
    DomainError,
    MLEUndefinedError,
    ParamPoint,
    Sample,
    TwoParamExpFamily,
    UnsupportedOperation,
    bregman_i1,
    bregman_i2,
    fisher_info,
    fisher_info_bernoulli,
    log_density,
    log_likelihood,
    lrt_drift,
    mle,
    negbin_sample,
    rho_sq,
    rho_sq_closed_form,
    signed_roots,
)

# a representative interior point for each instance
POINTS = {
    "normal": (-0.5, 0.3),
    "inverse-gaussian": (-1.5, 2.0),
    "gamma": (-3.0, 1.5),
    "inverse-gamma": (-4.0, 0.8),
}
IDS = [m.name for m in TABLE1_INSTANCES]


# -- log density -------------------------------------------------------------


def test_normal_log_density_at_mode_is_zero():
    assert log_density(NORMAL, 0.0, NORMAL.natural(0.0, 1.0)) == pytest.approx(0.0, abs=1e-15)


def test_normal_density_with_carrier_matches_scipy():
    theta = NORMAL.natural(0.0, 1.0)
    val = math.exp(log_density(NORMAL, 1.0, theta) + NORMAL.log_carrier(1.0))
    assert val == pytest.approx(stats.norm.pdf(1.0), rel=1e-12)
    assert val == pytest.approx(0.24197, abs=5e-6)


@pytest.mark.parametrize(
    "model, frozen",
    [
        (INVERSE_GAUSSIAN, lambda mu, lam: stats.invgauss(mu / lam, scale=lam)),
        (GAMMA, lambda alpha, mu: stats.gamma(alpha, scale=mu / alpha)),
    ],
    ids=["inverse-gaussian", "gamma"],
)
def test_density_with_carrier_matches_scipy(model, frozen):
    theta = ParamPoint(*POINTS[model.name])
    dist = frozen(*model.familiar(theta))
    x = np.linspace(0.2, 4.0, 7)
    ours = np.exp(log_density(model, x, theta) + model.log_carrier(x))
    np.testing.assert_allclose(ours, dist.pdf(x), rtol=1e-10)


def test_gamma_score_has_mean_zero():
    theta = ParamPoint(*POINTS["gamma"])
    x = GAMMA.sample(theta, 100_000, np.random.default_rng(3))
    h = 1e-6
    t1, t2 = theta
    score = (log_density(GAMMA, x, (t1, t2 + h)) - log_density(GAMMA, x, (t1, t2 - h))) / (2 * h)
    se = score.std(ddof=1) / math.sqrt(score.size)
    assert abs(score.mean()) < 3 * se


def test_log_density_rejects_domain_violations():
    with pytest.raises(DomainError, match="theta1 < 0"):
        log_density(NORMAL, 0.0, (0.5, 0.0))
    with pytest.raises(DomainError, match=r"theta2=.*outside"):
        log_density(GAMMA, 1.0, (-1.0, -2.0))
    with pytest.raises(DomainError, match="support"):
        log_density(GAMMA, -1.0, (-1.0, 1.0))


# -- Fisher information -----------------------------------------------------


def test_normal_fisher_info():
    np.testing.assert_allclose(fisher_info(NORMAL, (-0.5, 7.0)), np.diag([2.0, 1.0]))


def test_bernoulli_fisher_info():
    assert fisher_info_bernoulli(0.5) == 4.0


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_fisher_entries_positive_on_grid(model):
    lo2 = 0.1 if model.theta2_domain[0] == 0 else -3.0
    for t1 in np.linspace(-8.0, -0.05, 15):
        for t2 in np.linspace(lo2, 5.0, 15):
            info = fisher_info(model, (t1, t2))
            assert np.all(np.diag(info) > 0)


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_fisher_info_matches_monte_carlo_hessian(model):
    theta = np.array(POINTS[model.name])
    x = model.sample(theta, 100_000, np.random.default_rng(11))
    h = 1e-4 * np.abs(theta)

    def ld(d):
        return log_density(model, x, theta + d)

    hess = np.empty((2, 2, x.size))
    e = np.eye(2)
    f0 = ld(np.zeros(2))
    for i in range(2):
        for j in range(2):
            if i == j:
                di = h[i] * e[i]
                hess[i, i] = (ld(di) - 2 * f0 + ld(-di)) / h[i] ** 2
            else:
                di, dj = h[i] * e[i], h[j] * e[j]
                hess[i, j] = (ld(di + dj) - ld(di - dj) - ld(dj - di) + ld(-di - dj)) / (4 * h[i] * h[j])
    info = fisher_info(model, theta)
    mean = -hess.mean(axis=2)
    se = hess.std(axis=2, ddof=1) / math.sqrt(x.size)
    # constant Hessian entries carry only rounding noise
    tol = 3 * se + 1e-6 * np.abs(info).max()
    assert np.all(np.abs(mean - info) <= tol), (mean, info, se)


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_hand_derivatives_match_finite_differences(model):
    g2 = np.linspace(0.2, 5.0, 25) if model.theta2_domain[0] == 0 else np.linspace(-4.0, 4.0, 25)
    worst = model.check_derivatives(np.linspace(-10.0, -0.1, 25), g2, rtol=1e-6)
    assert worst < 1e-6


def test_check_derivatives_catches_a_wrong_derivative():
    broken = TwoParamExpFamily.custom(
        "broken",
        g1=NORMAL.g1, g1_prime=lambda t: -0.5 / t, g1_double_prime=lambda t: 1.0 / (t * t),
        g2=NORMAL.g2, g2_prime=NORMAL.g2_prime, g2_double_prime=NORMAL.g2_double_prime,
        u1=NORMAL.u1, u2=NORMAL.u2, theta2_domain=NORMAL.theta2_domain, x_domain=NORMAL.x_domain,
    )
    with pytest.raises(AssertionError, match="derivative mismatch"):
        broken.check_derivatives([-1.0, -0.5], [0.0, 1.0])


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_theta2_is_mean_of_u2(model):
    theta = POINTS[model.name]
    u2 = model.u2(model.sample(theta, 100_000, np.random.default_rng(5)))
    se = u2.std(ddof=1) / math.sqrt(u2.size)
    assert abs(u2.mean() - theta[1]) < 3 * se


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_familiar_round_trip(model):
    theta = ParamPoint(*POINTS[model.name])
    back = model.natural(*model.familiar(theta))
    assert back == pytest.approx(theta, rel=1e-14)


def test_bernoulli_domain():
    with pytest.raises(DomainError, match="0 < p < 1"):
        BERNOULLI.check_theta(1.0)


# -- Bregman divergences ------------------------------------------------------


@given(st.floats(-50, -0.01))
def test_i1_vanishes_on_the_diagonal(w):
    assert bregman_i1(w, w, NORMAL) == 0.0


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_normal_i2_is_squared_difference(w, t):
    assert bregman_i2(w, t, NORMAL) == pytest.approx((w - t) ** 2, rel=1e-12, abs=1e-12)


def test_normal_i1_value():
    assert bregman_i1(-0.5, -1.0, NORMAL) == pytest.approx((1 - math.log(2)) / 2, abs=1e-14)
    assert bregman_i1(-0.5, -1.0, NORMAL) == pytest.approx(0.15343, abs=5e-6)


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
@given(data=st.data())
def test_bregman_nonnegative_and_zero_only_on_diagonal(model, data):
    w1, t1 = data.draw(st.floats(-20, -0.05)), data.draw(st.floats(-20, -0.05))
    if model.theta2_domain[0] == 0:
        w2, t2 = data.draw(st.floats(0.05, 20)), data.draw(st.floats(0.05, 20))
    else:
        w2, t2 = data.draw(st.floats(-20, 20)), data.draw(st.floats(-20, 20))
    i1, i2 = bregman_i1(w1, t1, model), bregman_i2(w2, t2, model)
    # rounding can leave a tiny negative residue near the diagonal
    assert i1 >= -1e-12 * (1 + abs(model.g1(t1)))
    assert i2 >= -1e-12 * (1 + abs(model.g2(t2)))
    if abs(w1 - t1) > 1e-3 * max(abs(w1), abs(t1)) and min(-w1, -t1) < 10:
        assert i1 > 0
    if abs(w2 - t2) > 1e-3:
        assert i2 > 0


# -- MLE ----------------------------------------------------------------------


def test_normal_mle_by_hand():
    est = mle(NORMAL, Sample.of(NORMAL, [-1.0, 1.0]))
    assert est.theta2 == 0.0
    assert est.theta1 == pytest.approx(-0.5, abs=1e-10)


def test_mle_undefined_for_zero_variance_sample():
    with pytest.raises(MLEUndefinedError, match="undefined"):
        mle(NORMAL, Sample.of(NORMAL, [2.0, 2.0]))


def test_gamma_mle_is_consistent():
    theta = np.array(POINTS["gamma"])
    x = GAMMA.sample(theta, 10_000, np.random.default_rng(2))
    est = np.array(mle(GAMMA, Sample.of(GAMMA, x)))
    se = np.sqrt(1.0 / np.diag(fisher_info(GAMMA, theta)) / x.size)
    assert np.all(np.abs(est - theta) < 3 * se)


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
def test_mle_solves_the_score_equation(model):
    x = model.sample(POINTS[model.name], 50, np.random.default_rng(8))
    s = Sample.of(model, x)
    t1, t2 = mle(model, s)
    assert t2 == s.u2_mean
    assert abs(model.g1_prime(t1) - s.y_n) <= 1e-10 * max(1.0, abs(model.g1_double_prime(t1)))


def test_sample_caches_y_n_exactly():
    x = np.array([0.3, -1.2, 2.5, 0.1])
    s = Sample.of(NORMAL, x)
    assert s.y_n == np.mean(x * x) - np.mean(x) ** 2
    assert s.y_n == s.u1_mean - NORMAL.g2(s.u2_mean)


def test_negbin_sample_layout():
    s = negbin_sample(3, 7)
    assert s.n == 7 and s.values.sum() == 3 and s.values[-1] == 1
    with pytest.raises(ValueError):
        negbin_sample(3, 2)


# -- signed roots -------------------------------------------------------------


def test_signed_roots_zero_at_mle():
    s = Sample.of(NORMAL, [-1.0, 1.0, 0.5])
    z = signed_roots(NORMAL, s, mle(NORMAL, s))
    assert z == pytest.approx((0.0, 0.0), abs=1e-5)


def test_signed_roots_by_hand():
    z1, z2 = signed_roots(NORMAL, Sample.of(NORMAL, [-1.0, 1.0]), (-0.5, 1.0))
    assert z1 == pytest.approx(0.0, abs=1e-5)
    assert z2 == pytest.approx(math.sqrt(2.0), rel=1e-12)


@pytest.mark.parametrize("model", TABLE1_INSTANCES, ids=IDS)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 40))
def test_signed_root_identity(model, seed, n):
    rng = np.random.default_rng(seed)
    truth = POINTS[model.name]
    s = Sample.of(model, model.sample(truth, n, rng))
    try:
        hat = mle(model, s)
    except MLEUndefinedError:
        assume(False)
    theta = (truth[0] * rng.uniform(0.5, 1.5), truth[1] * rng.uniform(0.7, 1.3))
    z1, z2 = signed_roots(model, s, theta)
    llr = log_likelihood(model, s, hat) - log_likelihood(model, s, theta)
    assert (z1 * z1 + z2 * z2) / 2 == pytest.approx(llr, rel=1e-8, abs=1e-10)


# -- rho squared ----------------------------------------------------------------


def test_rho_sq_examples():
    assert rho_sq(NORMAL.natural(0.0, 1.0)) == pytest.approx(0.0, abs=1e-15)
    assert rho_sq(NORMAL.natural(1.0, 1.0)) == pytest.approx(0.5, abs=1e-15)


def test_rho_sq_forms_agree_on_grid():
    worst = 0.0
    for mu in np.linspace(-3, 3, 100):
        for s2 in np.linspace(0.1, 10, 100):
            worst = max(worst, abs(rho_sq(NORMAL.natural(mu, s2)) - rho_sq_closed_form(mu, s2)))
    assert worst < 1e-12


def test_rho_sq_normal_only():
    with pytest.raises(UnsupportedOperation):
        rho_sq((-1.0, 1.0), GAMMA)


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_lrt_drift_is_kl_to_standard_normal(mu, s2):
    kl = (s2 + mu * mu - 1 - math.log(s2)) / 2
    assert lrt_drift(NORMAL.natural(mu, s2)) == pytest.approx(kl, rel=1e-10, abs=1e-12)


def test_gamma_h_second_derivative_against_log_gamma():
    # h'' from the trigamma form against differences of log Gamma directly
    t, d = -2.5, 1e-4
    h = lambda u: -u + u * math.log(-u) + special.gammaln(-u)  # noqa: E731
    fd = (h(t + d) - 2 * h(t) + h(t - d)) / d**2
    assert GAMMA.g1_double_prime(t) == pytest.approx(fd, rel=1e-6)
    assert INVERSE_GAMMA.g1_double_prime(t) == GAMMA.g1_double_prime(t)
