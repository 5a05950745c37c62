import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from seqprior.inference import (
    LOGIT,
    BetaPosterior,
    BoundMethod,
    PosteriorTarget,
    QuadratureTable,
    Side,
    credible_bound,
    negbin_conjugate_posterior,
    quadrature_posterior,
)
from seqprior.model import BERNOULLI, NORMAL, Sample, log_likelihood, negbin_sample
from seqprior.prior import PriorSpec
from seqprior.stopping import NegBin

LEVELS = (0.01, 0.05, 0.5, 0.95, 0.99)


def beta_target(a, b):
    return lambda p: (a - 1) * math.log(p) + (b - 1) * math.log1p(-p)


def test_conjugate_bookkeeping():
    assert negbin_conjugate_posterior("reference-sequential", 2, 5) == BetaPosterior(2.0, 3.5)
    assert negbin_conjugate_posterior("jeffreys-sequential", 2, 5) == BetaPosterior(2.0, 3.5)
    assert negbin_conjugate_posterior("jeffreys-fixed", 2, 5) == BetaPosterior(2.5, 3.5)
    with pytest.raises(ValueError, match="cannot occur before"):
        negbin_conjugate_posterior("jeffreys-fixed", 5, 4)
    with pytest.raises(ValueError, match="no conjugate"):
        negbin_conjugate_posterior("matching", 2, 5)


@pytest.mark.parametrize("kind", ["jeffreys-fixed", "reference-sequential"])
def test_conjugate_matches_quadrature_of_prior_times_likelihood(kind):
    r, n = 3, 11
    spec = PriorSpec(kind, BERNOULLI, None if kind.endswith("fixed") else NegBin(r))
    target = PosteriorTarget(spec, BERNOULLI, negbin_sample(r, n))
    table = quadrature_posterior(target)
    beta = negbin_conjugate_posterior(kind, r, n)
    for lv in LEVELS:
        assert table.quantile(lv) == pytest.approx(beta.quantile(lv), abs=1e-5)


def test_reference_posterior_mean_at_10_25():
    target = PosteriorTarget(PriorSpec("reference-sequential", BERNOULLI, NegBin(10)), BERNOULLI, negbin_sample(10, 25))
    assert quadrature_posterior(target).mean == pytest.approx(10 / 25.5, abs=1e-6)


def test_beta_2_35_quadrature_quantiles():
    table = quadrature_posterior(beta_target(2.0, 3.5))
    for lv in LEVELS:
        assert table.quantile(lv) == pytest.approx(stats.beta.ppf(lv, 2.0, 3.5), abs=1e-5)


# shapes below 1 put an integrable singularity at an end point, where the
# trapezoid rule converges too slowly for 1e-5
@given(st.floats(1.0, 30.0), st.floats(1.0, 30.0))
def test_quadrature_agrees_with_closed_form(a, b):
    table = quadrature_posterior(beta_target(a, b))
    closed = BetaPosterior(a, b)
    for lv in LEVELS:
        assert table.quantile(lv) == pytest.approx(closed.quantile(lv), abs=1e-5)


def test_uniform_target_quantile_is_identity():
    table = quadrature_posterior(lambda p: 0.0, n_grid=1024)
    for lv in (0.0, 0.05, 0.3, 0.5, 0.95, 1.0):
        assert table.quantile(lv) == pytest.approx(lv, abs=1e-12)


def test_sqrt_prior_posterior_is_proper_and_finite(sqrt_posterior_2_5):
    t = sqrt_posterior_2_5
    assert np.all(np.isfinite(t.density))
    assert float(np.sum(t.mass)) == pytest.approx(1.0, abs=1e-9)
    assert t.cdf[-1] <= 1.0 + 1e-9
    assert t.cdf[-1] + 0.5 * t.mass[-1] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("ab", [(2.0, 3.5), (10.0, 15.5), (3.0, 4.5)])
def test_grid_refinement_is_stable(ab):
    coarse = quadrature_posterior(beta_target(*ab), n_grid=4096)
    fine = quadrature_posterior(beta_target(*ab), n_grid=8192)
    for lv in LEVELS:
        assert abs(coarse.quantile(lv) - fine.quantile(lv)) < 1e-6


@given(st.floats(0.5, 20.0), st.floats(0.5, 20.0), st.integers(64, 2048))
def test_cdf_monotone_in_unit_interval(a, b, n):
    t = quadrature_posterior(beta_target(a, b), n_grid=n)
    assert np.all(np.diff(t.cdf) >= 0)
    assert t.cdf[0] >= 0 and t.cdf[-1] <= 1 + 1e-12
    assert np.all(np.diff(t.u_cdf) >= 0)


def test_non_finite_target_names_the_point():
    def bad(p):
        return math.nan if 0.49 < p < 0.51 else 0.0

    with pytest.raises(ArithmeticError, match="u=0.49"):
        quadrature_posterior(bad, n_grid=100)


def test_logit_transform_for_real_line():
    # posterior of a location with N(1.3, 0.5^2) shape
    table = quadrature_posterior(lambda x: -0.5 * ((x - 1.3) / 0.5) ** 2, transform=LOGIT)
    for lv in (0.05, 0.5, 0.95):
        assert table.quantile(lv) == pytest.approx(stats.norm.ppf(lv, 1.3, 0.5), abs=1e-4)
    assert table.mean == pytest.approx(1.3, abs=1e-4)
    with pytest.raises(NotImplementedError):
        table.cdf_at(0.0)


def test_table_csv_export():
    table = quadrature_posterior(beta_target(2.0, 3.5), n_grid=16)
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows[0] == ["coordinate", "density", "cdf"]
    assert len(rows) == 17
    back = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(back[:, 2], table.cdf)
    np.testing.assert_array_equal(back[:, 0], table.coordinate)


def test_cdf_at_interpolates():
    table = quadrature_posterior(beta_target(2.0, 2.0))
    assert table.cdf_at(0.5) == pytest.approx(0.5, abs=1e-9)
    assert table.cdf_at(0.25) == pytest.approx(stats.beta.cdf(0.25, 2, 2), abs=1e-6)


def test_credible_bound_examples():
    lo = credible_bound(BetaPosterior(1.0, 1.0), 0.05, Side.LOWER)
    assert lo.value == pytest.approx(0.05, abs=1e-10)
    assert lo.method is BoundMethod.BETA_CLOSED_FORM
    up = credible_bound(BetaPosterior(2.0, 3.5), 0.95, "upper")
    # Beta(2, 3.5) 95% quantile; 0.7514 belongs to Beta(2, 3)
    assert up.value == pytest.approx(0.70189, abs=1e-4)
    assert up.value == pytest.approx(stats.beta.ppf(0.95, 2, 3.5), abs=1e-9)
    assert credible_bound(BetaPosterior(2.0, 3.0), 0.95, "upper").value == pytest.approx(0.7514, abs=1e-3)


@given(st.floats(0.3, 50.0), st.floats(0.001, 0.49))
def test_symmetric_beta_bounds(a, alpha):
    post = BetaPosterior(a, a)
    lo = credible_bound(post, alpha, "lower").value
    up = credible_bound(post, 1 - alpha, "upper").value
    assert lo + up == pytest.approx(1.0, abs=1e-8)
    assert lo <= up


@given(st.floats(0.5, 20), st.floats(0.5, 20), st.floats(0.001, 0.49))
def test_lower_below_upper_for_every_method(a, b, alpha):
    for target in (BetaPosterior(a, b), quadrature_posterior(beta_target(a, b), n_grid=512)):
        assert credible_bound(target, alpha, "lower").value <= credible_bound(target, 1 - alpha, "upper").value


def test_bound_from_draws_and_errors():
    draws = np.random.default_rng(0).beta(2, 3.5, 20000)
    b = credible_bound(draws, 0.95, "upper")
    assert b.method is BoundMethod.MCMC
    assert b.value == pytest.approx(0.70189, abs=0.01)
    table = quadrature_posterior(beta_target(2, 3.5))
    assert credible_bound(table, 0.5, "lower").method is BoundMethod.QUADRATURE
    with pytest.raises(ValueError):
        credible_bound(draws, 1.0, "upper")
    with pytest.raises(ValueError):
        credible_bound(np.empty(0), 0.5, "upper")
    with pytest.raises(ValueError):
        credible_bound(draws, 0.5, "sideways")


def test_beta_posterior_rejects_bad_parameters():
    with pytest.raises(ValueError):
        BetaPosterior(0.0, 1.0)


def test_log_target_is_prior_plus_likelihood():
    rng = np.random.default_rng(11)
    data = Sample.of(NORMAL, rng.normal(0.4, 1.2, 17))
    spec = PriorSpec("reference-fixed", NORMAL)
    target = PosteriorTarget(spec, NORMAL, data)
    assert target.n == 17
    for _ in range(50):
        theta = (-rng.uniform(0.05, 5), rng.uniform(-3, 3))
        expect = spec.log_eval(theta) + log_likelihood(NORMAL, data, theta)
        assert target(theta) == pytest.approx(expect, abs=1e-12)

    t = PosteriorTarget(PriorSpec("jeffreys-fixed", BERNOULLI), BERNOULLI, negbin_sample(2, 5))
    for p in rng.uniform(0.01, 0.99, 50):
        own = -0.5 * math.log(p * (1 - p)) + 2 * math.log(p) + 3 * math.log1p(-p)
        assert t.log_target(p) - t.log_target(0.5) == pytest.approx(own - (-0.5 * math.log(0.25) + 5 * math.log(0.5)), abs=1e-12)


def test_table_from_log_values_with_jacobian():
    u = (np.arange(2000) + 0.5) / 2000
    x = u**2
    # density in x uniform on (0, 1); Jacobian dx/du = 2u
    table = QuadratureTable.from_log_values(u, np.zeros_like(u), coordinate=x, log_jac=np.log(2 * u), forward=lambda v: v**2)
    assert table.quantile(0.25) == pytest.approx(0.25, abs=1e-5)
    np.testing.assert_allclose(table.density[100:-100], 1.0, atol=1e-3)
