import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqprior.model import GAMMA, NORMAL, DomainError, UnsupportedOperation
from seqprior.stopping import (
    BiasedEstimateWarning,
    BoseBoukai,
    BrownianExit,
    CapExceeded,
    FixedN,
    Method,
    NegBin,
    WoodroofeLRT,
    brownian_exit_mean,
    expected_n,
    expected_sqrt_n,
    negbin_pmf,
    negbin_sqrt_series,
    negbin_sqrt_transform,
    negbin_tail_k,
    negbin_variance,
    simulate_stop,
    simulate_stops,
    tau_limit,
)


# -- construction ---------------------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: NegBin(0),
        lambda: NegBin(1.5),
        lambda: BrownianExit(1.0, 2.0),
        lambda: BrownianExit(-1.0, 0.0),
        lambda: BoseBoukai(-1.0),
        lambda: BoseBoukai(10.0, m0=1),
        lambda: WoodroofeLRT(10.0, 2.0, 1.0),
        lambda: WoodroofeLRT(0.0, 0.5, 1.0),
        lambda: FixedN(0),
    ],
)
def test_invalid_rules_rejected(make):
    with pytest.raises(ValueError):
        make()


# -- simulation -----------------------------------------------------------------


def test_negbin_certain_success():
    assert simulate_stop(NegBin(3), 1.0, seed=0) == 3
    times, capped = simulate_stops(NegBin(3), 1.0, 100, seed=0)
    assert np.all(times == 3) and not capped.any()


def test_negbin_mean_by_simulation():
    times, _ = simulate_stops(NegBin(2), 0.5, 100_000, seed=1)
    se = times.std(ddof=1) / math.sqrt(times.size)
    assert abs(times.mean() - 4.0) < 3 * se


def test_negbin_sequential_and_batched_agree_in_distribution():
    rng = np.random.default_rng(4)
    seq = np.array([NegBin(3).simulate_sequential(0.3, rng)[0] for _ in range(20_000)])
    bat, _ = simulate_stops(NegBin(3), 0.3, 20_000, seed=5)
    k = np.arange(3, 30)
    pmf = negbin_pmf(k, 3, 0.3)
    for sample in (seq, bat):
        freq = np.array([(sample == v).mean() for v in k])
        assert np.max(np.abs(freq - pmf)) < 4 * math.sqrt(0.25 / sample.size)


def test_negbin_domain_excludes_zero():
    with pytest.raises(DomainError):
        simulate_stop(NegBin(2), 0.0)


def test_cap_reported_distinctly():
    rule = NegBin(5, n_max=6)
    with pytest.raises(CapExceeded) as info:
        simulate_stop(rule, 0.01, seed=0)
    assert info.value.cap == 6
    times, capped = simulate_stops(rule, 0.01, 50, seed=0)
    assert capped.all() and np.all(times == 6)


def test_capped_monte_carlo_is_flagged_biased():
    rule = BoseBoukai(200.0, n_max=50)
    with pytest.warns(BiasedEstimateWarning):
        en = expected_n(rule, NORMAL.natural(0.0, 1.0), replicates=20, seed=0)
    assert en.biased


RULES = [
    (NegBin(4), 0.3),
    (BrownianExit(-1.0, 2.0), 0.4),
    (BoseBoukai(30.0, m0=3), NORMAL.natural(1.0, 2.0)),
    (BoseBoukai(10.0, model=GAMMA), (-2.0, 1.5)),
    (WoodroofeLRT(20.0, 0.5, 4.0), NORMAL.natural(0.5, 1.5)),
    (FixedN(7), 0.5),
]
RULE_IDS = ["negbin", "brownian", "bose-boukai", "bose-boukai-gamma", "woodroofe", "fixed"]


@pytest.mark.parametrize("rule, theta", RULES, ids=RULE_IDS)
def test_simulated_times_respect_floor_and_cap(rule, theta):
    times, capped = simulate_stops(rule, theta, 300, seed=2)
    assert not capped.any()
    assert np.all(times >= (rule.floor if not isinstance(rule, BrownianExit) else rule.dt))
    if isinstance(rule, WoodroofeLRT):
        assert np.all(times <= rule.truncation)


@pytest.mark.parametrize("rule, theta", RULES, ids=RULE_IDS)
def test_simulation_is_deterministic_by_seed(rule, theta):
    a, _ = simulate_stops(rule, theta, 50, seed=123)
    b, _ = simulate_stops(rule, theta, 50, seed=123)
    c, _ = simulate_stops(rule, theta, 50, seed=124)
    np.testing.assert_array_equal(a, b)
    if not isinstance(rule, FixedN):
        assert not np.array_equal(a, c)


def test_bose_boukai_normal_rule_by_hand():
    # normal data: stop at the first n >= m0 with mean squared deviation < n^2 / (2 a^2)
    rule = BoseBoukai(5.0, m0=2)
    x = NORMAL.sample(NORMAL.natural(0.0, 1.0), 5000, np.random.default_rng(77))
    expect = None
    for n in range(2, x.size + 1):
        xs = x[:n]
        if np.mean((xs - xs.mean()) ** 2) < n * n / (2 * 25.0):
            expect = n
            break
    ok = rule._check(np.arange(1, x.size + 1, dtype=float), np.cumsum(x * x), np.cumsum(x))
    assert int(np.flatnonzero(ok)[0]) + 1 == expect
    rng = np.random.default_rng(77)
    assert rule.simulate(NORMAL.natural(0.0, 1.0), 1, rng)[0][0] == expect


def test_bose_boukai_limit_quick():
    theta = NORMAL.natural(0.0, 1.0)
    times, _ = simulate_stops(BoseBoukai(200.0), theta, 1000, seed=3)
    assert abs(np.mean(times / 200.0) / math.sqrt(2.0) - 1) < 0.05


# -- expectations -----------------------------------------------------------------


def test_negbin_expected_n_closed_form():
    en = expected_n(NegBin(2), 0.5)
    assert en.value == 4.0 and en.se == 0.0 and en.method is Method.CLOSED_FORM


def test_brownian_expected_values():
    assert expected_n(BrownianExit(-1.0, 1.0), 0.0).value == 1.0
    assert expected_n(BrownianExit(-1.0, 1.0), 1.0).value == pytest.approx(math.tanh(1.0), rel=1e-12)
    assert math.tanh(1.0) == pytest.approx(0.761594, abs=1e-6)


def test_brownian_small_drift_is_continuous():
    for a, b in ((-1.0, 1.0), (-0.5, 2.0)):
        near = brownian_exit_mean(2e-8, a, b)
        assert near == pytest.approx(-a * b, rel=1e-6)
        assert brownian_exit_mean(1e-9, a, b) == -a * b


@given(st.floats(-30, 30), st.floats(-5, -0.05), st.floats(0.05, 5))
def test_brownian_reflection_symmetry(theta, a, b):
    assert brownian_exit_mean(theta, a, b) == pytest.approx(brownian_exit_mean(-theta, -b, -a), rel=1e-9)


@given(st.floats(-1e4, 1e4))
def test_brownian_stable_for_large_drift(theta):
    e = brownian_exit_mean(theta, -1.0, 1.0)
    assert math.isfinite(e) and 0 < e <= 1.0 + 1e-12


def test_brownian_monte_carlo_agrees_with_hall():
    rule = BrownianExit(-1.0, 1.0)
    for theta in (-1.0, 0.5):
        mc = expected_n(rule, theta, replicates=4000, seed=7, monte_carlo=True)
        assert abs(mc.value - expected_n(rule, theta).value) < 4 * mc.se + 0.005


def test_brownian_without_bridge_is_biased_high():
    mc = expected_n(BrownianExit(-1.0, 1.0, bridge=False), 0.0, replicates=4000, seed=1, monte_carlo=True)
    assert mc.value > 1.0 + 2 * mc.se


@pytest.mark.parametrize(
    "rule, theta",
    [(NegBin(3), 0.4), (NegBin(1), 0.8), (BrownianExit(-0.5, 1.5), -0.7), (FixedN(9), 0.3)],
)
def test_monte_carlo_agrees_with_closed_form(rule, theta):
    exact = expected_n(rule, theta)
    mc = expected_n(rule, theta, replicates=20_000, seed=11, monte_carlo=True)
    assert abs(mc.value - exact.value) <= 4 * mc.se + 0.004 * exact.value
    exact_s = expected_sqrt_n(rule, theta) if not isinstance(rule, BrownianExit) else None
    if exact_s is not None:
        mc_s = expected_sqrt_n(rule, theta, replicates=20_000, seed=11, monte_carlo=True)
        assert abs(mc_s.value - exact_s.value) <= 4 * mc_s.se + 1e-12


def test_negbin_sqrt_degenerate_and_series():
    assert expected_sqrt_n(NegBin(4), 1.0).value == 2.0
    direct = sum(math.sqrt(k) * 0.5**k for k in range(1, 201))
    assert negbin_sqrt_series(1, 0.5) == pytest.approx(direct, abs=1e-12)
    assert abs(negbin_sqrt_series(1, 0.5) - 1.347) < 0.02


@given(st.integers(1, 80), st.floats(0.005, 1.0))
def test_sqrt_transform_agrees_with_series(r, p):
    assert negbin_sqrt_transform(r, p) == pytest.approx(negbin_sqrt_series(r, p), rel=1e-10)


def test_sqrt_transform_against_scipy_enumeration():
    from scipy import stats

    p = np.array([0.03, 0.2, 0.5, 0.9])
    got = negbin_sqrt_transform(7, p)
    m = np.arange(0, 20000)
    for g, q in zip(got, p):
        ref = math.fsum(stats.nbinom.pmf(m, 7, q) * np.sqrt(m + 7))
        assert g == pytest.approx(ref, rel=1e-13)
    assert negbin_sqrt_transform(4, 1.0) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(DomainError):
        negbin_sqrt_transform(2, [0.5, 0.0])


def test_negbin_r9_sqrt_gap_small():
    p = np.linspace(0.05, 0.95, 91)
    gap = [abs(negbin_sqrt_series(9, q) / 3 - math.sqrt(1 / q)) / math.sqrt(1 / q) for q in p]
    assert max(gap) < 0.05


@given(st.integers(1, 60), st.floats(0.02, 1.0))
def test_jensen_ordering_negbin(r, p):
    assert expected_sqrt_n(NegBin(r), p).value <= math.sqrt(expected_n(NegBin(r), p).value) * (1 + 1e-12)


@pytest.mark.parametrize("rule, theta", RULES, ids=RULE_IDS)
def test_jensen_ordering_monte_carlo(rule, theta):
    # same replicates for both: the inequality holds sample-wise
    with warnings.catch_warnings():
        warnings.simplefilter("error", BiasedEstimateWarning)
        es = expected_sqrt_n(rule, theta, replicates=500, seed=3, monte_carlo=True).value
        en = expected_n(rule, theta, replicates=500, seed=3, monte_carlo=True).value
    assert es <= math.sqrt(en) * (1 + 1e-12)


def test_negbin_tail_and_variance():
    k = negbin_tail_k(2, 0.1, 1e-8)
    mass_before = negbin_pmf(np.arange(2, k + 1), 2, 0.1).sum()
    assert 1 - mass_before < 1e-8
    assert negbin_variance(2, 0.5) == 4.0
    times, _ = simulate_stops(NegBin(3), 0.25, 200_000, seed=0)
    assert times.var() == pytest.approx(negbin_variance(3, 0.25), rel=0.02)


# -- tau -----------------------------------------------------------------------------


def test_tau_bose_boukai():
    assert tau_limit(BoseBoukai(10.0), NORMAL.natural(0.0, 2.0)) == pytest.approx(2.0, rel=1e-14)


def test_tau_woodroofe_bands():
    rule = WoodroofeLRT(500.0, 0.5, 4.0)
    assert tau_limit(rule, NORMAL.natural(0.0, 1.0)) == 4.0
    assert tau_limit(rule, NORMAL.natural(math.sqrt(2.0), 1.0)) == pytest.approx(1.0, rel=1e-12)
    assert tau_limit(rule, NORMAL.natural(3.0, 1.0)) == 0.5


def test_tau_woodroofe_by_simulation():
    rule = WoodroofeLRT(500.0, 0.5, 4.0)
    for theta, tau in ((NORMAL.natural(0.0, 1.0), 4.0), (NORMAL.natural(math.sqrt(2.0), 1.0), 1.0)):
        times, _ = simulate_stops(rule, theta, 40, seed=21)
        assert np.mean(times) / rule.a == pytest.approx(tau, rel=0.05)


def test_tau_unsupported_rule():
    with pytest.raises(UnsupportedOperation):
        tau_limit(NegBin(2), 0.5)
    assert tau_limit(FixedN(5), 0.5) == 1.0
