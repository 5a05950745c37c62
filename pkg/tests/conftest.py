import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seqprior.inference import PosteriorTarget, quadrature_posterior
from seqprior.model import BERNOULLI, negbin_sample
from seqprior.prior import PriorSpec
from seqprior.sampler import fixed_posterior_proposal
from seqprior.stopping import NegBin

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def ks_distance(draws, cdf):
    """One-sample Kolmogorov-Smirnov distance against an exact CDF."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


@pytest.fixture(scope="session")
def negbin_2_5():
    """NegBin record (r, N) = (2, 5) with the fixed Jeffreys prior as pi_F."""
    data = negbin_sample(2, 5)
    target = PosteriorTarget(PriorSpec("jeffreys-fixed", BERNOULLI), BERNOULLI, data)
    return {
        "rule": NegBin(2),
        "data": data,
        "target": target,
        "proposal": fixed_posterior_proposal(target),
    }


@pytest.fixture(scope="session")
def sqrt_posterior_2_5():
    rule = NegBin(2)
    target = PosteriorTarget(PriorSpec("approx-sqrt", BERNOULLI, rule), BERNOULLI, negbin_sample(2, 5))
    return quadrature_posterior(target)
