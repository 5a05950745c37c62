"""
Sampling posteriors whose prior involves E[N]
=============================================

When E_theta[N] has no closed form the posterior can still be sampled:
propose from the fixed-design posterior and correct with a ratio that only
needs simulated experiments.  Inverse binomial data make a good test bed
because the exact answers are known.
"""

import numpy as np
from scipy import stats

from seqprior.inference import PosteriorTarget, quadrature_posterior
from seqprior.model import BERNOULLI, negbin_sample
from seqprior.prior import PriorSpec
from seqprior.sampler import (
    SamplerConfig,
    brute_force_metropolis,
    chain_diagnostics,
    fixed_posterior_proposal,
    latent_variable_metropolis,
    modified_sqrt_metropolis,
)
from seqprior.stopping import NegBin

rule = NegBin(2)
data = negbin_sample(2, 5)
target = PosteriorTarget(PriorSpec("jeffreys-fixed", BERNOULLI), BERNOULLI, data)
proposal = fixed_posterior_proposal(target)

# E_p[N] * Beta(2.5, 3.5) is Beta(1.5, 3.5); E_p[sqrt N] * Beta(2.5, 3.5)
# is tabulated by quadrature.
sqrt_table = quadrature_posterior(
    PosteriorTarget(PriorSpec("approx-sqrt", BERNOULLI, rule), BERNOULLI, data)
)
oracles = {
    "brute-force": lambda x: stats.beta.cdf(x, 1.5, 3.5),
    "latent": lambda x: stats.beta.cdf(x, 1.5, 3.5),
    "sqrt": sqrt_table.cdf_at,
}
config = SamplerConfig(iterations=55_000, burn_in=5_000, seed=3)
runs = {
    "brute-force": brute_force_metropolis(proposal, rule, config),
    "latent": latent_variable_metropolis(proposal, rule, config),
    "sqrt": modified_sqrt_metropolis(proposal, rule, config),
}
for name, chain in runs.items():
    d = chain_diagnostics(chain)
    ks = stats.kstest(chain.draws, oracles[name]).statistic
    print(f"{name:12s} mean {d.mean[0]:.4f}  ESS {d.ess[0]:8.0f}  acceptance {chain.acceptance_rate:.3f}"
          f"  experiments simulated {chain.stop_simulations:>9d}  KS vs exact {ks:.4f}")

# %%
# The latent sampler needs one simulated experiment per iteration; brute
# force needs e_n_replicates per iteration.  Reversing the acceptance ratio
# targets a different distribution entirely.
flipped = latent_variable_metropolis(proposal, rule, SamplerConfig(iterations=55_000, burn_in=5_000, seed=3, literal_ratio=True))
print(f"reversed ratio: mean {np.mean(flipped.draws):.4f} vs target mean {1.5 / 5:.4f}")
