"""
Fixed-design and sequential objective priors
============================================

Fixed-design Jeffreys and reference priors depend on the model alone.
Their sequential counterparts multiply in ``E_theta[N]`` (or factors of
it), so the same data give different posteriors under different designs.
"""

import numpy as np

from seqprior.model import BERNOULLI, NORMAL
from seqprior.prior import PriorSpec, approx_prior_sqrt, to_familiar
from seqprior.stopping import BoseBoukai, NegBin

# %%
# Bernoulli trials.  With a fixed number of trials the Jeffreys prior is
# p^(-1/2) (1 - p)^(-1/2).  Under inverse binomial sampling E_p[N] = r/p,
# which adds a further factor p^(-1/2).
fixed = PriorSpec("jeffreys-fixed", BERNOULLI)
seq = PriorSpec("jeffreys-sequential", BERNOULLI, NegBin(2))
approx = PriorSpec("approx-sqrt", BERNOULLI, NegBin(2))
print("   p   log pi_J   log pi*_R   log pi_M")
for p in (0.1, 0.3, 0.5, 0.7, 0.9):
    print(f"{p:4.1f}  {fixed(p):9.4f}  {seq(p):10.4f}  {approx(p):9.4f}")

# %%
# The E[sqrt N] weight used by the sqrt-modified sampler is close to
# sqrt(E N) even for small r.
for r in (1, 9):
    p = np.linspace(0.05, 0.95, 7)
    ratio = np.exp([approx_prior_sqrt(NegBin(r), q) for q in p]) * np.sqrt(p)
    print(f"r={r}: E sqrt(N/r) / sqrt(E N/r) = {np.round(ratio, 4)}")

# %%
# Normal model in (mu, sigma^2).  Fitting log prior against log sigma^2
# at fixed mu recovers the power of sigma^2 for each construction.
s2 = np.geomspace(0.2, 5.0, 15)


def power(spec):
    vals = [to_familiar(NORMAL, spec(NORMAL.natural(0.5, v)), NORMAL.natural(0.5, v)) for v in s2]
    return np.polyfit(np.log(s2), vals, 1)[0]


for kind in ("jeffreys-fixed", "reference-fixed", "fact31-jeffreys", "fact31-reference"):
    print(f"{kind:18s} sigma^2 power {power(PriorSpec(kind, NORMAL)):+.4f}")

# %%
# The sequential Jeffreys prior under the variance-based stopping rule, with
# E[N] estimated by simulation at each point, approaches the asymptotic form
# as a grows.
spec = PriorSpec("jeffreys-sequential", NORMAL, BoseBoukai(200.0), replicates=300, seed=1)
print(f"bose-boukai a=200, Monte Carlo E[N]: sigma^2 power {power(spec):+.3f}")
