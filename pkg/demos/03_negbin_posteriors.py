"""
Posteriors for an inverse binomial experiment
=============================================

After the r-th success at trial N the likelihood is p^r (1 - p)^(N - r).
The fixed Jeffreys prior gives Beta(r + 1/2, N - r + 1/2), the sequential
reference prior gives Beta(r, N - r + 1/2), and the E[sqrt N] prior needs
numerical normalization.
"""

from seqprior.experiment import figure2_data
from seqprior.inference import PosteriorTarget, credible_bound, negbin_conjugate_posterior, quadrature_posterior
from seqprior.model import BERNOULLI, negbin_sample
from seqprior.prior import PriorSpec
from seqprior.stopping import NegBin

for r, n in ((2, 5), (10, 25)):
    print(f"\nr={r}, N={n}")
    for kind in ("jeffreys-fixed", "reference-sequential"):
        post = negbin_conjugate_posterior(kind, r, n)
        lo = credible_bound(post, 0.05, "lower").value
        hi = credible_bound(post, 0.95, "upper").value
        print(f"  {kind:22s} Beta({post.a:g}, {post.b:g})  5%: {lo:.4f}  95%: {hi:.4f}")
    target = PosteriorTarget(PriorSpec("approx-sqrt", BERNOULLI, NegBin(r)), BERNOULLI, negbin_sample(r, n))
    table = quadrature_posterior(target)
    print(f"  {'approx-sqrt (grid)':22s} mean {table.mean:.4f}  5%: {table.quantile(0.05):.4f}"
          f"  95%: {table.quantile(0.95):.4f}")

# %%
# How close are the three densities?  With little data the two sequential
# priors agree with each other and differ from the fixed one; with more data
# all three merge.
for r, n in ((2, 5), (10, 25)):
    d = figure2_data(r, n)
    print(f"(r, N)=({r}, {n}): TV(R*, M) {d.total_variation('reference-sequential', 'approx-sqrt'):.4f}"
          f"  TV(R*, J) {d.total_variation('reference-sequential', 'jeffreys-fixed'):.4f}"
          f"  sup gap(R*, M) {d.sup_gap('reference-sequential', 'approx-sqrt'):.5f}")
