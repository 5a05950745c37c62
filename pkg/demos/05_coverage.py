"""
Frequentist coverage of one-sided credible bounds
=================================================

For inverse binomial sampling the distribution of N is known, so the
coverage of a posterior quantile is a finite sum over possible outcomes
rather than a simulation.  The sequential priors give coverage close to the
nominal level, the fixed Jeffreys prior less so when r is small.
"""

from seqprior.experiment import TABLE2_PUBLISHED, coverage_monte_carlo, table2

reports = table2()
print(" r    p   prior                   C(0.05)  C(0.95)   published")
for rep in reports:
    lo, hi = TABLE2_PUBLISHED[(rep.r, rep.p, rep.prior_kind)]
    print(f"{rep.r:2d}  {rep.p:.1f}  {rep.prior_kind.value:22s}  {rep.coverage_lower_5:.4f}   "
          f"{rep.coverage_upper_95:.4f}    {lo:.4f} {hi:.4f}")

# %%
# Cross-check one cell by simulating the experiment.
mc = coverage_monte_carlo(8, 0.5, "approx-sqrt", replicates=100_000, seed=5)
print(f"\nMonte Carlo (8, 0.5, approx-sqrt): {mc.coverage_lower_5:.4f} +- {mc.se_lower_5:.4f}, "
      f"{mc.coverage_upper_95:.4f} +- {mc.se_upper_95:.4f}")
