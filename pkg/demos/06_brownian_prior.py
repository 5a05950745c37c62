"""
A sequential prior for Brownian drift
=====================================

Observing Brownian motion with drift theta until it leaves (a, b), the
sequential Jeffreys prior is sqrt(E_theta T).  It equals sqrt(-a b) at
theta = 0 and decays like |theta|^(-1/2), so it stays improper.
"""

import numpy as np

from seqprior.experiment import brownian_prior_curve, tail_slope
from seqprior.stopping import BrownianExit, simulate_stops

for row in brownian_prior_curve(-1.0, 1.0, [-10, -2, -0.5, 0, 0.5, 2, 10]):
    print(f"theta {row.theta:+6.1f}  E T {row.expected_t:.5f}  prior {row.prior:.5f}")

print(f"log-log tail slope on [20, 100]: {tail_slope():.4f}")

# %%
# Compare with simulated paths for an asymmetric interval.
rng = np.random.default_rng(8)
for row in brownian_prior_curve(-0.5, 2.0, [-1.0, 0.0, 1.0]):
    times, _ = simulate_stops(BrownianExit(-0.5, 2.0, dt=1e-3), row.theta, 10_000, rng)
    print(f"(a, b)=(-0.5, 2) theta {row.theta:+.1f}: exact {row.expected_t:.4f}  simulated {times.mean():.4f}")
