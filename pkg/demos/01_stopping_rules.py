"""
Stopping rules and their expected sample sizes
==============================================

Every sequential prior in ``seqprior`` is built from ``E_theta[N]``, the
expected stopping time of the experiment.  This script simulates each
supported rule and compares the simulation with the closed form or the
limiting approximation.
"""

import math

import numpy as np

from seqprior.model import NORMAL
from seqprior.stopping import (
    BoseBoukai,
    BrownianExit,
    NegBin,
    WoodroofeLRT,
    brownian_exit_mean,
    expected_n,
    expected_sqrt_n,
    simulate_stops,
    tau_limit,
)

rng = np.random.default_rng(20261014)

# %%
# Inverse binomial sampling: observe Bernoulli trials until the r-th
# success.  E_p[N] = r / p exactly, and E_p[sqrt N] comes from a series.
rule = NegBin(3)
for p in (0.2, 0.5, 0.9):
    times, _ = simulate_stops(rule, p, 20_000, rng)
    print(f"negbin r=3 p={p}: simulated {times.mean():.4f}  exact {expected_n(rule, p).value:.4f}"
          f"  E sqrt N {expected_sqrt_n(rule, p).value:.4f}")

# %%
# Brownian motion with drift theta, stopped on leaving (a, b).  The path
# simulation uses a Brownian-bridge crossing check between grid points, so
# a coarse step does not overshoot the exit time.
rule = BrownianExit(-1.0, 1.0, dt=1e-3)
for theta in (-1.0, 0.0, 2.0):
    times, _ = simulate_stops(rule, theta, 5_000, rng)
    print(f"brownian theta={theta:+}: simulated {times.mean():.4f}  exact {brownian_exit_mean(theta, -1, 1):.4f}")

# %%
# Normal data with a rule that stops once the sample variance drops below
# n^2 / (2 a^2).  For large a, N/a settles at a limit that depends on
# sigma^2; at sigma = 1 the limit is sqrt(2).
theta = NORMAL.natural(0.0, 1.0)
for a in (25.0, 100.0):
    times, _ = simulate_stops(BoseBoukai(a), theta, 2_000, rng)
    print(f"bose-boukai a={a:g}: mean N/a {np.mean(times / a):.4f}  limit {tau_limit(BoseBoukai(a), theta):.4f}"
          f"  sqrt(2) {math.sqrt(2):.4f}")

# %%
# A likelihood-ratio rule with truncation bands: N/a tends to the reciprocal
# of the clipped drift.
rule = WoodroofeLRT(200.0, b1=0.5, b2=4.0)
for mu in (0.0, 1.0, 3.0):
    th = NORMAL.natural(mu, 1.0)
    times, _ = simulate_stops(rule, th, 200, rng)
    print(f"lrt mu={mu}: mean N/a {np.mean(times / 200.0):.4f}  limit {tau_limit(rule, th):.4f}")
