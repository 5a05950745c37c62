"""Metropolis samplers for posteriors whose prior involves ``E_theta[N]``.

Every sequential prior considered here has the form ``Psi(E_theta[N]) *
pi_F(theta)``, so the posterior is the fixed-sample-size posterior
``q(theta) ~ pi_F(theta) * likelihood`` reweighted by ``Psi(E_theta[N])``.
All three samplers propose from ``q`` (exactly, or with a q-reversible
random-walk kernel) and correct with an acceptance ratio that involves only
the stopping rule:

* :func:`brute_force_metropolis` estimates ``E_theta'[N]`` by averaging
  many simulated experiments and accepts with ``Psi(E') / Psi(E)``.
* :func:`latent_variable_metropolis` augments the state with a single
  simulated stopping time ``N~`` and accepts with ``N~' / N~``; the
  theta-marginal is ``E_theta[N] q(theta)``.
* :func:`modified_sqrt_metropolis` accepts with ``sqrt(N~' / N~)``; the
  theta-marginal is ``E_theta[sqrt N] q(theta)``.

The proposal's quantity sits in the numerator, which is what detailed
balance requires for these targets.  ``SamplerConfig.literal_ratio``
flips the ratio for side-by-side comparison runs only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .inference import BetaPosterior, PosteriorTarget
from .stopping import simulate_stops

__all__ = [
    "SamplerConfig",
    "Chain",
    "ExactProposal",
    "RandomWalkProposal",
    "fixed_posterior_proposal",
    "brute_force_metropolis",
    "latent_variable_metropolis",
    "modified_sqrt_metropolis",
    "chain_diagnostics",
    "ChainSummary",
]


def psi_exponent(psi) -> float:
    """Exponent ``e`` of ``Psi(E) = E^e`` from 'identity', 'sqrt' or a number."""
    if isinstance(psi, str):
        try:
            return {"identity": 1.0, "sqrt": 0.5}[psi.lower()]
        except KeyError:
            raise ValueError(f"unknown psi {psi!r}; use 'identity', 'sqrt' or a power") from None
    return float(psi)


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 11_000
    burn_in: int | None = None
    seed: int = 0
    psi: object = "identity"
    e_n_replicates: int = 1_000
    inner_steps: int = 50
    literal_ratio: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.e_n_replicates < 1:
            raise ValueError("e_n_replicates must be at least 1")
        psi_exponent(self.psi)

    @property
    def kept(self) -> int:
        return self.iterations - self.burn_in


@dataclass
class Chain:
    """Kept draws of a sampler run plus bookkeeping.

    ``latent`` holds ``N~`` (latent samplers) or the retained ``E^`` (brute
    force) for every kept iteration.  ``stop_simulations`` counts simulated
    experiments made during the iterations, ``init_simulations`` those made
    to initialize the state, and ``capped`` those that hit the cap.
    """

    draws: np.ndarray
    latent: np.ndarray
    accepted: np.ndarray
    algorithm: str
    stop_simulations: int = 0
    capped: int = 0
    moves_accepted: int = 0
    iterations: int = 0
    init_simulations: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.moves_accepted / self.iterations if self.iterations else 0.0

    @property
    def diagnostics(self):
        return chain_diagnostics(self)

    def to_csv(self, coordinate_names=("theta",), digits: int = 17) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", *coordinate_names, "latent", "accepted"])
        draws = self.draws.reshape(len(self.draws), -1)
        for i, (row, lat, acc) in enumerate(zip(draws, self.latent, self.accepted)):
            w.writerow([i, *(f"{v:.{digits}g}" for v in row), f"{lat:.{digits}g}", int(acc)])
        return buf.getvalue()


# -- proposals for the fixed-sample-size posterior ---------------------------


@dataclass(frozen=True)
class ExactProposal:
    """Independent draws from the fixed-sample posterior."""

    draw: Callable

    def start(self, rng):
        return self.draw(rng)

    def propose(self, current, rng):
        return self.draw(rng)


@dataclass(frozen=True)
class RandomWalkProposal:
    """``inner_steps`` random-walk Metropolis moves on ``log q``.

    The composite kernel is reversible with respect to ``q``, which is all the
    outer acceptance ratio needs.
    """

    log_density: Callable
    initial: object
    scale: object = 0.1
    inner_steps: int = 50

    def start(self, rng):
        return np.array(self.initial, dtype=float)

    def propose(self, current, rng):
        x = np.array(current, dtype=float)
        lx = self.log_density(_unwrap(x))
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), x.shape)
        for _ in range(self.inner_steps):
            y = x + scale * rng.standard_normal(x.shape)
            try:
                ly = self.log_density(_unwrap(y))
            except ValueError:
                ly = -math.inf
            if math.log(rng.random()) < ly - lx:
                x, lx = y, ly
        return x


def _unwrap(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def fixed_posterior_proposal(target: PosteriorTarget, inner_steps: int = 50, scale=None, initial=None):
    """Proposal from ``pi_F * likelihood`` for a posterior target.

    NegBin data under the fixed Jeffreys prior gets exact Beta draws;
    anything else falls back to :class:`RandomWalkProposal` on the target's
    log density.
    """
    from .model import Bernoulli
    from .prior import PriorKind

    model, prior = target.model, target.prior
    if isinstance(model, Bernoulli) and prior.kind is PriorKind.JEFFREYS_FIXED:
        s = float(np.sum(target.data.values))
        post = BetaPosterior(s + 0.5, target.n - s + 0.5)
        return ExactProposal(lambda rng: float(rng.beta(post.a, post.b)))
    if initial is None:
        raise ValueError("a random-walk proposal needs an initial point")
    if scale is None:
        scale = 0.1
    return RandomWalkProposal(target.log_target, initial, scale, inner_steps)


# -- samplers -----------------------------------------------------------------


def _theta_for_rule(theta):
    return _unwrap(theta)


def _streams(seed):
    # proposals/uniforms and simulated experiments draw from separate
    # streams, so runs that differ only in how E[N] is obtained share
    # proposals and uniforms
    move, sim = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(move), np.random.default_rng(sim)


def brute_force_metropolis(proposal, rule, config: SamplerConfig, expected_fn: Callable | None = None) -> Chain:
    """Metropolis with a Monte Carlo estimate of ``E_theta'[N]`` per proposal.

    The estimate attached to the current state is kept while the state is
    held, so for ``Psi = identity`` this is a pseudo-marginal sampler whose
    stationary distribution is exactly ``E_theta[N] q(theta)``.  For other
    ``Psi`` the plug-in ``Psi(E^)`` is biased and the sampler is approximate.
    ``expected_fn(theta)`` replaces the Monte Carlo estimate when given.
    """
    rng, sim_rng = _streams(config.seed)
    e = psi_exponent(config.psi)
    sign = -1.0 if config.literal_ratio else 1.0
    counters = {"sims": 0, "capped": 0}

    def estimate(theta):
        if expected_fn is not None:
            return float(expected_fn(_theta_for_rule(theta)))
        times, capped = simulate_stops(rule, _theta_for_rule(theta), config.e_n_replicates, sim_rng)
        counters["sims"] += config.e_n_replicates
        counters["capped"] += int(capped.sum())
        return float(np.mean(times))

    theta = proposal.start(rng)
    est = estimate(theta)
    init_sims = counters["sims"]
    draws, latent, accepted = [], [], []
    n_acc = 0
    for it in range(config.iterations):
        cand = proposal.propose(theta, rng)
        cand_est = estimate(cand)
        log_ratio = sign * e * (math.log(cand_est) - math.log(est))
        acc = math.log(rng.random()) < min(0.0, log_ratio)
        if acc:
            theta, est = cand, cand_est
            n_acc += 1
        if it >= config.burn_in:
            draws.append(theta)
            latent.append(est)
            accepted.append(acc)
    return Chain(
        np.array(draws, dtype=float), np.array(latent, dtype=float), np.array(accepted, dtype=bool),
        "brute-force", counters["sims"] - init_sims, counters["capped"], n_acc, config.iterations,
        init_sims,
    )


def _latent(proposal, rule, config: SamplerConfig, exponent: float, name: str) -> Chain:
    rng, sim_rng = _streams(config.seed)
    sign = -1.0 if config.literal_ratio else 1.0
    sims = capped_count = 0

    def one_stop(theta):
        nonlocal sims, capped_count
        times, capped = simulate_stops(rule, _theta_for_rule(theta), 1, sim_rng)
        sims += 1
        capped_count += int(capped[0])
        return float(times[0]), bool(capped[0])

    theta = proposal.start(rng)
    n_lat, cap0 = one_stop(theta)
    if cap0:
        raise RuntimeError("initial latent stopping time hit the cap; widen n_max")
    init_sims, sims = sims, 0
    draws, latent, accepted = [], [], []
    n_acc = 0
    for it in range(config.iterations):
        cand = proposal.propose(theta, rng)
        cand_n, cand_capped = one_stop(cand)
        if cand_capped:
            acc = False
        else:
            log_ratio = sign * exponent * (math.log(cand_n) - math.log(n_lat))
            acc = math.log(rng.random()) < min(0.0, log_ratio)
        if acc:
            theta, n_lat = cand, cand_n
            n_acc += 1
        if it >= config.burn_in:
            draws.append(theta)
            latent.append(n_lat)
            accepted.append(acc)
    return Chain(
        np.array(draws, dtype=float), np.array(latent, dtype=float), np.array(accepted, dtype=bool),
        name, sims, capped_count, n_acc, config.iterations, init_sims,
    )


def latent_variable_metropolis(proposal, rule, config: SamplerConfig) -> Chain:
    """Sample ``(theta, N~)`` with one simulated experiment per iteration.

    The theta-marginal is ``E_theta[N] q(theta)``.
    """
    return _latent(proposal, rule, config, 1.0, "latent")


def modified_sqrt_metropolis(proposal, rule, config: SamplerConfig) -> Chain:
    """Latent-variable sampler with acceptance ``sqrt(N~' / N~)``.

    The theta-marginal is ``E_theta[sqrt N] q(theta)``, which approximates
    the ``sqrt(E_theta[N]) q(theta)`` posterior when the two expectations
    are close.
    """
    return _latent(proposal, rule, config, 0.5, "sqrt")


# -- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class ChainSummary:
    mean: np.ndarray
    variance: np.ndarray
    lag1: np.ndarray
    ess: np.ndarray
    acceptance_rate: float | None = None


def _autocorr(x):
    n = x.size
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(f * np.conj(f))[:n]
    if ac[0] == 0:
        return np.zeros(n)
    return ac / ac[0]


def _ess(x):
    n = x.size
    rho = _autocorr(x)
    if not np.any(rho):
        return float(n)
    # truncate at the first non-positive autocorrelation
    tail = rho[1:]
    stop = np.flatnonzero(tail <= 0)
    m = int(stop[0]) if stop.size else tail.size
    tau = 1.0 + 2.0 * float(np.sum(tail[:m]))
    return n / tau


def chain_diagnostics(chain) -> ChainSummary:
    """Mean, variance, lag-1 autocorrelation and ESS per coordinate."""
    draws = getattr(chain, "draws", chain)
    x = np.asarray(draws, dtype=float)
    if x.size == 0:
        raise ValueError("empty chain")
    x = x.reshape(x.shape[0], -1)
    mean = x.mean(axis=0)
    var = x.var(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    lag1 = np.array([_autocorr(c)[1] if c.size > 1 else 0.0 for c in x.T])
    ess = np.array([_ess(c) for c in x.T])
    rate = chain.acceptance_rate if isinstance(chain, Chain) else None
    return ChainSummary(mean, var, lag1, ess, rate)
