"""Stopping rules for sequential experiments.

Each rule knows how to simulate its stopping time given the true parameter,
and :func:`expected_n`, :func:`expected_sqrt_n` and :func:`tau_limit` give
``E[N]``, ``E[sqrt(N)]`` and the large-``a`` rate ``N_a / a -> tau``.

Rules:

* :class:`NegBin` -- Bernoulli trials until the r-th success.
* :class:`BrownianExit` -- first exit of a drifted Brownian motion from (a, b).
* :class:`BoseBoukai` -- sequential rule for the two-parameter family that
  stops once ``Y_n < G1'(-a^2/n^2)``.
* :class:`WoodroofeLRT` -- truncated sequential likelihood-ratio test of
  N(0, 1) for normal data.
* :class:`FixedN` -- a fixed sample size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .model import (
    BERNOULLI,
    BROWNIAN_DRIFT,
    NORMAL,
    DomainError,
    TwoParamExpFamily,
    UnsupportedOperation,
    lrt_drift,
)

__all__ = [
    "CapExceeded",
    "BiasedEstimateWarning",
    "NegBin",
    "BrownianExit",
    "BoseBoukai",
    "WoodroofeLRT",
    "FixedN",
    "Method",
    "ExpectedN",
    "simulate_stop",
    "simulate_stops",
    "expected_n",
    "expected_sqrt_n",
    "tau_limit",
    "brownian_exit_mean",
    "negbin_pmf",
    "negbin_tail_k",
    "negbin_sqrt_series",
    "negbin_sqrt_transform",
    "negbin_variance",
    "DEFAULT_N_MAX",
]

DEFAULT_N_MAX = 10**7


class CapExceeded(RuntimeError):
    """Simulation reached the hard cap ``n_max`` without stopping."""

    def __init__(self, cap):
        super().__init__(f"stopping time exceeded cap n_max={cap}")
        self.cap = cap


class BiasedEstimateWarning(UserWarning):
    """A Monte Carlo estimate included capped replicates (biased low)."""


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _first_true(mask):
    """Index of the first True in each row, -1 where there is none."""
    hit = mask.any(axis=-1)
    idx = mask.argmax(axis=-1)
    return np.where(hit, idx, -1)


@dataclass(frozen=True)
class _Rule:
    n_max: int = field(default=DEFAULT_N_MAX, kw_only=True)

    def simulate(self, theta, size, rng):
        raise NotImplementedError

    @property
    def floor(self):
        return 0


@dataclass(frozen=True)
class NegBin(_Rule):
    """Sample Bernoulli(p) trials until ``r`` successes have been seen."""

    r: int
    model = BERNOULLI

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"NegBin requires integer r >= 1, got {self.r!r}")

    @property
    def floor(self):
        return self.r

    @staticmethod
    def check_p(p) -> float:
        # the stopping law is defined at p = 1 (N = r), unlike the
        # Bernoulli parameter space used for priors and likelihoods
        p = float(p)
        if not 0.0 < p <= 1.0:
            raise DomainError(f"negbin: p={p!r} violates 0 < p <= 1")
        return p

    def simulate_sequential(self, p, rng):
        """Draw trials one at a time (in blocks) until the r-th success."""
        p = self.check_p(p)
        seen = 0
        n = 0
        block = max(64, int(2 * self.r / p))
        while n < self.n_max:
            take = min(block, self.n_max - n)
            succ = rng.random(take) < p
            csum = np.cumsum(succ) + seen
            hit = np.flatnonzero(csum >= self.r)
            if hit.size:
                return n + int(hit[0]) + 1, False
            seen = int(csum[-1])
            n += take
        return self.n_max, True

    def simulate(self, p, size, rng):
        # failures before the r-th success, plus the r successes
        p = self.check_p(p)
        n = rng.negative_binomial(self.r, p, size).astype(np.int64) + self.r
        capped = n > self.n_max
        return np.minimum(n, self.n_max), capped


@dataclass(frozen=True)
class BrownianExit(_Rule):
    """First exit time of ``Z(t) = theta t + W(t)`` from ``(a, b)``.

    Paths are advanced with Euler steps of size ``dt``.  With ``bridge=True``
    (the default) a crossing between grid points is detected with the
    Brownian-bridge exit probability ``exp(-2 d0 d1 / dt)`` for each
    boundary, which removes the O(sqrt(dt)) bias of checking the boundary at
    grid points only.  The returned time is the end of the step in which the
    exit happened.
    """

    a: float
    b: float
    dt: float = 1e-3
    bridge: bool = True
    block: int = 256
    model = BROWNIAN_DRIFT

    def __post_init__(self):
        if not (self.a < 0 < self.b) or not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"BrownianExit requires -inf < a < 0 < b < inf, got a={self.a}, b={self.b}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def simulate(self, theta, size, rng):
        theta = self.model.check_theta(theta)
        a, b, dt = self.a, self.b, self.dt
        sd = math.sqrt(dt)
        z = np.zeros(size)
        steps = np.zeros(size, dtype=np.int64)
        out = np.zeros(size)
        capped = np.zeros(size, dtype=bool)
        alive = np.arange(size)
        while alive.size:
            m = alive.size
            incr = theta * dt + sd * rng.standard_normal((m, self.block))
            path = z[alive, None] + np.cumsum(incr, axis=1)
            crossed = (path <= a) | (path >= b)
            if self.bridge:
                prev = np.concatenate([z[alive, None], path[:, :-1]], axis=1)
                du = np.clip(b - prev, 0, None) * np.clip(b - path, 0, None)
                dl = np.clip(prev - a, 0, None) * np.clip(path - a, 0, None)
                p_cross = np.exp(-2.0 * du / dt) + np.exp(-2.0 * dl / dt)
                crossed |= rng.random((m, self.block)) < p_cross
            first = _first_true(crossed)
            done = first >= 0
            idx = alive[done]
            out[idx] = (steps[idx] + first[done] + 1) * dt
            keep = alive[~done]
            z[keep] = path[~done, -1]
            steps[keep] += self.block
            over = steps[keep] >= self.n_max
            if over.any():
                cidx = keep[over]
                capped[cidx] = True
                out[cidx] = self.n_max * dt
                keep = keep[~over]
            alive = keep
        return out, capped


def _family_stop_scan(model, theta, rng, n_max, start_block, check):
    """Draw observations in growing blocks; return the first n at which
    ``check(n, cumsum_u1, cumsum_u2)`` holds, and whether n_max was hit."""
    n0 = 0
    s1 = s2 = 0.0
    block = start_block
    while n0 < n_max:
        take = min(block, n_max - n0)
        x = model.sample(theta, take, rng)
        c1 = s1 + np.cumsum(model.u1(x))
        c2 = s2 + np.cumsum(model.u2(x))
        n = np.arange(n0 + 1, n0 + take + 1, dtype=float)
        ok = check(n, c1, c2)
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(n[hit[0]]), False
        s1, s2 = float(c1[-1]), float(c2[-1])
        n0 += take
        block *= 2
    return n_max, True


@dataclass(frozen=True)
class BoseBoukai(_Rule):
    """Stop at the first ``n >= m0`` with ``Y_n < G1'(-a^2 / n^2)``.

    ``Y_n`` is the per-observation statistic
    ``mean(U1) - G2(mean(U2))``; for normal data this is the rule
    ``n^-1 sum (X_i - Xbar)^2 < n^2 / (2 a^2)``.
    """

    a: float
    m0: int = 2
    model: TwoParamExpFamily = NORMAL

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"BoseBoukai requires a >= 0, got {self.a!r}")
        if int(self.m0) != self.m0 or self.m0 < 2:
            raise ValueError(f"BoseBoukai requires integer m0 >= 2, got {self.m0!r}")

    @property
    def floor(self):
        return self.m0

    def _check(self, n, c1, c2):
        model = self.model
        y = c1 / n - model.g2(c2 / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            thr = model.g1_prime(-(self.a**2) / n**2)
        thr = np.where(np.isnan(thr), np.inf, thr)
        return (n >= self.m0) & (y < thr)

    def simulate(self, theta, size, rng):
        t1, _ = self.model.check_theta(theta)
        guess = int(self.a / math.sqrt(-t1)) + self.m0 + 16
        out = np.empty(size, dtype=np.int64)
        capped = np.zeros(size, dtype=bool)
        for i in range(size):
            out[i], capped[i] = _family_stop_scan(
                self.model, theta, rng, self.n_max, guess + guess // 4, self._check
            )
        return out, capped


@dataclass(frozen=True)
class WoodroofeLRT(_Rule):
    """``N_a = min(b2 a, inf{n >= b1 a : sum X^2 - n - n log s2_n > 2a})``.

    Normal data; ``s2_n`` is the MLE of the variance.  The truncation at
    ``floor(b2 a)`` is part of the rule and is not reported as capped.
    """

    a: float
    b1: float
    b2: float
    model = NORMAL

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"WoodroofeLRT requires a > 0, got {self.a!r}")
        if not 0 < self.b1 < self.b2 < math.inf:
            raise ValueError(f"WoodroofeLRT requires 0 < b1 < b2 < inf, got {self.b1}, {self.b2}")

    @property
    def floor(self):
        return math.ceil(self.b1 * self.a)

    @property
    def truncation(self):
        return max(int(math.floor(self.b2 * self.a)), self.floor)

    def _check(self, n, c1, c2):
        # NORMAL: U1 = x^2, U2 = x
        s2 = c1 / n - (c2 / n) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = c1 - n - n * np.log(s2)
        return (n >= self.floor) & (stat > 2.0 * self.a)

    def simulate(self, theta, size, rng):
        self.model.check_theta(theta)
        trunc = self.truncation
        limit = min(trunc, self.n_max)
        out = np.empty(size, dtype=np.int64)
        capped = np.zeros(size, dtype=bool)
        for i in range(size):
            n, hit_limit = _family_stop_scan(
                self.model, theta, rng, limit, max(64, self.floor + 16), self._check
            )
            out[i] = n
            capped[i] = hit_limit and limit < trunc
        return out, capped


@dataclass(frozen=True)
class FixedN(_Rule):
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"FixedN requires integer n >= 1, got {self.n!r}")

    @property
    def floor(self):
        return self.n

    def simulate(self, theta, size, rng):
        return np.full(size, self.n, dtype=np.int64), np.zeros(size, dtype=bool)


# -- simulation entry points -------------------------------------------------


def simulate_stops(rule, theta, size, seed=None):
    """Simulate ``size`` independent stopping times.

    Returns ``(times, capped)``; capped entries hold the cap value and must
    be treated as right-censored.
    """
    return rule.simulate(theta, int(size), _as_rng(seed))


def simulate_stop(rule, theta, seed=None):
    """Simulate one stopping time; raise :class:`CapExceeded` at the cap."""
    rng = _as_rng(seed)
    if isinstance(rule, NegBin):
        n, capped = rule.simulate_sequential(theta, rng)
    else:
        times, caps = rule.simulate(theta, 1, rng)
        n, capped = times[0], bool(caps[0])
    if capped:
        raise CapExceeded(rule.n_max)
    return n.item() if isinstance(n, np.generic) else n


# -- expectations ------------------------------------------------------------


class Method(str, enum.Enum):
    CLOSED_FORM = "closed-form"
    MONTE_CARLO = "monte-carlo"


class ExpectedN(NamedTuple):
    value: float
    method: Method
    se: float = 0.0
    replicates: int = 0
    biased: bool = False


def brownian_exit_mean(theta, a, b):
    """``E_theta(T_ab)`` for drifted Brownian motion (Hall's formula).

    Evaluated with ``expm1`` and, for positive drift, after dividing through
    by ``exp(2(b - a) theta)`` so large ``|theta|`` does not overflow.
    """
    theta = float(theta)
    if abs(theta) < 1e-8:
        return -a * b
    w = b - a
    if theta > 0:
        ratio = math.exp(2.0 * a * theta) * (-math.expm1(-2.0 * b * theta)) / (
            -math.expm1(-2.0 * w * theta)
        )
    else:
        ratio = math.expm1(2.0 * b * theta) / math.expm1(2.0 * w * theta)
    return (b - w * ratio) / theta


def negbin_pmf(k, r, p):
    k = np.asarray(k)
    logp = gammaln(k) - gammaln(r) - gammaln(k - r + 1) + r * np.log(p) + (k - r) * np.log1p(-p)
    return np.exp(logp)


def negbin_tail_k(r, p, tail=1e-8, cap=10**8):
    """Smallest K with ``P(N_r > K) < tail``."""
    from scipy.stats import nbinom

    k = int(nbinom.isf(tail, r, p)) + r
    while nbinom.sf(k - r, r, p) >= tail:
        k += 1
        if k > cap:
            raise ArithmeticError("negative binomial truncation not reached within cap")
    return k


def negbin_variance(r, p):
    """Variance of the number of trials to the r-th success, r(1-p)/p^2."""
    return r * (1.0 - p) / (p * p)


def negbin_sqrt_series(r, p, tol=1e-12):
    """``E[sqrt(N_r)]`` by direct summation with a geometric tail bound.

    The ratio of consecutive terms ``sqrt(1 + 1/k) k (1 - p) / (k - r + 1)``
    decreases in ``k``, so once it is below one at the last summed index the
    remainder is bounded by a geometric series.
    """
    r = int(r)
    p = float(p)
    if p == 1.0:
        return math.sqrt(r)
    total = 0.0
    start = r
    block = max(1024, int(4 * r / p))
    lr = gammaln(r)
    while True:
        k = np.arange(start, start + block, dtype=float)
        terms = np.exp(
            0.5 * np.log(k) + gammaln(k) - lr - gammaln(k - r + 1)
            + r * math.log(p) + (k - r) * math.log1p(-p)
        )
        total += float(np.sum(terms))
        last = k[-1]
        rho = math.sqrt(1.0 + 1.0 / last) * last * (1.0 - p) / (last - r + 1.0)
        if rho < 1.0 and terms[-1] * rho / (1.0 - rho) < tol:
            return total
        start += block
        block *= 2


def negbin_sqrt_transform(r, p, step=0.25, lo=-90.0, hi=70.0):
    """``E[sqrt(N_r)]`` for an array of ``p`` via the Laplace transform of N.

    Uses ``sqrt(k) = (4 pi)^(-1/2) int_0^inf (1 - e^(-k t)) t^(-3/2) dt`` with
    ``E e^(-t N) = (p e^-t / (1 - (1-p) e^-t))^r``, integrated by the
    trapezoid rule in ``s = log t``.  The integrand is analytic in a strip
    of half-width about pi/2, so the default step is accurate to roughly
    1e-14 relative.
    """
    r = int(r)
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p > 1.0)):
        raise DomainError("negbin: p must satisfy 0 < p <= 1")
    s = np.arange(lo, hi + 0.5 * step, step)
    t = np.exp(s)
    q = ((1.0 - p) / p)[..., None]
    # log E e^(-tN), written to stay accurate as t -> 0
    log_m = -r * (t + np.log1p(q * -np.expm1(-t)))
    f = -np.expm1(log_m) * np.exp(-0.5 * s)
    return step * f.sum(axis=-1) / (2.0 * math.sqrt(math.pi))


def _mc(rule, theta, replicates, seed, fn):
    times, capped = simulate_stops(rule, theta, replicates, seed)
    vals = fn(times.astype(float))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.inf
    biased = bool(capped.any())
    if biased:
        import warnings

        warnings.warn(
            f"{int(capped.sum())} of {replicates} replicates hit the cap; estimate is biased low",
            BiasedEstimateWarning,
            stacklevel=3,
        )
    return ExpectedN(mean, Method.MONTE_CARLO, se, replicates, biased)


def expected_n(rule, theta, replicates=10_000, seed=None, monte_carlo=False) -> ExpectedN:
    """``E_theta[N]``: closed form where available, Monte Carlo otherwise.

    ``monte_carlo=True`` forces the simulation estimate even when a closed
    form exists (used to cross-check the two).
    """
    if monte_carlo:
        return _mc(rule, theta, replicates, seed, lambda t: t)
    if isinstance(rule, NegBin):
        p = rule.check_p(theta)
        return ExpectedN(rule.r / p, Method.CLOSED_FORM)
    if isinstance(rule, BrownianExit):
        theta = rule.model.check_theta(theta)
        return ExpectedN(brownian_exit_mean(theta, rule.a, rule.b), Method.CLOSED_FORM)
    if isinstance(rule, FixedN):
        return ExpectedN(float(rule.n), Method.CLOSED_FORM)
    return _mc(rule, theta, replicates, seed, lambda t: t)


def expected_sqrt_n(rule, theta, replicates=10_000, seed=None, monte_carlo=False) -> ExpectedN:
    """``E_theta[sqrt(N)]``; series for NegBin, Monte Carlo for the others."""
    if monte_carlo:
        return _mc(rule, theta, replicates, seed, np.sqrt)
    if isinstance(rule, NegBin):
        p = rule.check_p(theta)
        return ExpectedN(negbin_sqrt_series(rule.r, p), Method.CLOSED_FORM)
    if isinstance(rule, FixedN):
        return ExpectedN(math.sqrt(rule.n), Method.CLOSED_FORM)
    return _mc(rule, theta, replicates, seed, np.sqrt)


def tau_limit(rule, theta) -> float:
    """Limit of ``N_a / a`` as ``a -> infinity``.

    BoseBoukai: ``1 / sqrt(|theta1|)``.  WoodroofeLRT: the LRT statistic
    grows like ``2 n kappa`` with ``kappa = KL(N(mu, s2) || N(0, 1))`` so the
    untruncated rule stops near ``a / kappa``; the truncation to
    ``[b1 a, b2 a]`` clamps this, giving ``1 / clip(kappa, 1/b2, 1/b1)``.
    FixedN: 1 (the sample size itself plays the role of ``a``).
    """
    if isinstance(rule, BoseBoukai):
        t1, _ = rule.model.check_theta(theta)
        return 1.0 / math.sqrt(-t1)
    if isinstance(rule, WoodroofeLRT):
        kappa = lrt_drift(theta, rule.model)
        return 1.0 / min(max(kappa, 1.0 / rule.b2), 1.0 / rule.b1)
    if isinstance(rule, FixedN):
        return 1.0
    raise UnsupportedOperation(f"no tau limit for {type(rule).__name__}")
