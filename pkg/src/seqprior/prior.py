"""Objective priors for fixed and sequential experiments.

All priors are improper and are returned as unnormalized log values; only
differences of log values are meaningful.  Values are densities with respect
to the model's natural parameter (``p`` for Bernoulli, ``theta`` for Brownian
drift, ``(theta1, theta2)`` for the two-parameter family).  Use
:func:`to_familiar` to re-express a two-parameter prior in the conventional
coordinates, e.g. ``(mu, sigma2)``.
"""

from __future__ import annotations

import enum
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import (
    Bernoulli,
    BrownianDrift,
    TwoParamExpFamily,
    UnsupportedOperation,
)
from .stopping import (
    BiasedEstimateWarning,
    BoseBoukai,
    ExpectedN,
    Method,
    NegBin,
    expected_n,
    expected_sqrt_n,
    tau_limit,
)

__all__ = [
    "PriorKind",
    "PriorSpec",
    "ReferenceFactorization",
    "jeffreys_fixed",
    "jeffreys_sequential",
    "reference_fixed",
    "reference_sequential",
    "reference_one_at_a_time",
    "reference_grouped_pairs",
    "fact31_priors",
    "matching_prior",
    "approx_prior_sqrt",
    "to_familiar",
]


def jeffreys_fixed(model, theta) -> float:
    """``log |I(theta)|^(1/2)`` for a single observation."""
    if isinstance(model, TwoParamExpFamily):
        t1, t2 = model.check_theta(theta)
        return 0.5 * (
            math.log(-t1) + math.log(model.g1_double_prime(t1)) + math.log(model.g2_double_prime(t2))
        )
    sign, logdet = np.linalg.slogdet(model.fisher_info(theta))
    return 0.5 * float(logdet)


def _log_en(rule, theta, en):
    if en is None:
        en = expected_n(rule, theta)
    return math.log(en.value)


def jeffreys_sequential(model, rule, theta, en: ExpectedN | None = None) -> float:
    """``(q/2) log E_theta(N) + log pi_J(theta)``.

    ``en`` may carry a precomputed ``E_theta(N)`` (closed form or Monte
    Carlo); otherwise :func:`~seqprior.stopping.expected_n` is called.
    """
    return 0.5 * model.dim * _log_en(rule, theta, en) + jeffreys_fixed(model, theta)


@dataclass(frozen=True)
class ReferenceFactorization:
    """Product structure of the Fisher information and of ``E(N)``.

    The Fisher information is block diagonal, the i-th diagonal block being
    ``prod_l G_il(theta_(l))``; only the ``G_ii`` blocks enter the reference
    prior.  ``E_theta(N) = prod_i g_i(theta_(i))``.  These are caller
    obligations: nothing here checks them against the model.
    """

    group_dims: tuple[int, ...]
    factors: tuple[Callable, ...]
    blocks: tuple[Callable, ...]

    def __post_init__(self):
        if not (len(self.group_dims) == len(self.factors) == len(self.blocks)):
            raise ValueError("group_dims, factors and blocks must have equal length")
        if any(int(q) != q or q < 1 for q in self.group_dims):
            raise ValueError("group dimensions must be positive integers")

    def split(self, theta) -> list[np.ndarray]:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.size != sum(self.group_dims):
            raise ValueError(
                f"dimension mismatch: theta has {theta.size} components, "
                f"groups sum to {sum(self.group_dims)}"
            )
        cuts = np.cumsum(self.group_dims)[:-1]
        return np.split(theta, cuts)


def _log_abs_det(block) -> float:
    m = np.atleast_2d(np.asarray(block, dtype=float))
    _, logdet = np.linalg.slogdet(m)
    return float(logdet)


def reference_fixed(model, theta, factorization: ReferenceFactorization | None = None) -> float:
    """Single-observation reference prior (log value).

    With a ``factorization`` this is ``sum_i (1/2) log |G_ii(theta_(i))|``.
    For the two-parameter family it is ``(1/2) log(G1'' G2'')``; for one
    parameter models it coincides with the Jeffreys prior.
    """
    if factorization is not None:
        parts = factorization.split(theta)
        return sum(0.5 * _log_abs_det(g(t)) for g, t in zip(factorization.blocks, parts))
    if isinstance(model, TwoParamExpFamily):
        t1, t2 = model.check_theta(theta)
        return 0.5 * (math.log(model.g1_double_prime(t1)) + math.log(model.g2_double_prime(t2)))
    if isinstance(model, (Bernoulli, BrownianDrift)):
        return jeffreys_fixed(model, theta)
    raise UnsupportedOperation(f"no reference prior for {getattr(model, 'name', model)}")


def reference_sequential(factorization: ReferenceFactorization, theta) -> float:
    """``sum_i (q_i/2) log g_i(theta_(i)) + log pi_R(theta)``."""
    parts = factorization.split(theta)
    total = 0.0
    for q, g, t in zip(factorization.group_dims, factorization.factors, parts):
        arg = t[0] if t.size == 1 else t
        total += 0.5 * q * math.log(g(arg))
    return total + reference_fixed(None, theta, factorization)


def reference_one_at_a_time(model, rule, theta, en: ExpectedN | None = None) -> float:
    """All groups of size one: ``(1/2) log E_theta(N) + log pi_R``."""
    return 0.5 * _log_en(rule, theta, en) + reference_fixed(model, theta)


def reference_grouped_pairs(model, rule, theta, en: ExpectedN | None = None) -> float:
    """All groups of size two: ``log E_theta(N) + log pi_R``."""
    return _log_en(rule, theta, en) + reference_fixed(model, theta)


def fact31_priors(model: TwoParamExpFamily, theta) -> tuple[float, float]:
    """Large-``a`` Jeffreys and reference priors under the Bose--Boukai rule.

    With ``E(N_a) ~ a / sqrt(|theta1|)`` the Jeffreys factor ``E(N)`` cancels
    the ``sqrt(|theta1|)`` in ``pi_J``, leaving ``sqrt(G1'' G2'')``; the
    one-at-a-time reference prior picks up ``|theta1|^(-1/4)`` instead.
    """
    if not isinstance(model, TwoParamExpFamily):
        raise UnsupportedOperation("defined for the two-parameter family only")
    t1, _ = model.check_theta(theta)
    log_ref = reference_fixed(model, theta)
    return log_ref, log_ref - 0.25 * math.log(-t1)


def matching_prior(model, rule, theta) -> float:
    """``(1/2) log tau(theta) + log pi_R(theta)``."""
    return 0.5 * math.log(tau_limit(rule, theta)) + reference_fixed(model, theta)


def approx_prior_sqrt(rule, theta, en_sqrt: ExpectedN | None = None) -> float:
    """``log E_theta[sqrt(N / s)]`` with ``s = r`` for NegBin and 1 otherwise."""
    if en_sqrt is None:
        en_sqrt = expected_sqrt_n(rule, theta)
    scale = rule.r if isinstance(rule, NegBin) else 1
    return math.log(en_sqrt.value) - 0.5 * math.log(scale)


def to_familiar(model: TwoParamExpFamily, log_value: float, theta) -> float:
    """Re-express a natural-parameter log density in familiar coordinates."""
    if model.log_jacobian is None:
        raise UnsupportedOperation(f"{model.name} has no familiar parameterization")
    t1, t2 = model.check_theta(theta)
    return log_value + model.log_jacobian(t1, t2)


# -- prior specs -------------------------------------------------------------


class PriorKind(str, enum.Enum):
    JEFFREYS_FIXED = "jeffreys-fixed"
    JEFFREYS_SEQUENTIAL = "jeffreys-sequential"
    REFERENCE_FIXED = "reference-fixed"
    REFERENCE_SEQUENTIAL = "reference-sequential"
    FACT31_JEFFREYS = "fact31-jeffreys"
    FACT31_REFERENCE = "fact31-reference"
    MATCHING = "matching"
    APPROX_SQRT_N = "approx-sqrt"


_FIXED = {PriorKind.JEFFREYS_FIXED, PriorKind.REFERENCE_FIXED}
_ASYMPTOTIC = {PriorKind.FACT31_JEFFREYS, PriorKind.FACT31_REFERENCE}

# coordinates are rounded to this grid before memoizing Monte Carlo E[N]
CACHE_QUANTUM = 1e-12


def _cache_key(theta):
    return tuple(int(round(float(c) / CACHE_QUANTUM)) for c in np.atleast_1d(theta))


@dataclass(frozen=True)
class PriorSpec:
    """An evaluable, unnormalized log prior.

    Parameters
    ----------
    kind : PriorKind
    model : the parametric model
    rule : stopping rule; required for sequential kinds, rejected for fixed
        kinds, optional (Bose--Boukai only) for the large-``a`` asymptotic
        forms.
    factorization : explicit product structure for ``REFERENCE_SEQUENTIAL``;
        replaces the rule when given.
    group_size : 1 (one-at-a-time) or 2 (pairs) for ``REFERENCE_SEQUENTIAL``
        without a factorization.
    offset : constant added to every log value.
    replicates, seed : Monte Carlo settings used when ``E[N]`` or
        ``E[sqrt N]`` has no closed form.  Each parameter point gets its own
        seed derived from ``seed`` and the point, so evaluation order does
        not matter.

    ``ApproxSqrtN`` is ``E[sqrt N] * pi_R``, the approximation of the
    one-at-a-time sequential reference prior ``sqrt(E N) * pi_R``.
    """

    kind: PriorKind
    model: object
    rule: object | None = None
    factorization: ReferenceFactorization | None = None
    group_size: int = 1
    offset: float = 0.0
    replicates: int = 10_000
    seed: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)
    _flags: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        kind = self.kind
        if kind in _FIXED and self.rule is not None:
            raise ValueError(f"{kind.value} is a fixed-sample prior and takes no stopping rule")
        if kind in _ASYMPTOTIC:
            if self.rule is not None and not isinstance(self.rule, BoseBoukai):
                raise ValueError(f"{kind.value} is the large-a form for the Bose-Boukai rule")
            if not isinstance(self.model, TwoParamExpFamily):
                raise UnsupportedOperation(f"{kind.value} needs the two-parameter family")
        if kind not in _FIXED | _ASYMPTOTIC and self.rule is None:
            if not (kind is PriorKind.REFERENCE_SEQUENTIAL and self.factorization is not None):
                raise ValueError(f"{kind.value} requires a stopping rule")
        if self.group_size not in (1, 2):
            raise ValueError("group_size must be 1 or 2")

    @property
    def biased_evaluations(self) -> int:
        """Number of evaluations that used a capped Monte Carlo estimate."""
        return len(self._flags)

    def with_offset(self, offset: float) -> "PriorSpec":
        return PriorSpec(
            self.kind, self.model, self.rule, self.factorization, self.group_size,
            offset, self.replicates, self.seed,
        )

    def _expectation(self, theta, sqrt: bool) -> ExpectedN:
        key = (sqrt, _cache_key(theta))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        entropy = [self.seed, int(sqrt)] + [k % 2**64 for k in key[1]]
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        fn = expected_sqrt_n if sqrt else expected_n
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BiasedEstimateWarning)
            en = fn(self.rule, theta, replicates=self.replicates, seed=rng)
        if en.method is Method.MONTE_CARLO:
            if en.biased:
                warnings.warn(
                    f"prior at {tuple(np.atleast_1d(theta))}: Monte Carlo E[N] used capped replicates",
                    BiasedEstimateWarning,
                    stacklevel=3,
                )
                with self._lock:
                    self._flags.append(tuple(np.atleast_1d(theta)))
            with self._lock:
                self._cache.setdefault(key, en)
        return en

    def log_eval(self, theta) -> float:
        kind, model, rule = self.kind, self.model, self.rule
        if kind is PriorKind.JEFFREYS_FIXED:
            val = jeffreys_fixed(model, theta)
        elif kind is PriorKind.REFERENCE_FIXED:
            val = reference_fixed(model, theta, self.factorization)
        elif kind is PriorKind.JEFFREYS_SEQUENTIAL:
            val = jeffreys_sequential(model, rule, theta, self._expectation(theta, False))
        elif kind is PriorKind.REFERENCE_SEQUENTIAL:
            if self.factorization is not None:
                val = reference_sequential(self.factorization, theta)
            elif self.group_size == 1:
                val = reference_one_at_a_time(model, rule, theta, self._expectation(theta, False))
            else:
                val = reference_grouped_pairs(model, rule, theta, self._expectation(theta, False))
        elif kind is PriorKind.FACT31_JEFFREYS:
            val = fact31_priors(model, theta)[0]
        elif kind is PriorKind.FACT31_REFERENCE:
            val = fact31_priors(model, theta)[1]
        elif kind is PriorKind.MATCHING:
            val = matching_prior(model, rule, theta)
        elif kind is PriorKind.APPROX_SQRT_N:
            val = approx_prior_sqrt(rule, theta, self._expectation(theta, True))
            val += reference_fixed(model, theta)
        else:  # pragma: no cover
            raise UnsupportedOperation(kind)
        return val + self.offset

    __call__ = log_eval

    def log_eval_many(self, thetas: Sequence) -> np.ndarray:
        return np.array([self.log_eval(t) for t in thetas])
