"""Parametric models: Bernoulli trials, Brownian drift and the two-parameter
exponential family of Bar-Lev and Reiser with its four standard instances.

The two-parameter family has densities

    f(x | t1, t2) = a(x) exp{t1 U1(x) - t1 G2'(t2) U2(x) - psi(t1, t2)}

with ``t1 < 0`` and ``t2 = E[U2(X)]``.  The carrier ``a(x)`` does not depend
on the parameter and is left out of :func:`log_density`; every value returned
here is therefore unnormalized in ``x``.  Posterior computations only ever use
differences in the parameter, so nothing downstream depends on ``a(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "DomainError",
    "MLEUndefinedError",
    "UnsupportedOperation",
    "ParamPoint",
    "TwoParamExpFamily",
    "Bernoulli",
    "BrownianDrift",
    "Sample",
    "negbin_sample",
    "NORMAL",
    "INVERSE_GAUSSIAN",
    "GAMMA",
    "INVERSE_GAMMA",
    "BERNOULLI",
    "BROWNIAN_DRIFT",
    "TABLE1_INSTANCES",
    "log_density",
    "log_likelihood",
    "fisher_info",
    "fisher_info_bernoulli",
    "bregman_i1",
    "bregman_i2",
    "mle",
    "signed_roots",
    "rho_sq",
    "rho_sq_closed_form",
    "lrt_drift",
]


class DomainError(ValueError):
    """A parameter or observation lies outside the model's domain."""


class MLEUndefinedError(ValueError):
    """The sample falls outside the event on which the MLE exists."""


class UnsupportedOperation(TypeError):
    """The operation is not defined for the given model or rule."""


class ParamPoint(NamedTuple):
    """Natural parameter of the two-parameter family."""

    theta1: float
    theta2: float


def _in_open(value, interval):
    lo, hi = interval
    return lo < value < hi


@dataclass(frozen=True)
class TwoParamExpFamily:
    """A member of the Bar-Lev--Reiser two-parameter exponential family.

    ``g1``/``g2`` and their first two derivatives are supplied by hand; use
    :meth:`check_derivatives` to guard them against finite differences.
    ``to_natural`` maps the conventional parameters (e.g. ``(mu, sigma2)``)
    to ``(theta1, theta2)``; ``from_natural`` is its inverse and
    ``log_jacobian`` is ``log |d(theta1, theta2) / d(familiar)|`` evaluated
    at a natural parameter.
    """

    name: str
    g1: Callable
    g1_prime: Callable
    g1_double_prime: Callable
    g2: Callable
    g2_prime: Callable
    g2_double_prime: Callable
    u1: Callable
    u2: Callable
    theta2_domain: tuple[float, float]
    x_domain: tuple[float, float]
    to_natural: Callable | None = None
    from_natural: Callable | None = None
    log_jacobian: Callable | None = None
    familiar_names: tuple[str, str] = ("theta1", "theta2")
    rvs: Callable | None = None
    log_carrier: Callable | None = None
    theta1_domain: tuple[float, float] = (-math.inf, 0.0)
    dim: int = field(default=2, init=False)

    @classmethod
    def custom(cls, name="custom", **kwargs):
        """Build a user-defined family from its generator callables."""
        return cls(name=name, **kwargs)

    # -- parameter handling -------------------------------------------------

    def check_theta(self, theta) -> ParamPoint:
        t1, t2 = float(theta[0]), float(theta[1])
        lo, hi = self.theta1_domain
        if not t1 < 0.0:
            raise DomainError(f"{self.name}: theta1={t1!r} violates theta1 < 0")
        if not _in_open(t1, self.theta1_domain):
            raise DomainError(f"{self.name}: theta1={t1!r} outside ({lo}, {hi})")
        lo, hi = self.theta2_domain
        if not _in_open(t2, self.theta2_domain):
            raise DomainError(f"{self.name}: theta2={t2!r} outside ({lo}, {hi})")
        return ParamPoint(t1, t2)

    def check_x(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_domain
        if not np.all((x > lo) & (x < hi)):
            raise DomainError(f"{self.name}: observation outside support ({lo}, {hi})")
        return x

    def natural(self, *familiar) -> ParamPoint:
        if self.to_natural is None:
            raise UnsupportedOperation(f"{self.name} has no familiar parameterization")
        return self.check_theta(self.to_natural(*familiar))

    def familiar(self, theta) -> tuple[float, float]:
        if self.from_natural is None:
            raise UnsupportedOperation(f"{self.name} has no familiar parameterization")
        return self.from_natural(*self.check_theta(theta))

    # -- structural quantities ---------------------------------------------

    def psi(self, theta1, theta2):
        return -theta1 * (theta2 * self.g2_prime(theta2) - self.g2(theta2)) + self.g1(theta1)

    def fisher_info(self, theta) -> np.ndarray:
        t1, t2 = self.check_theta(theta)
        return np.diag([self.g1_double_prime(t1), -t1 * self.g2_double_prime(t2)])

    def sample(self, theta, size, rng) -> np.ndarray:
        if self.rvs is None:
            raise UnsupportedOperation(f"{self.name} has no random variate generator")
        t1, t2 = self.check_theta(theta)
        return self.rvs(t1, t2, size, rng)

    def check_derivatives(self, theta1_grid, theta2_grid, rtol=1e-6):
        """Compare hand-coded derivatives of G1, G2 with central differences.

        Returns the worst relative discrepancy seen; raises ``AssertionError``
        when it exceeds ``rtol``.
        """
        worst = 0.0
        for f, fp, fpp, grid in (
            (self.g1, self.g1_prime, self.g1_double_prime, theta1_grid),
            (self.g2, self.g2_prime, self.g2_double_prime, theta2_grid),
        ):
            for t in grid:
                t = float(t)
                # relative step keeps t +- h inside half-line domains
                h = 1e-5 * abs(t) if t != 0 else 1e-5
                d1 = (f(t + h) - f(t - h)) / (2 * h)
                d2 = (fp(t + h) - fp(t - h)) / (2 * h)
                for num, exact in ((d1, fp(t)), (d2, fpp(t))):
                    err = abs(num - exact) / max(abs(exact), 1e-300)
                    worst = max(worst, err)
        if worst > rtol:
            raise AssertionError(f"{self.name}: derivative mismatch {worst:.3g} > {rtol}")
        return worst


# -- standard two-parameter instances ---------------------------------------


def _h(t):
    return -t + t * np.log(-t) + special.gammaln(-t)


def _h_prime(t):
    return np.log(-t) - special.digamma(-t)


def _h_double_prime(t):
    return 1.0 / t + special.polygamma(1, -t)


def _normal_rvs(t1, t2, size, rng):
    return rng.normal(t2, math.sqrt(-0.5 / t1), size)


def _ig_rvs(t1, t2, size, rng):
    return rng.wald(t2, -2.0 * t1, size)


def _gamma_rvs(t1, t2, size, rng):
    alpha = -t1
    return rng.gamma(alpha, t2 / alpha, size)


def _inv_gamma_rvs(t1, t2, size, rng):
    alpha = -t1
    return 1.0 / rng.gamma(alpha, t2 / alpha, size)


_G1_LOG = dict(
    g1=lambda t: -0.5 * np.log(-2.0 * t),
    g1_prime=lambda t: -0.5 / t,
    g1_double_prime=lambda t: 0.5 / (t * t),
)
_G1_H = dict(g1=_h, g1_prime=_h_prime, g1_double_prime=_h_double_prime)
_G2_NEG_LOG = dict(
    g2=lambda t: -np.log(t),
    g2_prime=lambda t: -1.0 / t,
    g2_double_prime=lambda t: 1.0 / (t * t),
)

NORMAL = TwoParamExpFamily(
    name="normal",
    **_G1_LOG,
    g2=lambda t: t * t,
    g2_prime=lambda t: 2.0 * t,
    g2_double_prime=lambda t: 2.0 + 0.0 * t,
    u1=lambda x: x * x,
    u2=lambda x: x,
    theta2_domain=(-math.inf, math.inf),
    x_domain=(-math.inf, math.inf),
    to_natural=lambda mu, sigma2: (-0.5 / sigma2, mu),
    from_natural=lambda t1, t2: (t2, -0.5 / t1),
    # |d theta1 / d sigma2| = 1 / (2 sigma2^2) = 2 theta1^2
    log_jacobian=lambda t1, t2: math.log(2.0 * t1 * t1),
    familiar_names=("mu", "sigma2"),
    rvs=_normal_rvs,
    log_carrier=lambda x: -0.5 * np.log(2.0 * np.pi) + 0.0 * x,
)

# theta1 = -lambda/2, theta2 = mu (the mean); (mu, lambda) is the usual
# mean/shape parameterization of the Wald distribution.
INVERSE_GAUSSIAN = TwoParamExpFamily(
    name="inverse-gaussian",
    **_G1_LOG,
    g2=lambda t: 1.0 / t,
    g2_prime=lambda t: -1.0 / (t * t),
    g2_double_prime=lambda t: 2.0 / (t * t * t),
    u1=lambda x: 1.0 / x,
    u2=lambda x: x,
    theta2_domain=(0.0, math.inf),
    x_domain=(0.0, math.inf),
    to_natural=lambda mu, lam: (-0.5 * lam, mu),
    from_natural=lambda t1, t2: (t2, -2.0 * t1),
    log_jacobian=lambda t1, t2: math.log(0.5),
    familiar_names=("mu", "lambda"),
    rvs=_ig_rvs,
    log_carrier=lambda x: -0.5 * np.log(2.0 * np.pi * x**3),
)

GAMMA = TwoParamExpFamily(
    name="gamma",
    **_G1_H,
    **_G2_NEG_LOG,
    u1=lambda x: -np.log(x),
    u2=lambda x: x,
    theta2_domain=(0.0, math.inf),
    x_domain=(0.0, math.inf),
    to_natural=lambda alpha, mu: (-alpha, mu),
    from_natural=lambda t1, t2: (-t1, t2),
    log_jacobian=lambda t1, t2: 0.0,
    familiar_names=("alpha", "mu"),
    rvs=_gamma_rvs,
    log_carrier=lambda x: -np.log(x),
)

# mu here is E[1/X].
INVERSE_GAMMA = TwoParamExpFamily(
    name="inverse-gamma",
    **_G1_H,
    **_G2_NEG_LOG,
    u1=lambda x: np.log(x),
    u2=lambda x: 1.0 / x,
    theta2_domain=(0.0, math.inf),
    x_domain=(0.0, math.inf),
    to_natural=lambda alpha, mu: (-alpha, mu),
    from_natural=lambda t1, t2: (-t1, t2),
    log_jacobian=lambda t1, t2: 0.0,
    familiar_names=("alpha", "mu"),
    rvs=_inv_gamma_rvs,
    log_carrier=lambda x: -np.log(x),
)

TABLE1_INSTANCES = (NORMAL, INVERSE_GAUSSIAN, GAMMA, INVERSE_GAMMA)


# -- one-parameter models ----------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    """Bernoulli trials with success probability ``p``."""

    name: str = "bernoulli"
    dim: int = 1

    def check_theta(self, p) -> float:
        p = float(p)
        if not 0.0 < p < 1.0:
            raise DomainError(f"bernoulli: p={p!r} violates 0 < p < 1")
        return p

    def fisher_info(self, p) -> np.ndarray:
        p = self.check_theta(p)
        return np.array([[1.0 / (p * (1.0 - p))]])

    def log_likelihood(self, p, sample: "Sample") -> float:
        p = self.check_theta(p)
        s = float(np.sum(sample.values))
        return s * math.log(p) + (sample.n - s) * math.log1p(-p)

    def sample(self, p, size, rng):
        return (rng.random(size) < self.check_theta(p)).astype(float)


@dataclass(frozen=True)
class BrownianDrift:
    """Brownian motion with unknown drift and unit variance per unit time.

    A ``Sample`` for this model holds the increments over consecutive time
    steps of length ``dt``.
    """

    name: str = "brownian-drift"
    dim: int = 1
    dt: float = 1e-3

    def check_theta(self, theta) -> float:
        theta = float(theta)
        if not math.isfinite(theta):
            raise DomainError(f"brownian-drift: theta={theta!r} is not finite")
        return theta

    def fisher_info(self, theta) -> np.ndarray:
        self.check_theta(theta)
        return np.array([[1.0]])

    def log_likelihood(self, theta, sample: "Sample") -> float:
        theta = self.check_theta(theta)
        z = float(np.sum(sample.values))
        t = sample.n * self.dt
        return theta * z - 0.5 * theta * theta * t


BERNOULLI = Bernoulli()
BROWNIAN_DRIFT = BrownianDrift()


def fisher_info_bernoulli(p) -> float:
    return float(BERNOULLI.fisher_info(p)[0, 0])


# -- samples -----------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    """Observations with cached sufficient statistics.

    For the two-parameter family ``u1_mean``, ``u2_mean`` and ``y_n`` are
    filled in; for other models they are ``None``.
    """

    values: np.ndarray
    n: int
    u1_mean: float | None = None
    u2_mean: float | None = None
    y_n: float | None = None

    @classmethod
    def of(cls, model, values: Sequence[float]) -> "Sample":
        values = np.asarray(values, dtype=float)
        values.setflags(write=False)
        n = int(values.size)
        if n == 0:
            raise ValueError("empty sample")
        if isinstance(model, TwoParamExpFamily):
            model.check_x(values)
            m1 = float(np.mean(model.u1(values)))
            m2 = float(np.mean(model.u2(values)))
            return cls(values, n, m1, m2, m1 - float(model.g2(m2)))
        return cls(values, n)


def negbin_sample(r: int, n: int) -> Sample:
    """A Bernoulli record that stopped with the r-th success at trial n."""
    if n < r or r < 1:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    x = np.zeros(n)
    x[: r - 1] = 1.0
    x[-1] = 1.0
    return Sample.of(BERNOULLI, x)


# -- operations on the two-parameter family ---------------------------------


def log_density(model: TwoParamExpFamily, x, theta):
    """Log-density without the parameter-free carrier term ``log a(x)``."""
    t1, t2 = model.check_theta(theta)
    x = model.check_x(x)
    out = t1 * model.u1(x) - t1 * model.g2_prime(t2) * model.u2(x) - model.psi(t1, t2)
    return float(out) if np.ndim(out) == 0 else out


def log_likelihood(model, sample: Sample, theta) -> float:
    """Log-likelihood of ``theta`` up to a parameter-free constant."""
    if not isinstance(model, TwoParamExpFamily):
        return model.log_likelihood(theta, sample)
    t1, t2 = model.check_theta(theta)
    return sample.n * (
        t1 * sample.u1_mean - t1 * model.g2_prime(t2) * sample.u2_mean - model.psi(t1, t2)
    )


def fisher_info(model, theta) -> np.ndarray:
    return model.fisher_info(theta)


def bregman_i1(omega1, theta1, model: TwoParamExpFamily) -> float:
    """``G1(theta1) - G1(omega1) - G1'(omega1)(theta1 - omega1)``."""
    for t in (omega1, theta1):
        if not _in_open(t, model.theta1_domain) or not t < 0:
            raise DomainError(f"{model.name}: theta1={t!r} outside domain")
    g = model.g1
    return float(g(theta1) - g(omega1) - model.g1_prime(omega1) * (theta1 - omega1))


def bregman_i2(omega2, theta2, model: TwoParamExpFamily) -> float:
    """``G2(omega2) - G2(theta2) - G2'(theta2)(omega2 - theta2)``."""
    for t in (omega2, theta2):
        if not _in_open(t, model.theta2_domain):
            raise DomainError(f"{model.name}: theta2={t!r} outside domain")
    g = model.g2
    return float(g(omega2) - g(theta2) - model.g2_prime(theta2) * (omega2 - theta2))


def mle(model: TwoParamExpFamily, sample: Sample, xtol=1e-10) -> ParamPoint:
    """Maximum likelihood estimate of ``(theta1, theta2)``.

    ``theta2`` is the mean of ``U2``; ``theta1`` solves ``Y_n = G1'(theta1)``
    by bracketing from ``theta1 = -1`` with geometric expansion followed by
    Brent's method.

    Raises
    ------
    MLEUndefinedError
        If ``Y_n`` is not in the range of ``G1'`` or the ``U2`` mean is not
        in the ``theta2`` domain.
    """
    y, m2 = sample.y_n, sample.u2_mean
    if not _in_open(m2, model.theta2_domain):
        raise MLEUndefinedError(f"MLE undefined: U2 mean {m2!r} outside theta2 domain")

    def f(t):
        return model.g1_prime(t) - y

    lo_dom, _ = model.theta1_domain
    hi = lo = -1.0
    if f(-1.0) < 0:
        # G1' increasing: move toward 0
        for _ in range(1100):
            hi *= 0.5
            if hi == 0.0:
                break
            if f(hi) >= 0:
                break
        if hi == 0.0 or not f(hi) >= 0:
            raise MLEUndefinedError(f"MLE undefined: Y_n={y!r} above the range of G1'")
        lo = 2.0 * hi
    else:
        for _ in range(1100):
            lo *= 2.0
            if not lo > lo_dom or not math.isfinite(lo):
                break
            if f(lo) <= 0:
                break
        if not (lo > lo_dom and math.isfinite(lo) and f(lo) <= 0):
            raise MLEUndefinedError(f"MLE undefined: Y_n={y!r} below the range of G1'")
        hi = 0.5 * lo
    if f(lo) == 0:
        return ParamPoint(lo, m2)
    if f(hi) == 0:
        return ParamPoint(hi, m2)
    t1 = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return ParamPoint(float(t1), m2)


def signed_roots(model: TwoParamExpFamily, sample: Sample, theta) -> tuple[float, float]:
    """Signed square roots ``(z1, z2)`` of the two log-likelihood-ratio parts.

    ``(z1**2 + z2**2) / 2`` equals ``l_n(mle) - l_n(theta)``.
    """
    t1, t2 = model.check_theta(theta)
    h1, h2 = mle(model, sample)
    n = sample.n
    z1 = math.sqrt(max(2.0 * n * bregman_i1(h1, t1, model), 0.0)) * np.sign(t1 - h1)
    z2 = math.sqrt(max(-2.0 * n * t1 * bregman_i2(h2, t2, model), 0.0)) * np.sign(t2 - h2)
    return float(z1), float(z2)


def _require_normal(model):
    if model is not NORMAL and getattr(model, "name", None) != "normal":
        raise UnsupportedOperation(f"defined for the normal model only, got {model.name}")


def rho_sq(theta, model: TwoParamExpFamily = NORMAL) -> float:
    """``G1(t1) - G1(-1/2) - G1'(-1/2)(t1 + 1/2) - t1 t2^2`` for the normal model."""
    _require_normal(model)
    t1, t2 = model.check_theta(theta)
    return float(
        model.g1(t1) - model.g1(-0.5) - model.g1_prime(-0.5) * (t1 + 0.5) - t1 * t2 * t2
    )


def rho_sq_closed_form(mu, sigma2) -> float:
    return ((mu * mu + 1.0) / sigma2 + math.log(sigma2) - 1.0) / 2.0


def lrt_drift(theta, model: TwoParamExpFamily = NORMAL) -> float:
    """Per-observation drift of half the N(0, 1) likelihood-ratio statistic.

    Equals KL(N(mu, sigma2) || N(0, 1)) = (sigma2 + mu^2 - 1 - log sigma2) / 2,
    i.e. ``I1(t1, -1/2) + t2^2 / 2`` in natural coordinates.
    """
    _require_normal(model)
    t1, t2 = model.check_theta(theta)
    return bregman_i1(t1, -0.5, model) + 0.5 * t2 * t2
