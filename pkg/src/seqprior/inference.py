"""Posterior targets, conjugate negative-binomial posteriors, grid quadrature
and one-sided credible bounds."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betaln

from .model import Sample, log_likelihood
from .prior import PriorKind, PriorSpec
from .special import betainc, betaincinv

__all__ = [
    "PosteriorTarget",
    "BetaPosterior",
    "QuadratureTable",
    "CredibleBound",
    "Side",
    "BoundMethod",
    "negbin_conjugate_posterior",
    "quadrature_posterior",
    "credible_bound",
    "LOGIT",
]


@dataclass(frozen=True)
class PosteriorTarget:
    """``log prior(theta) + sum_i log f(x_i | theta)`` for observed data."""

    prior: PriorSpec
    model: object
    data: Sample

    @property
    def n(self) -> int:
        return self.data.n

    def log_prior(self, theta) -> float:
        return self.prior.log_eval(theta)

    def log_likelihood(self, theta) -> float:
        return log_likelihood(self.model, self.data, theta)

    def log_target(self, theta) -> float:
        return self.log_prior(theta) + self.log_likelihood(theta)

    __call__ = log_target


@dataclass(frozen=True)
class BetaPosterior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got ({self.a}, {self.b})")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (self.a - 1) * np.log(x) + (self.b - 1) * np.log1p(-x) - betaln(self.a, self.b)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return betainc(self.a, self.b, x)

    def quantile(self, level):
        return betaincinv(self.a, self.b, level)

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


def negbin_conjugate_posterior(prior_kind, r: int, n_obs: int) -> BetaPosterior:
    """Beta posterior of ``p`` after the r-th success at trial ``n_obs``.

    The likelihood is ``p^r (1-p)^(n-r)``.  ``pi_J ~ p^-1/2 (1-p)^-1/2``
    gives ``Beta(r + 1/2, n - r + 1/2)``; the sequential Jeffreys/reference
    prior ``pi*_R ~ p^-1 (1-p)^-1/2`` gives ``Beta(r, n - r + 1/2)``.
    """
    if n_obs < r:
        raise ValueError(f"n_obs={n_obs} < r={r}: the r-th success cannot occur before trial r")
    kind = PriorKind(prior_kind)
    if kind is PriorKind.JEFFREYS_FIXED:
        return BetaPosterior(r + 0.5, n_obs - r + 0.5)
    if kind in (PriorKind.JEFFREYS_SEQUENTIAL, PriorKind.REFERENCE_SEQUENTIAL):
        return BetaPosterior(float(r), n_obs - r + 0.5)
    raise ValueError(f"no conjugate posterior for prior kind {kind.value}")


class _Transform:
    """Monotone map ``u in (0, 1) -> theta`` with its log-Jacobian."""

    def __init__(self, forward, log_jac, name):
        self.forward = forward
        self.log_jac = log_jac
        self.name = name


LOGIT = _Transform(
    lambda u: np.log(u) - np.log1p(-u),
    lambda u: -np.log(u) - np.log1p(-u),
    "logit",
)


@dataclass(frozen=True)
class QuadratureTable:
    """Normalized posterior tabulated on a grid.

    ``coordinate`` holds parameter values at the grid nodes, ``density`` the
    normalized density with respect to that coordinate, ``cdf`` the
    cumulative probability at each node and ``mass`` the probability
    attributed to each node's cell.  ``u_nodes`` / ``u_cdf`` extend the CDF
    to the end points of the (0, 1) working coordinate; quantiles are
    interpolated there and mapped through ``forward``.
    """

    coordinate: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    mass: np.ndarray
    u_nodes: np.ndarray
    u_cdf: np.ndarray
    forward: Callable | None = None

    @classmethod
    def from_log_values(cls, u, log_f, coordinate=None, log_jac=None, forward=None):
        """Build a table from log density values at half-step-offset nodes.

        Trapezoid rule between nodes; the two half cells next to 0 and 1 use
        the density at the nearest node.  ``log_jac`` is the log-Jacobian of
        the working-to-parameter map, when the density is with respect to
        the parameter.
        """
        u = np.asarray(u, dtype=float)
        log_f = np.asarray(log_f, dtype=float)
        bad = ~np.isfinite(log_f)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ArithmeticError(f"non-finite log target at grid point u={float(u[i])!r}")
        if log_jac is not None:
            log_f = log_f + log_jac
        h = u[1] - u[0]
        f = np.exp(log_f - log_f.max())
        inner = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
        cdf = np.concatenate([[0.5 * h * f[0]], 0.5 * h * f[0] + inner])
        total = cdf[-1] + 0.5 * h * f[-1]
        cdf /= total
        f_u = f / total
        density = f_u if log_jac is None else f_u * np.exp(-np.asarray(log_jac))
        coord = u if coordinate is None else np.asarray(coordinate, dtype=float)
        u_nodes = np.concatenate([[0.0], u, [1.0]])
        u_cdf = np.concatenate([[0.0], cdf, [1.0]])
        return cls(coord, density, cdf, f_u * h, u_nodes, u_cdf, forward)

    def quantile(self, level):
        uq = np.interp(np.asarray(level, dtype=float), self.u_cdf, self.u_nodes)
        out = uq if self.forward is None else self.forward(uq)
        return float(out) if np.ndim(out) == 0 else out

    def cdf_at(self, x):
        if self.forward is not None:
            raise NotImplementedError("cdf_at is defined for untransformed tables")
        return np.interp(x, self.u_nodes, self.u_cdf)

    @property
    def mean(self) -> float:
        return float(np.sum(self.coordinate * self.mass))

    def to_csv(self, digits: int = 17) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["coordinate", "density", "cdf"])
        for c, d, F in zip(self.coordinate, self.density, self.cdf):
            w.writerow([f"{c:.{digits}g}", f"{d:.{digits}g}", f"{F:.{digits}g}"])
        return buf.getvalue()


def _grid(n_grid):
    return (np.arange(n_grid) + 0.5) / n_grid


def quadrature_posterior(target, n_grid: int = 4096, transform: _Transform | None = None):
    """Normalize a one-dimensional posterior on a uniform grid.

    ``target`` is a :class:`PosteriorTarget` or any callable returning the
    unnormalized log density.  Without ``transform`` the parameter must live
    in (0, 1); otherwise ``transform.forward`` maps the (0, 1) working
    coordinate onto the parameter space (e.g. :data:`LOGIT` for the real
    line) and the grid is uniform in the working coordinate.
    """
    u = _grid(n_grid)
    if transform is None:
        theta = u
        log_jac = None
    else:
        theta = transform.forward(u)
        log_jac = transform.log_jac(u)
    log_f = np.array([target(float(t)) for t in theta])
    return QuadratureTable.from_log_values(
        u, log_f, coordinate=theta, log_jac=log_jac,
        forward=None if transform is None else transform.forward,
    )


class Side(str, enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


class BoundMethod(str, enum.Enum):
    BETA_CLOSED_FORM = "beta-closed-form"
    QUADRATURE = "quadrature"
    MCMC = "mcmc"


@dataclass(frozen=True)
class CredibleBound:
    level: float
    side: Side
    value: float
    method: BoundMethod


def credible_bound(target, level: float, side) -> CredibleBound:
    """Posterior quantile at ``level`` reported as a one-sided bound.

    A lower bound at level ``alpha`` is ``q(alpha)``: the set ``{theta >
    q(alpha)}`` has posterior mass ``1 - alpha``.  An upper bound at level
    ``1 - alpha`` is ``q(1 - alpha)``.  ``target`` may be a
    :class:`BetaPosterior`, a :class:`QuadratureTable` or an array of
    posterior draws (e.g. a chain).
    """
    side = Side(side)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level!r}")
    if isinstance(target, BetaPosterior):
        return CredibleBound(level, side, float(target.quantile(level)), BoundMethod.BETA_CLOSED_FORM)
    if isinstance(target, QuadratureTable):
        return CredibleBound(level, side, float(target.quantile(level)), BoundMethod.QUADRATURE)
    draws = getattr(target, "draws", target)
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 1 or draws.size == 0:
        raise ValueError("expected a one-dimensional, non-empty array of draws")
    return CredibleBound(level, side, float(np.quantile(draws, level)), BoundMethod.MCMC)
