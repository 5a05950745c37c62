"""Reproduction harnesses: negative-binomial coverage of one-sided credible
sets, the ``E sqrt N`` versus ``sqrt E N`` comparison, posterior density
comparisons and the Brownian-exit prior curve.

Coverage convention
-------------------
For a prior and true ``p`` the reported pair is

    ``C(alpha) = sum_k P_p(N_r = k) 1{p <= q_alpha(k)}``,  alpha = 0.05, 0.95,

where ``q_alpha(k)`` is the posterior ``alpha``-quantile after the r-th
success at trial ``k``.  ``C(alpha)`` is the frequentist probability that
the one-sided credible set ``(0, q_alpha]`` contains ``p``; a matching prior
gives ``C(alpha) ~ alpha``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .inference import QuadratureTable, negbin_conjugate_posterior
from .prior import PriorKind
from .special import betaincinv
from .stopping import (
    NegBin,
    brownian_exit_mean,
    negbin_pmf,
    negbin_sqrt_series,
    negbin_sqrt_transform,
    negbin_tail_k,
    simulate_stops,
)

__all__ = [
    "SCHEMA_VERSION",
    "TABLE2_R",
    "TABLE2_P",
    "TABLE2_PRIORS",
    "TABLE2_PUBLISHED",
    "CoverageMethod",
    "CoverageReport",
    "table2_cell",
    "table2",
    "coverage_monte_carlo",
    "table2_json",
    "figure1_data",
    "max_relative_gap",
    "Figure2Data",
    "figure2_data",
    "brownian_prior_curve",
    "tail_slope",
    "format_number",
    "rows_to_csv",
]

SCHEMA_VERSION = 1

TABLE2_R = (2, 8, 30)
TABLE2_P = (0.1, 0.5, 0.9)
TABLE2_PRIORS = (
    PriorKind.JEFFREYS_FIXED,
    PriorKind.REFERENCE_SEQUENTIAL,
    PriorKind.APPROX_SQRT_N,
)

# published (5%, 95%) coverage, keyed by (r, p, prior kind)
_J, _R, _M = TABLE2_PRIORS
TABLE2_PUBLISHED = {
    (2, 0.1, _J): (0.1142, 0.9738), (2, 0.1, _R): (0.0516, 0.9511), (2, 0.1, _M): (0.0487, 0.9509),
    (2, 0.5, _J): (0.0002, 0.9652), (2, 0.5, _R): (0.0010, 0.9381), (2, 0.5, _M): (0.0008, 0.9455),
    (2, 0.9, _J): (0.0001, 0.9724), (2, 0.9, _R): (0.0003, 0.9700), (2, 0.9, _M): (0.0000, 0.9729),
    (8, 0.1, _J): (0.0751, 0.9642), (8, 0.1, _R): (0.0474, 0.9498), (8, 0.1, _M): (0.0465, 0.9534),
    (8, 0.5, _J): (0.0552, 0.9688), (8, 0.5, _R): (0.0522, 0.9536), (8, 0.5, _M): (0.0568, 0.9517),
    (8, 0.9, _J): (0.0000, 0.9307), (8, 0.9, _R): (0.0001, 0.9310), (8, 0.9, _M): (0.0002, 0.9339),
    (30, 0.1, _J): (0.0617, 0.9571), (30, 0.1, _R): (0.0508, 0.9497), (30, 0.1, _M): (0.0516, 0.9523),
    (30, 0.5, _J): (0.0556, 0.9594), (30, 0.5, _R): (0.0512, 0.9495), (30, 0.5, _M): (0.0525, 0.9503),
    (30, 0.9, _J): (0.0426, 0.9369), (30, 0.9, _R): (0.0438, 0.9410), (30, 0.9, _M): (0.0442, 0.9368),
}

LEVELS = (0.05, 0.95)
DEFAULT_TAIL = 1e-8
DEFAULT_GRID = 4096


def format_number(x, digits: int = 17) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{digits}g}"
    return str(x)


def rows_to_csv(header, rows, digits: int = 17) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v, digits) for v in row])
    return buf.getvalue()


# -- coverage -----------------------------------------------------------------


class CoverageMethod(str, enum.Enum):
    EXACT_SERIES = "exact-series"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class CoverageReport:
    r: int
    p: float
    prior_kind: PriorKind
    coverage_lower_5: float
    coverage_upper_95: float
    method: CoverageMethod
    truncation_k: int | None = None
    tail_bound: float | None = None
    replicates: int | None = None
    se_lower_5: float | None = None
    se_upper_95: float | None = None

    HEADER = (
        "r", "p", "prior", "coverage_lower_5", "coverage_upper_95", "method",
        "truncation_k", "tail_bound", "replicates", "se_lower_5", "se_upper_95",
    )

    def row(self):
        return (
            self.r, self.p, self.prior_kind.value, self.coverage_lower_5, self.coverage_upper_95,
            self.method.value, _blank(self.truncation_k), _blank(self.tail_bound),
            _blank(self.replicates), _blank(self.se_lower_5), _blank(self.se_upper_95),
        )

    def to_dict(self):
        d = asdict(self)
        d["prior_kind"] = self.prior_kind.value
        d["method"] = self.method.value
        return d


def _blank(x):
    return "" if x is None else x


def _check_cell(r, p, prior_kind):
    kind = PriorKind(prior_kind)
    if kind not in TABLE2_PRIORS:
        allowed = ", ".join(k.value for k in TABLE2_PRIORS)
        raise ValueError(f"coverage supports priors {allowed}; got {kind.value}")
    if int(r) != r or r < 1:
        raise ValueError(f"r must be a positive integer, got {r!r}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    return int(r), float(p), kind


def _grid(n_grid):
    return (np.arange(n_grid) + 0.5) / n_grid


@lru_cache(maxsize=32)
def _sqrt_prior_grid(r: int, n_grid: int) -> np.ndarray:
    """Log of ``E_p sqrt(N_r / r) pi_J(p)`` on the half-offset grid.

    Same values as the ``approx-sqrt`` :class:`PriorSpec`, evaluated for the
    whole grid at once.
    """
    p = _grid(n_grid)
    e_sqrt = negbin_sqrt_transform(r, p) / math.sqrt(r)
    return np.log(e_sqrt) - 0.5 * (np.log(p) + np.log1p(-p))


def posterior_quantiles(r: int, k_values, prior_kind, levels=LEVELS, n_grid: int = DEFAULT_GRID):
    """Posterior quantiles after the r-th success at each trial in ``k_values``.

    Returns an array of shape ``(len(k_values), len(levels))``.  Beta closed
    forms for the fixed Jeffreys and sequential reference priors, grid
    quadrature for the ``E sqrt N`` prior.
    """
    kind = PriorKind(prior_kind)
    k_values = np.asarray(k_values, dtype=int)
    levels = np.asarray(levels, dtype=float)
    if kind is PriorKind.APPROX_SQRT_N:
        u = _grid(n_grid)
        log_prior = _sqrt_prior_grid(r, n_grid)
        log_u, log_1mu = np.log(u), np.log1p(-u)
        out = np.empty((k_values.size, levels.size))
        for i, k in enumerate(k_values):
            table = QuadratureTable.from_log_values(u, log_prior + r * log_u + (k - r) * log_1mu)
            out[i] = table.quantile(levels)
        return out
    post = [negbin_conjugate_posterior(kind, r, int(k)) for k in k_values]
    a = np.array([b.a for b in post])[:, None]
    b = np.array([b.b for b in post])[:, None]
    return betaincinv(a, b, levels[None, :])


@lru_cache(maxsize=64)
def _cached_quantiles(r, k_max, kind, n_grid):
    q = posterior_quantiles(r, np.arange(r, k_max + 1), kind, LEVELS, n_grid)
    q.setflags(write=False)
    return q


def table2_cell(r, p, prior_kind, tail: float = DEFAULT_TAIL, n_grid: int = DEFAULT_GRID) -> CoverageReport:
    """Coverage of the one-sided 5% and 95% sets by exact enumeration over k.

    The sum runs to the smallest ``K`` with ``P(N_r > K) < tail``; the
    omitted mass is reported as ``tail_bound``.
    """
    r, p, kind = _check_cell(r, p, prior_kind)
    if not 0.0 < tail < 1.0:
        raise ValueError("tail must lie in (0, 1)")
    k_max = negbin_tail_k(r, p, tail)
    # share one quantile table across cells with the same r by rounding K up
    k_table = max(k_max, 1 << max(0, (k_max - 1).bit_length()))
    q = _cached_quantiles(r, k_table, kind, n_grid)[: k_max - r + 1]
    k = np.arange(r, k_max + 1)
    w = negbin_pmf(k, r, p)
    lower, upper = (math.fsum(w[p <= q[:, j]]) for j in range(2))
    omitted = max(0.0, 1.0 - math.fsum(w))
    return CoverageReport(
        r, p, kind, lower, upper, CoverageMethod.EXACT_SERIES,
        truncation_k=int(k_max), tail_bound=float(omitted),
    )


def table2(threads: int = 1, tail: float = DEFAULT_TAIL, n_grid: int = DEFAULT_GRID) -> list[CoverageReport]:
    """All 27 cells in (r, p, prior) order."""
    cells = [(r, p, kind) for r in TABLE2_R for p in TABLE2_P for kind in TABLE2_PRIORS]
    if threads <= 1:
        return [table2_cell(*c, tail=tail, n_grid=n_grid) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: table2_cell(*c, tail=tail, n_grid=n_grid), cells))


def coverage_monte_carlo(r, p, prior_kind, replicates: int = 100_000, seed=None,
                         n_grid: int = DEFAULT_GRID) -> CoverageReport:
    """Coverage estimated from simulated experiments, as a cross-check."""
    r, p, kind = _check_cell(r, p, prior_kind)
    times, capped = simulate_stops(NegBin(r), p, replicates, seed)
    if capped.any():
        raise ArithmeticError("simulated stopping time hit the cap")
    ks, counts = np.unique(times, return_counts=True)
    q = posterior_quantiles(r, ks, kind, LEVELS, n_grid)
    cov = [float(np.sum(counts[p <= q[:, j]])) / replicates for j in range(2)]
    se = [math.sqrt(c * (1.0 - c) / replicates) for c in cov]
    return CoverageReport(
        r, p, kind, cov[0], cov[1], CoverageMethod.MONTE_CARLO,
        replicates=int(replicates), se_lower_5=se[0], se_upper_95=se[1],
    )


def table2_json(reports, tail: float = DEFAULT_TAIL, extra: dict | None = None) -> str:
    """Schema-versioned JSON bundle of coverage reports plus the published values."""
    cells = []
    for rep in reports:
        d = rep.to_dict()
        pub = TABLE2_PUBLISHED.get((rep.r, rep.p, rep.prior_kind))
        d["published"] = None if pub is None else {"lower_5": pub[0], "upper_95": pub[1]}
        cells.append(d)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "coverage",
        "convention": "C(alpha) = P_p(p <= posterior alpha-quantile), alpha in {0.05, 0.95}",
        "tail_tolerance": tail,
        "cells": cells,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=False)


# -- E sqrt N versus sqrt E N --------------------------------------------------


@dataclass(frozen=True)
class Figure1Row:
    r: int
    p: float
    sqrt_of_e: float
    e_of_sqrt: float

    HEADER = ("r", "p", "sqrt_of_E", "E_of_sqrt")


def figure1_data(r_values=(1, 9), p_grid=None) -> list[Figure1Row]:
    """``sqrt(E_p(N_r / r))`` and ``E_p sqrt(N_r / r)`` sorted by (r, p)."""
    if p_grid is None:
        p_grid = np.linspace(0.05, 0.95, 91)
    rows = []
    for r in sorted(int(v) for v in r_values):
        for p in sorted(float(v) for v in p_grid):
            if not 0.0 < p <= 1.0:
                raise ValueError(f"p must lie in (0, 1], got {p!r}")
            rows.append(Figure1Row(r, p, math.sqrt(1.0 / p), negbin_sqrt_series(r, p) / math.sqrt(r)))
    return rows


def max_relative_gap(rows, r: int) -> float:
    """``max_p |E sqrt - sqrt E| / sqrt E`` over the rows for one ``r``."""
    gaps = [abs(x.e_of_sqrt - x.sqrt_of_e) / x.sqrt_of_e for x in rows if x.r == r]
    if not gaps:
        raise ValueError(f"no rows for r={r}")
    return max(gaps)


# -- posterior density comparison ------------------------------------------------


@dataclass(frozen=True)
class Figure2Data:
    """Normalized posterior densities of ``p`` on a common half-offset grid."""

    r: int
    n_obs: int
    p: np.ndarray
    densities: dict = field(default_factory=dict)

    HEADER = ("p", "pi_J", "pi_R_star", "pi_M")

    def rows(self):
        cols = [self.densities[k] for k in TABLE2_PRIORS]
        return [(x, *vals) for x, *vals in zip(self.p, *cols)]

    def _pair(self, a, b):
        return self.densities[PriorKind(a)], self.densities[PriorKind(b)]

    def total_variation(self, a, b) -> float:
        f, g = self._pair(a, b)
        h = 1.0 / self.p.size
        return 0.5 * float(np.sum(np.abs(f - g))) * h

    def sup_gap(self, a, b) -> float:
        """``max |f - g|`` relative to the larger of the two peaks."""
        f, g = self._pair(a, b)
        return float(np.max(np.abs(f - g)) / max(f.max(), g.max()))


def figure2_data(r: int, n_obs: int, n_grid: int = DEFAULT_GRID) -> Figure2Data:
    """Posterior densities under the fixed Jeffreys, sequential reference and
    ``E sqrt N`` priors after the r-th success at trial ``n_obs``."""
    if n_obs < r:
        raise ValueError(f"n_obs={n_obs} < r={r}: the r-th success cannot occur before trial r")
    u = _grid(n_grid)
    dens = {}
    for kind in TABLE2_PRIORS[:2]:
        dens[kind] = negbin_conjugate_posterior(kind, r, n_obs).pdf(u)
    log_f = _sqrt_prior_grid(int(r), n_grid) + r * np.log(u) + (n_obs - r) * np.log1p(-u)
    dens[PriorKind.APPROX_SQRT_N] = QuadratureTable.from_log_values(u, log_f).density
    return Figure2Data(int(r), int(n_obs), u, dens)


# -- Brownian exit prior -------------------------------------------------------


@dataclass(frozen=True)
class BrownianRow:
    theta: float
    expected_t: float
    prior: float

    HEADER = ("theta", "E_T", "sqrt_E_T")


def brownian_prior_curve(a: float, b: float, theta_grid) -> list[BrownianRow]:
    """``E_theta(T_ab)`` and the sequential prior ``sqrt(E_theta(T_ab))``."""
    if not a < 0.0 < b:
        raise ValueError(f"need a < 0 < b, got a={a!r}, b={b!r}")
    rows = []
    for t in theta_grid:
        e = brownian_exit_mean(float(t), a, b)
        rows.append(BrownianRow(float(t), e, math.sqrt(e)))
    return rows


def tail_slope(a: float = -1.0, b: float = 1.0, lo: float = 20.0, hi: float = 100.0, n: int = 81) -> float:
    """Least-squares log-log slope of the Brownian prior over ``[lo, hi]``."""
    theta = np.geomspace(lo, hi, n)
    prior = np.array([row.prior for row in brownian_prior_curve(a, b, theta)])
    return float(np.polyfit(np.log(theta), np.log(prior), 1)[0])
