"""Command-line interface.

Every output starts with a provenance record (package version, seed and the
full resolved configuration).  ``--replay FILE`` reruns the configuration
recorded in an output and checks that the output is reproduced exactly.

Configuration can also come from a key-value file passed with ``--config``::

    # table2.cfg
    subcommand = coverage
    all = true
    format = json

Keys are the long option names (dashes or underscores).  Flags given on the
command line override file values.

Exit status: 0 on success, 1 when a replay does not match, 2 for invalid
configuration and 3 for numerical failures.  Errors are reported on one
line as ``seqprior: error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import (
    TABLE2_PRIORS,
    BrownianRow,
    CoverageReport,
    Figure1Row,
    Figure2Data,
    brownian_prior_curve,
    coverage_monte_carlo,
    figure1_data,
    figure2_data,
    format_number,
    max_relative_gap,
    rows_to_csv,
    table2,
    table2_cell,
    table2_json,
    tail_slope,
)
from .inference import PosteriorTarget
from .model import (
    BERNOULLI,
    BROWNIAN_DRIFT,
    GAMMA,
    INVERSE_GAMMA,
    INVERSE_GAUSSIAN,
    NORMAL,
    MLEUndefinedError,
    Sample,
    TwoParamExpFamily,
    negbin_sample,
)
from .prior import PriorKind, PriorSpec, to_familiar
from .sampler import (
    SamplerConfig,
    brute_force_metropolis,
    chain_diagnostics,
    fixed_posterior_proposal,
    latent_variable_metropolis,
    modified_sqrt_metropolis,
)
from .stopping import (
    BoseBoukai,
    BrownianExit,
    CapExceeded,
    FixedN,
    NegBin,
    WoodroofeLRT,
    expected_n,
    expected_sqrt_n,
    simulate_stops,
)

__all__ = ["main", "RunConfig", "run"]

MODELS = {
    "bernoulli": BERNOULLI,
    "brownian": BROWNIAN_DRIFT,
    "normal": NORMAL,
    "inverse-gaussian": INVERSE_GAUSSIAN,
    "gamma": GAMMA,
    "inverse-gamma": INVERSE_GAMMA,
}
RULES = ("negbin", "brownian", "bose-boukai", "woodroofe", "fixed")
ALGORITHMS = {
    "brute-force": brute_force_metropolis,
    "latent": latent_variable_metropolis,
    "sqrt": modified_sqrt_metropolis,
}
COMMANDS = ("prior-eval", "stop-sim", "expected-n", "sample", "coverage", "figures")
# options that never affect the computed output
_NOT_ECHOED = {"config", "out", "replay"}


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


class ReplayMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # --r must never be read as an abbreviation of --replay
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


# -- argument parsing -----------------------------------------------------------


def _common(p):
    g = p.add_argument_group("run")
    g.add_argument("--config", metavar="FILE", help="key = value configuration file")
    g.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=1, help="worker threads for independent cells")


def _rule_args(p, required=False):
    g = p.add_argument_group("model and stopping rule")
    g.add_argument("--model", choices=sorted(MODELS), help="parametric model (default depends on the rule)")
    g.add_argument("--rule", choices=RULES, required=required)
    g.add_argument("--r", type=int, help="negbin: successes to wait for")
    g.add_argument("--a", type=float, help="brownian: lower barrier; bose-boukai/woodroofe: boundary scale")
    g.add_argument("--b", type=float, help="brownian: upper barrier")
    g.add_argument("--b1", type=float, help="woodroofe: floor multiplier")
    g.add_argument("--b2", type=float, help="woodroofe: truncation multiplier")
    g.add_argument("--m0", type=int, default=2, help="bose-boukai: initial sample size")
    g.add_argument("--n", type=int, help="fixed: sample size; sample with negbin: observed trials")
    g.add_argument("--dt", type=float, default=1e-3, help="brownian: Euler step")
    g.add_argument("--n-max", type=int, default=10**7, help="cap on simulated stopping times")


def _theta_args(p):
    p.add_argument("--theta", "--p", dest="theta", help="parameter value, 'x' or 'theta1,theta2'")
    p.add_argument("--familiar", action="store_true",
                   help="interpret two-parameter values in the model's conventional coordinates")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="seqprior",
        description="Objective priors under sequential stopping rules.",
        epilog="Run 'seqprior <command> --help' for the options of each command.",
    )
    parser.add_argument("--version", action="version", version=f"seqprior {__version__}")
    parser.add_argument("--replay", metavar="FILE", help="rerun the configuration recorded in FILE and compare")
    parser.add_argument("--config", metavar="FILE", help="configuration file naming the subcommand")
    sub = parser.add_subparsers(dest="subcommand", metavar="command")

    p = sub.add_parser("prior-eval", help="tabulate a prior over a grid")
    _common(p)
    _rule_args(p)
    p.add_argument("--prior", required=True, choices=[k.value for k in PriorKind])
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--vary", type=int, choices=(1, 2), default=1, help="coordinate varied (two-parameter models)")
    p.add_argument("--fixed", type=float, help="value of the other coordinate (two-parameter models)")
    p.add_argument("--familiar", action="store_true",
                   help="grid and density in the model's conventional coordinates")
    p.add_argument("--replicates", type=int, default=10_000, help="Monte Carlo size for E[N]")

    p = sub.add_parser("stop-sim", help="simulate stopping times")
    _common(p)
    _rule_args(p, required=True)
    _theta_args(p)
    p.add_argument("--replicates", type=int, default=1_000)

    p = sub.add_parser("expected-n", help="E[N] and E[sqrt N], closed form or Monte Carlo")
    _common(p)
    _rule_args(p, required=True)
    _theta_args(p)
    p.add_argument("--quantity", choices=("n", "sqrt", "both"), default="both")
    p.add_argument("--monte-carlo", action="store_true", help="simulate even when a closed form exists")
    p.add_argument("--replicates", type=int, default=100_000)

    p = sub.add_parser("sample", help="run one of the three Metropolis samplers")
    _common(p)
    _rule_args(p, required=True)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--data", metavar="FILE", help="observations, one per line (not needed for negbin)")
    p.add_argument("--prior-fixed", choices=("jeffreys-fixed", "reference-fixed"), default="jeffreys-fixed",
                   help="fixed-sample prior pi_F")
    p.add_argument("--iters", type=int, default=11_000)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--psi", default="identity", help="identity, sqrt or a power (brute force)")
    p.add_argument("--e-n-replicates", type=int, default=1_000)
    p.add_argument("--inner-steps", type=int, default=50)
    p.add_argument("--init", help="starting point for the random-walk proposal")
    p.add_argument("--step", type=float, default=0.1, help="random-walk proposal scale")
    p.add_argument("--paper-literal-ratio", dest="literal_ratio", action="store_true",
                   help="use the reciprocal acceptance ratio (comparison runs only)")

    p = sub.add_parser("coverage", help="coverage of one-sided credible sets for negbin")
    _common(p)
    p.add_argument("--r", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--prior", choices=[k.value for k in TABLE2_PRIORS])
    p.add_argument("--all", action="store_true", help="the full 3 x 3 x 3 grid")
    p.add_argument("--method", choices=("exact", "monte-carlo"), default="exact")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--tail", type=float, default=1e-8)
    p.add_argument("--grid-points", type=int, default=4096)

    p = sub.add_parser("figures", help="plot-ready data")
    _common(p)
    p.add_argument("--which", choices=("figure1", "figure2", "brownian"), required=True)
    p.add_argument("--r-values", default="1,9", help="figure1: comma-separated r")
    p.add_argument("--r", type=int, default=2, help="figure2: successes")
    p.add_argument("--n", type=int, default=5, help="figure2: observed trials")
    p.add_argument("--a", type=float, default=-1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--grid-points", type=int, default=4096)
    return parser


def _read_config(path) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc.message.splitlines()[0]}") from None
    return {k.replace("_", "-"): v for k, v in cp["run"].items()}


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _config_tokens(values: dict, parser) -> list[str]:
    flags = {}
    for action in parser._actions:
        for s in action.option_strings:
            flags[s] = action
    tokens = []
    for key, value in values.items():
        flag = "--" + key
        action = flags.get(flag)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:
            v = value.strip().lower()
            if v in _TRUE:
                tokens.append(flag)
            elif v not in _FALSE:
                raise UsageError(f"config key {key!r} expects true/false, got {value!r}")
        else:
            tokens += [flag, value]
    return tokens


def parse_args(argv):
    parser = build_parser()
    argv = list(argv)
    pre, _ = _peek(parser, argv)
    if pre.replay:
        return parser, pre
    file_values = {}
    config_path = pre.config or _sub_config(argv)
    if config_path:
        file_values = _read_config(config_path)
    sub = pre.subcommand or file_values.pop("subcommand", None)
    file_values.pop("subcommand", None)
    if sub is None:
        raise UsageError("no command given; choose one of " + ", ".join(COMMANDS))
    if sub not in COMMANDS:
        raise UsageError(f"unknown command {sub!r}")
    subparser = _subparsers(parser)[sub]
    rest = list(argv)
    if pre.subcommand:
        rest.remove(sub)
    rest = _drop_top_config(rest)
    args = parser.parse_args([sub, *_config_tokens(file_values, subparser), *rest])
    return parser, args


def _peek(parser, argv):
    # find the subcommand and top-level options without failing on
    # required sub-options that may still come from a config file
    top = _Parser(add_help=False)
    top.add_argument("--replay")
    top.add_argument("--config")
    top.add_argument("--version", action="store_true")
    ns, rest = top.parse_known_args(argv)
    if ns.version:
        parser.parse_args(["--version"])
    sub = next((t for t in rest if t in COMMANDS), None)
    if sub is None:
        # with a config file the command may come from the file, and the
        # remaining tokens are sub-options with their values
        if ns.config is None and rest and not rest[0].startswith("-"):
            raise UsageError(f"unknown command {rest[0]!r}")
        if "-h" in rest or "--help" in rest:
            parser.parse_args(["--help"])
    ns.subcommand = sub
    return ns, rest


def _sub_config(argv):
    for i, t in enumerate(argv):
        if t == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if t.startswith("--config="):
            return t.split("=", 1)[1]
    return None


def _drop_top_config(argv):
    out, skip = [], False
    for t in argv:
        if skip:
            skip = False
            continue
        if t == "--config":
            skip = True
            continue
        if t.startswith("--config="):
            continue
        out.append(t)
    return out


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    raise AssertionError("no subparsers")


# -- run configuration ----------------------------------------------------------


class RunConfig:
    """Resolved options of one run: the values echoed in the provenance record."""

    def __init__(self, subcommand: str, options: dict):
        self.subcommand = subcommand
        self.options = dict(options)

    @classmethod
    def from_namespace(cls, ns):
        opts = {k: v for k, v in vars(ns).items() if k not in _NOT_ECHOED and k != "subcommand"}
        return cls(ns.subcommand, opts)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, **dict(sorted(self.options.items()))}


def _provenance(cfg: RunConfig) -> dict:
    return {"package": "seqprior", "version": __version__, "seed": cfg.options.get("seed"), "config": cfg.echo()}


def _csv_header(cfg: RunConfig) -> str:
    prov = _provenance(cfg)
    return (
        f"# seqprior {prov['version']}\n"
        f"# seed: {prov['seed']}\n"
        f"# config: {json.dumps(prov['config'], sort_keys=True)}\n"
    )


# -- builders: validate everything before computing ------------------------------


def _parse_floats(text, what):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{what} must be finite, got {text!r}")
    return vals


def _need(cfg, *names):
    missing = [n for n in names if cfg.options.get(n) is None]
    if missing:
        raise UsageError(f"rule {cfg.rule} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))


def build_rule(cfg: RunConfig):
    """Return ``(model, rule)`` for the run's rule options."""
    kind = cfg.options.get("rule")
    model_name = cfg.options.get("model")
    try:
        if kind is None:
            return MODELS[model_name or "bernoulli"], None
        n_max = cfg.n_max
        if kind == "negbin":
            _need(cfg, "r")
            rule = NegBin(cfg.r, n_max=n_max)
            default = "bernoulli"
        elif kind == "brownian":
            _need(cfg, "a", "b")
            rule = BrownianExit(cfg.a, cfg.b, dt=cfg.dt, n_max=n_max)
            default = "brownian"
        elif kind == "bose-boukai":
            _need(cfg, "a")
            model = MODELS[model_name or "normal"]
            if not isinstance(model, TwoParamExpFamily):
                raise UsageError("bose-boukai needs a two-parameter model")
            return model, BoseBoukai(cfg.a, cfg.m0, model, n_max=n_max)
        elif kind == "woodroofe":
            _need(cfg, "a", "b1", "b2")
            rule = WoodroofeLRT(cfg.a, cfg.b1, cfg.b2, n_max=n_max)
            default = "normal"
        else:
            _need(cfg, "n")
            rule = FixedN(cfg.n, n_max=n_max)
            default = model_name or "bernoulli"
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    name = model_name or default
    if kind in ("negbin", "brownian", "woodroofe") and name != default:
        raise UsageError(f"rule {kind} is defined for the {default} model, not {name}")
    return MODELS[name], rule


def build_theta(cfg: RunConfig, model):
    if cfg.options.get("theta") is None:
        raise UsageError("--theta is required")
    vals = _parse_floats(cfg.theta, "--theta")
    dim = getattr(model, "dim", 1)
    if len(vals) != dim:
        raise UsageError(f"{model.name} takes {dim} parameter value(s), got {len(vals)}")
    try:
        if dim == 1:
            return model.check_theta(vals[0])
        if cfg.options.get("familiar"):
            return model.natural(*vals)
        return model.check_theta(vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_positive(cfg, *names):
    for n in names:
        v = cfg.options.get(n)
        if v is not None and v < 1:
            raise UsageError(f"--{n.replace('_', '-')} must be positive, got {v}")


# -- commands ---------------------------------------------------------------------


def cmd_prior_eval(cfg: RunConfig):
    model, rule = build_rule(cfg)
    _check_positive(cfg, "points", "replicates")
    try:
        spec = PriorSpec(cfg.prior, model, rule, replicates=cfg.replicates, seed=cfg.seed)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    if not cfg.lo < cfg.hi:
        raise UsageError("need --lo < --hi")
    grid = np.linspace(cfg.lo, cfg.hi, cfg.points)
    two = isinstance(model, TwoParamExpFamily)
    if two and cfg.fixed is None:
        raise UsageError("two-parameter models need --fixed for the other coordinate")
    names = model.familiar_names if (two and cfg.familiar) else (("theta1", "theta2") if two else ("theta",))
    points = []
    for x in grid:
        if not two:
            pt = (float(x),)
        else:
            pt = (float(x), cfg.fixed) if cfg.vary == 1 else (cfg.fixed, float(x))
        try:
            nat = model.natural(*pt) if (two and cfg.familiar) else (model.check_theta(pt) if two else model.check_theta(pt[0]))
        except ValueError as exc:
            raise UsageError(f"grid point {pt}: {exc}") from None
        points.append((pt, nat))

    def compute():
        rows = []
        for pt, nat in points:
            val = spec.log_eval(nat)
            if two and cfg.familiar:
                val = to_familiar(model, val, nat)
            rows.append((*pt, val))
        return rows

    rows = _numeric(compute)
    header = (*names, "log_prior")
    return header, rows, {"prior": spec.kind.value, "model": model.name, "biased_evaluations": spec.biased_evaluations}


def cmd_stop_sim(cfg: RunConfig):
    model, rule = build_rule(cfg)
    theta = build_theta(cfg, model)
    _check_positive(cfg, "replicates")
    times, capped = _numeric(lambda: simulate_stops(rule, theta, cfg.replicates, cfg.seed))
    rows = [(i, t, bool(c)) for i, (t, c) in enumerate(zip(times.tolist(), capped))]
    vals = np.asarray(times, dtype=float)
    summary = {
        "mean": float(vals.mean()),
        "se": float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None,
        "min": float(vals.min()),
        "max": float(vals.max()),
        "capped": int(capped.sum()),
        "floor": rule.floor,
    }
    return ("replicate", "N", "capped"), rows, summary


def cmd_expected_n(cfg: RunConfig):
    model, rule = build_rule(cfg)
    theta = build_theta(cfg, model)
    _check_positive(cfg, "replicates")
    wanted = {"n": ("E_N",), "sqrt": ("E_sqrt_N",), "both": ("E_N", "E_sqrt_N")}[cfg.quantity]
    rng = np.random.default_rng(cfg.seed)

    def compute():
        rows = []
        for q in wanted:
            fn = expected_n if q == "E_N" else expected_sqrt_n
            res = fn(rule, theta, replicates=cfg.replicates, seed=rng, monte_carlo=cfg.monte_carlo)
            reps = res.replicates if res.method.value == "monte-carlo" else 0
            rows.append((q, res.value, res.method.value, res.se, reps, bool(res.biased)))
        return rows

    rows = _numeric(compute)
    return ("quantity", "value", "method", "se", "replicates", "biased"), rows, {}


def _read_data(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read data {path}: {exc.strerror}") from None
    try:
        return [float(t) for t in text.split()]
    except ValueError as exc:
        raise UsageError(f"bad data file {path}: {exc}") from None


def cmd_sample(cfg: RunConfig):
    model, rule = build_rule(cfg)
    try:
        config = SamplerConfig(
            iterations=cfg.iters,
            burn_in=cfg.burn_in,
            seed=cfg.seed,
            psi=_psi(cfg.psi),
            e_n_replicates=cfg.e_n_replicates,
            inner_steps=cfg.inner_steps,
            literal_ratio=cfg.literal_ratio,
        )
        if isinstance(rule, NegBin):
            if cfg.data is not None:
                data = Sample.of(model, _read_data(cfg.data))
            else:
                _need(cfg, "n")
                data = negbin_sample(cfg.r, cfg.n)
        else:
            if cfg.data is None:
                raise UsageError("--data is required unless the rule is negbin")
            data = Sample.of(model, _read_data(cfg.data))
        prior = PriorSpec(cfg.prior_fixed, model)
        target = PosteriorTarget(prior, model, data)
        initial = None if cfg.init is None else _parse_floats(cfg.init, "--init")
        if initial is not None and len(initial) == 1:
            initial = initial[0]
        proposal = fixed_posterior_proposal(target, inner_steps=cfg.inner_steps, scale=cfg.step, initial=initial)
        if initial is not None:
            target.log_target(initial)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    two = isinstance(model, TwoParamExpFamily)
    chain = _numeric(lambda: ALGORITHMS[cfg.algo](proposal, rule, config))
    names = ("theta1", "theta2") if two else ("theta",)
    draws = chain.draws.reshape(len(chain.draws), -1)
    rows = [(i, *row, lat, bool(acc)) for i, (row, lat, acc) in enumerate(zip(draws.tolist(), chain.latent.tolist(), chain.accepted))]
    diag = chain_diagnostics(chain)
    summary = {
        "algorithm": chain.algorithm,
        "acceptance_rate": chain.acceptance_rate,
        "stop_simulations": chain.stop_simulations,
        "init_simulations": chain.init_simulations,
        "capped": chain.capped,
        "mean": np.atleast_1d(diag.mean).tolist(),
        "variance": np.atleast_1d(diag.variance).tolist(),
        "lag1": np.atleast_1d(diag.lag1).tolist(),
        "ess": np.atleast_1d(diag.ess).tolist(),
    }
    return ("iteration", *names, "latent", "accepted"), rows, summary


def _psi(text):
    t = str(text).strip().lower()
    if t in ("identity", "sqrt"):
        return t
    try:
        return float(t)
    except ValueError:
        raise UsageError(f"--psi must be identity, sqrt or a number, got {text!r}") from None


def cmd_coverage(cfg: RunConfig):
    _check_positive(cfg, "replicates", "grid_points", "threads")
    if cfg.all:
        if any(cfg.options.get(k) is not None for k in ("r", "p", "prior")):
            raise UsageError("--all excludes --r, --p and --prior")
        if cfg.method != "exact":
            raise UsageError("--all supports --method exact only")
        cells = None
    else:
        missing = [k for k in ("r", "p", "prior") if cfg.options.get(k) is None]
        if missing:
            raise UsageError("coverage needs " + ", ".join("--" + m for m in missing) + " (or --all)")
        if cfg.r < 1 or not 0 < cfg.p < 1:
            raise UsageError("need r >= 1 and 0 < p < 1")
        cells = [(cfg.r, cfg.p, cfg.prior)]
    if not 0 < cfg.tail < 1:
        raise UsageError("--tail must lie in (0, 1)")

    def compute():
        if cells is None:
            return table2(threads=cfg.threads, tail=cfg.tail, n_grid=cfg.grid_points)
        if cfg.method == "exact":
            return [table2_cell(*cells[0], tail=cfg.tail, n_grid=cfg.grid_points)]
        return [coverage_monte_carlo(*cells[0], replicates=cfg.replicates, seed=cfg.seed, n_grid=cfg.grid_points)]

    reports = _numeric(compute)
    rows = [rep.row() for rep in reports]
    return CoverageReport.HEADER, rows, {"_json": json.loads(table2_json(reports, tail=cfg.tail))}


def cmd_figures(cfg: RunConfig):
    _check_positive(cfg, "points", "grid_points")
    if cfg.which == "figure1":
        r_values = [int(v) for v in _parse_floats(cfg.r_values, "--r-values")]
        if any(r < 1 for r in r_values):
            raise UsageError("--r-values must be positive integers")
        lo, hi, n = _grid_opts(cfg, 0.05, 0.95, 91)
        if not 0 < lo < hi <= 1:
            raise UsageError("figure1 needs 0 < lo < hi <= 1")
        rows = _numeric(lambda: figure1_data(r_values, np.linspace(lo, hi, n)))
        summary = {"max_relative_gap": {str(r): max_relative_gap(rows, r) for r in sorted(set(r_values))}}
        return Figure1Row.HEADER, [(x.r, x.p, x.sqrt_of_e, x.e_of_sqrt) for x in rows], summary
    if cfg.which == "figure2":
        if cfg.r < 1 or cfg.n < cfg.r:
            raise UsageError("figure2 needs 1 <= r <= n")
        data: Figure2Data = _numeric(lambda: figure2_data(cfg.r, cfg.n, cfg.grid_points))
        J, R, M = (k.value for k in TABLE2_PRIORS)
        summary = {
            "tv_R_M": data.total_variation(R, M),
            "tv_R_J": data.total_variation(R, J),
            "sup_gap_R_M": data.sup_gap(R, M),
        }
        return Figure2Data.HEADER, data.rows(), summary
    if not cfg.a < 0 < cfg.b:
        raise UsageError("brownian needs a < 0 < b")
    lo, hi, n = _grid_opts(cfg, -5.0, 5.0, 101)
    if not lo < hi:
        raise UsageError("need --lo < --hi")
    rows = _numeric(lambda: brownian_prior_curve(cfg.a, cfg.b, np.linspace(lo, hi, n)))
    summary = {"tail_slope_20_100": tail_slope(cfg.a, cfg.b)}
    return BrownianRow.HEADER, [(x.theta, x.expected_t, x.prior) for x in rows], summary


def _grid_opts(cfg, lo, hi, n):
    return (
        lo if cfg.lo is None else cfg.lo,
        hi if cfg.hi is None else cfg.hi,
        n if cfg.points is None else cfg.points,
    )


def _numeric(fn):
    try:
        with np.errstate(over="raise", invalid="ignore", divide="ignore"):
            return fn()
    except (ArithmeticError, CapExceeded, MLEUndefinedError, FloatingPointError) as exc:
        raise NumericError(f"{type(exc).__name__}: {exc}") from None
    except (ValueError, RuntimeError) as exc:
        raise NumericError(f"{type(exc).__name__}: {exc}") from None


COMMAND_FUNCS = {
    "prior-eval": cmd_prior_eval,
    "stop-sim": cmd_stop_sim,
    "expected-n": cmd_expected_n,
    "sample": cmd_sample,
    "coverage": cmd_coverage,
    "figures": cmd_figures,
}


# -- rendering ----------------------------------------------------------------------


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else format_number(v)
    return v


def render(cfg: RunConfig, header, rows, summary) -> str:
    fmt = cfg.options.get("format", "csv")
    if fmt == "csv":
        return _csv_header(cfg) + rows_to_csv(header, rows)
    summary = dict(summary)
    doc = summary.pop("_json", None)
    if doc is None:
        doc = {
            "schema_version": 1,
            "kind": cfg.subcommand,
            "columns": list(header),
            "rows": [[_json_value(v) for v in row] for row in rows],
        }
    doc = {"provenance": _provenance(cfg), **doc}
    if summary:
        doc["summary"] = {k: _json_value(v) if not isinstance(v, (dict, list)) else v for k, v in summary.items()}
    return json.dumps(doc, indent=2) + "\n"


def run(cfg: RunConfig) -> str:
    header, rows, summary = COMMAND_FUNCS[cfg.subcommand](cfg)
    return render(cfg, header, rows, summary)


# -- replay -------------------------------------------------------------------------


def _recorded_config(text: str) -> dict:
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)["provenance"]["config"]
        except (ValueError, KeyError, TypeError):
            raise UsageError("replay file has no JSON provenance record") from None
    for line in text.splitlines():
        if line.startswith("# config: "):
            try:
                return json.loads(line[len("# config: "):])
            except ValueError:
                raise UsageError("replay file has a malformed config line") from None
        if not line.startswith("#"):
            break
    raise UsageError("replay file has no provenance header")


def replay(path) -> str:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    recorded = dict(_recorded_config(text))
    sub = recorded.pop("subcommand", None)
    if sub not in COMMAND_FUNCS:
        raise UsageError(f"replay file names unknown command {sub!r}")
    defaults = {
        a.dest: a.default
        for a in _subparsers(build_parser())[sub]._actions
        if a.dest not in ("help",) and a.option_strings
    }
    options = {k: v for k, v in defaults.items() if k not in _NOT_ECHOED}
    unknown = set(recorded) - set(options)
    if unknown:
        raise UsageError("replay file has unknown options: " + ", ".join(sorted(unknown)))
    options.update(recorded)
    fresh = run(RunConfig(sub, options))
    if fresh != text:
        old, new = text.splitlines(), fresh.splitlines()
        line = next((i for i, (x, y) in enumerate(zip(old, new)) if x != y), min(len(old), len(new)))
        raise ReplayMismatch(f"{path}: output differs from recomputation at line {line + 1}")
    return f"replay ok: {path} ({len(text.splitlines())} lines reproduced)\n"


# -- entry point ----------------------------------------------------------------------


def _fail(kind, message, code):
    message = " ".join(str(message).split())
    print(f"seqprior: error[{kind}]: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        parser, args = parse_args(argv)
        if getattr(args, "replay", None) and args.subcommand is None:
            sys.stdout.write(replay(args.replay))
            return 0
        cfg = RunConfig.from_namespace(args)
        out = run(cfg)
        if args.out:
            try:
                Path(args.out).write_text(out)
            except OSError as exc:
                raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
        else:
            sys.stdout.write(out)
        return 0
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except NumericError as exc:
        return _fail("numeric", exc, 3)
    except ReplayMismatch as exc:
        return _fail("replay", exc, 1)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        try:
            sys.stdout = open(os.devnull, "w")
        except OSError:
            pass
        return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
