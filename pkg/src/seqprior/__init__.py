"""Stopping-rule-dependent objective priors, their posteriors and the
numerical experiments that compare them."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BERNOULLI,
    BROWNIAN_DRIFT,
    GAMMA,
    INVERSE_GAMMA,
    INVERSE_GAUSSIAN,
    NORMAL,
    TABLE1_INSTANCES,
    DomainError,
    MLEUndefinedError,
    ParamPoint,
    Sample,
    TwoParamExpFamily,
    UnsupportedOperation,
    negbin_sample,
)
from .stopping import (  # noqa: E402
    BoseBoukai,
    BrownianExit,
    CapExceeded,
    FixedN,
    NegBin,
    WoodroofeLRT,
    expected_n,
    expected_sqrt_n,
    simulate_stop,
    simulate_stops,
    tau_limit,
)
from .prior import PriorKind, PriorSpec, ReferenceFactorization  # noqa: E402
from .inference import (  # noqa: E402
    BetaPosterior,
    PosteriorTarget,
    credible_bound,
    negbin_conjugate_posterior,
    quadrature_posterior,
)
from .sampler import (  # noqa: E402
    SamplerConfig,
    brute_force_metropolis,
    chain_diagnostics,
    fixed_posterior_proposal,
    latent_variable_metropolis,
    modified_sqrt_metropolis,
)
from .experiment import (  # noqa: E402
    figure1_data,
    figure2_data,
    brownian_prior_curve,
    table2,
    table2_cell,
)
