"""Discriminator-guided order-agnostic autoregressive sampling.

Generation fills the variables of a discrete product space one position
at a time along a random order. A prefix discriminator supplies
importance weights W = exp(logit) estimating the data/model likelihood
ratio of the partial sample; three guided samplers consume them:

* ardg_sample: per-step correction, reweighting each model conditional
  by the candidate weights (one chain, no particles);
* bsdg_sample: bootstrap SMC, proposing from the model and reweighting
  by the step's weight ratio;
* fadg_sample: fully adapted SMC, whose look-ahead weights depend only
  on the current prefixes and whose proposal is the guided step itself.

Everything is verified at desk scale against exact tabular joints by
enumeration; see the `evaluation` module and the command-line tool.
"""

from .core import (
    Categorical,
    DegenerateParticleSystem,
    EvalCounters,
    GenerationOrder,
    GuidanceCollapse,
    LOGIT_CLAMP,
    LogWeight,
    MaskedSample,
    SupportViolation,
    UNASSIGNED,
    UnreachablePrefix,
    clamp_logit,
    effective_sample_size,
    normalize_weights,
    systematic_resample,
)
from .discriminator import (
    ConstantDiscriminator,
    CorruptedDiscriminator,
    Discriminator,
    OptimalDiscriminator,
    WeightRatio,
    constant_schedule,
    corrupt,
    discriminator_loss,
    final_step_exact,
    optimal_discriminator,
    sample_prefixes,
)
from .graphs import (
    DimensionDistribution,
    GraphLayout,
    OrderKind,
    ValidityReport,
    graph_dimension,
    graph_from_json,
    graph_validity,
    sample_dimension,
    sample_order,
    to_graph_json,
)
from .models import (
    ConditionalModel,
    MAX_STATES,
    TabularJoint,
    fit_tabular,
    perturb,
)
from .rng import KeyedRng
from .samplers import (
    SampleRun,
    StepDistribution,
    ardg_sample,
    ardm_sample,
    step_distribution,
)
from .smc import (
    Lookahead,
    ParticleSet,
    SmcDiagnostics,
    SmcRun,
    bsdg_sample,
    fadg_lookahead,
    fadg_sample,
    select_final,
)
from .config import RunConfig, load_config
from .evaluation import (
    RunReport,
    build_problem,
    empirical_distribution,
    run_experiment,
    tv_distance,
)

__version__ = "0.1.0"
