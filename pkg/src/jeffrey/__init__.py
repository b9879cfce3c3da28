"""Jeffrey's update rule over discrete channels, run as EM with monotonicity certification."""

from .channel import (
    Channel,
    InverseChannel,
    Joint,
    apply_inverse,
    embed,
    has_full_image,
    invert,
    is_plausible,
    joint,
    likelihood_column,
    load_channel,
    prune_inputs,
    push_forward,
)
from .datagen import SyntheticRun, observed_tau, sample_run
from .dist import (
    SIMPLEX_TOL,
    Dist,
    empirical_from_samples,
    entropy,
    kl_divergence,
    log_likelihood,
    make_dist,
    support,
    uniform,
)
from .em import (
    CertificationReport,
    StepRecord,
    StopCriteria,
    StopReason,
    Trace,
    argmax_q_oracle,
    certify_monotone,
    delta_h,
    delta_l,
    delta_q,
    h_function,
    jeffrey_step,
    q_function,
    run,
)
from .errors import DimensionError, EmptyDomainError, PlausibilityError, ValidationError

__version__ = "0.1.0"
