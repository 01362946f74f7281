"""Capacity regions and strong-converse exponents for the two-receiver
broadcast channel with degraded message sets, plus exact checks of the
converse bounds on tiny block codes."""

from .channels import AuxInputLaw, ChannelPair, joint_from_aux, load_channel, parse_channel_spec
from .exponent import (
    ExponentEngine,
    ExponentParams,
    ExponentSearch,
    OmegaResult,
    convexity_check,
    exponent,
    exponent_at_params,
    omega_functional,
    omega_max,
    omega_slope_at_zero,
    omega_weight,
)
from .probability import (
    JointDistUXYZ,
    ProbDist,
    StochasticMatrix,
    ValidationError,
    conditional_kl,
    conditional_mutual_information,
    entropy,
    mutual_information,
)
from .region import (
    HyperplaneParams,
    OptimizerBudget,
    RegionBoundary,
    ba_capacity,
    eval_C_p,
    hyperplane_value,
    region_boundary,
    region_membership,
    tilde_hyperplane_value,
)
from .verifier import (
    BlockCode,
    BoundReport,
    check_lemma1_bound,
    check_theorem3_bound,
    exact_correct_probability,
    optimize_decoders,
)

__version__ = "0.1.0"
