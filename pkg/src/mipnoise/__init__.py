"""Membership-inference privacy toolkit.

Wraps arbitrary vector-valued statistics in calibrated noise so that no
attacker can tell whether a given record was in the training half much
better than chance, and ships the machinery to verify that claim: exact and
Monte Carlo attackers, DP baselines, moment and sensitivity computations,
and the two simulation studies.
"""

__version__ = "0.1.0"

from .core import (
    BaseAlgorithm,
    CapacityError,
    DatasetTable,
    MalformedInputError,
    MeanQuery,
    MechanismOutput,
    PrivacyBudget,
    SubsetMask,
    ValidationError,
    enumerate_subsets,
    load_dataset,
    random_half_split,
    rng_stream,
)
from .noise import (
    MomentProfile,
    NoiseSpec,
    mip_scale_constant,
    sample_gen_normal,
    sample_laplace,
    sample_mip_noise,
    sigma_norm,
)
from .moments import (
    DegenerateMomentWarning,
    ReciprocalSum,
    build_pathological_dataset,
    estimate_moments,
    exact_moments,
    sensitivity_exact,
)
from .mechanisms import (
    BinaryReleaseMechanism,
    LaplaceDpMechanism,
    Mechanism,
    MipNoiseMechanism,
    PostprocessedMechanism,
    SubsetPublisherMechanism,
    binary_tight_dp,
    dpsgd_train,
    privatize_laplace_dp,
    privatize_mip,
    subset_publisher,
)
from .attack import (
    AttackReport,
    UndefinedPosteriorError,
    attack_game,
    bayes_posterior,
    dp_epsilon_from_eta,
    mip_eta_from_dp,
    optimal_attacker_accuracy,
    optimal_attacker_accuracy_exact,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    emit_results,
    psd_sqrt,
    run_fig1,
    run_synth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
