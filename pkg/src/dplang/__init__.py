"""Differentially private language identification and generation simulations."""

from dplang.audit import AuditReport, ScoreBuilder, audit_exp_ratio, audit_gaussian, audit_sensitivity
from dplang.distribution import (
    Dataset,
    FiniteDistribution,
    GeometricDistribution,
    draw_dataset,
    empirical_err,
    named_distribution,
    population_err,
)
from dplang.errors import (
    CalibrationWarning,
    ConfigError,
    DplangError,
    EmptyCandidates,
    EnumerationExhausted,
    InstanceError,
    InvalidDelta,
    NotContained,
    ScanLimitInconclusive,
)
from dplang.generation import (
    GenConfig,
    approx_dp_generate,
    coverage_stats,
    dp_generate,
    estimate_gen_err,
    gen_error_bound,
    gen_scores,
    min_prefix_count,
    nonprivate_generate,
)
from dplang.hardness import (
    coupled_draw,
    coupled_hamming_trials,
    empirical_lb_check,
    lb_value,
    make_hard_instance,
)
from dplang.harness import ExperimentConfig, ResultRecord, emit_results, read_results, run_experiment
from dplang.identification import (
    IdConfig,
    approx_dp_identify,
    estimate_id_err,
    id_error_bound,
    margin_and_score,
    nonprivate_identify,
    pure_dp_identify,
)
from dplang.instances import Instance, named_instance
from dplang.mechanisms import (
    PrivacyParams,
    ScoreVector,
    exp_mech_probs,
    exp_mech_sample,
    gaussian_noise,
    gaussian_perturb,
    gaussian_sigma,
)
from dplang.schedules import Schedule, parse_schedule
from dplang.universe import (
    ArithmeticLanguage,
    Collection,
    FiniteLanguage,
    PredicateLanguage,
    kth_member_above,
    language_contains,
    mod3_collection,
    witness_index,
)

__version__ = "0.1.0"
