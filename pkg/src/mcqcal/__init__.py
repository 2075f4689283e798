"""mcqcal: calibration analysis for language models on multiple-choice questions.

Measures accuracy/ECE/reliability over line-delimited prediction records,
estimates the answer/format uncertainty split, fits four post-hoc calibrators
(NLL, constant, and reference-KL temperature scaling, plus Gaussian-KDE
confidence refinement), and builds byte-exact MCQ prompts with the few-shot
permutation protocol.
"""

from .calibrators import (
    KdeConfidenceCalibrator,
    TemperatureScaler,
    apply_temperature,
    calibrator_from_json_dict,
    calibrator_to_json_dict,
    constant_temperature,
    fit_kde,
    fit_temperature_kl,
    fit_temperature_nll,
    kde_refine,
)
from .decomposition import (
    FormatEstimate,
    SyntheticJoint,
    estimate_format,
    estimate_format_from_choice_mass,
    estimate_format_from_identifier,
    joint_conditional,
    joint_format_marginal,
    verify_decomposition,
)
from .errors import McqcalError
from .metrics import (
    BinningMode,
    CalibrationBin,
    EceReport,
    accuracy,
    choice_prob_mass,
    confidence_and_prediction,
    confidence_histogram,
    ece,
    reliability_bins,
)
from .numerics import kl_divergence, minimize_scalar, softmax_with_temperature
from .prompts import (
    PredictionPair,
    PromptPlan,
    PromptSpec,
    build_prompt,
    enumerate_permutations,
    render_choice,
    select_pairs_all_unique,
    select_pairs_last,
)
from .records import (
    CalibrationDataset,
    ChoiceFormat,
    ConfidencePolicy,
    MCQItem,
    PredictionRecord,
    dump_dataset,
    dump_record,
    load_dataset,
    load_items,
    validate_record,
)

__version__ = "0.1.0"

__all__ = [
    "BinningMode",
    "CalibrationBin",
    "CalibrationDataset",
    "ChoiceFormat",
    "ConfidencePolicy",
    "EceReport",
    "FormatEstimate",
    "KdeConfidenceCalibrator",
    "MCQItem",
    "McqcalError",
    "PredictionPair",
    "PredictionRecord",
    "PromptPlan",
    "PromptSpec",
    "SyntheticJoint",
    "TemperatureScaler",
    "accuracy",
    "apply_temperature",
    "build_prompt",
    "calibrator_from_json_dict",
    "calibrator_to_json_dict",
    "choice_prob_mass",
    "confidence_and_prediction",
    "confidence_histogram",
    "constant_temperature",
    "dump_dataset",
    "dump_record",
    "ece",
    "enumerate_permutations",
    "estimate_format",
    "estimate_format_from_choice_mass",
    "estimate_format_from_identifier",
    "fit_kde",
    "fit_temperature_kl",
    "fit_temperature_nll",
    "joint_conditional",
    "joint_format_marginal",
    "kde_refine",
    "kl_divergence",
    "load_dataset",
    "load_items",
    "minimize_scalar",
    "reliability_bins",
    "render_choice",
    "select_pairs_all_unique",
    "select_pairs_last",
    "softmax_with_temperature",
    "validate_record",
    "verify_decomposition",
]
