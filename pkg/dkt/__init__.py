"""Disease knowledge transfer: a two-layer disease progression model.

Biomarker trajectories are sigmoids of latent dysfunction scores, and each
dysfunction score is a disease-specific sigmoid of disease stage. Fitting the
model on a multimodal cohort lets the dysfunction-to-biomarker layer be
reused for a cohort that only observed some modalities.
"""

from .config import (
    FlatPrior,
    GaussianPrior,
    ModelConfig,
    OptimizerSpec,
    PreprocessSpec,
    PriorSpec,
    RunConfig,
    SigmoidPriors,
    dump_config,
    load_config,
)
from .dataset import CohortDataset
from .exceptions import DataError, DktError, NumericalError
from .fit import (
    FitLogger,
    curve_table,
    fit,
    fit_dysfunction,
    fit_subject_shift,
    fit_trajectory,
    predict_frame,
    predict_missing,
    stage_subject,
    stage_subjects,
    update_noise,
)
from .model import (
    FitDiagnostics,
    FittedModel,
    SigmoidParams,
    biomarker_predict,
    dysfunction_score,
    neg_log_posterior,
    penalized_objective,
    sigmoid_eval,
)
from .persistence import load_model, save_model
from .preprocess import (
    NormalizationParams,
    RawTable,
    apply_normalization,
    denormalize,
    load_csv,
    normalize,
    preprocess,
    residualize,
    write_csv,
)
from .stats import (
    EvalReport,
    bootstrap_corr,
    compare_models,
    compare_table,
    evaluate_predictions,
    recovery_report,
    shift_r2,
    spearman,
    trajectory_mae,
)
from .synth import GroundTruth, SynthSpec, default_spec, generate, write_cohort
from .transfer import TransferTask, predict_transfer, run_transfer_comparison

__all__ = [
    "CohortDataset",
    "DataError",
    "DktError",
    "EvalReport",
    "FitDiagnostics",
    "FitLogger",
    "FittedModel",
    "FlatPrior",
    "GaussianPrior",
    "GroundTruth",
    "ModelConfig",
    "NormalizationParams",
    "NumericalError",
    "OptimizerSpec",
    "PreprocessSpec",
    "PriorSpec",
    "RawTable",
    "RunConfig",
    "SigmoidParams",
    "SigmoidPriors",
    "SynthSpec",
    "TransferTask",
    "apply_normalization",
    "biomarker_predict",
    "bootstrap_corr",
    "compare_models",
    "compare_table",
    "curve_table",
    "default_spec",
    "denormalize",
    "dump_config",
    "dysfunction_score",
    "evaluate_predictions",
    "fit",
    "fit_dysfunction",
    "fit_subject_shift",
    "fit_trajectory",
    "generate",
    "load_config",
    "load_csv",
    "load_model",
    "neg_log_posterior",
    "normalize",
    "penalized_objective",
    "predict_frame",
    "predict_missing",
    "predict_transfer",
    "preprocess",
    "recovery_report",
    "residualize",
    "save_model",
    "sigmoid_eval",
    "shift_r2",
    "spearman",
    "stage_subject",
    "stage_subjects",
    "trajectory_mae",
    "update_noise",
    "write_cohort",
    "write_csv",
]
