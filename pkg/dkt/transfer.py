"""The transfer task: predicting a modality a disease cohort never observed.

Models are trained on a source disease observed in every modality together
with a target disease observed in some modalities only. Target-disease test
subjects are then predicted in every modality from the modalities they have,
and the predictions are scored against the measured values.
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from .baselines import GPRegressor, latent_stage_fit, linear_fit, spline_fit
from .baselines.gp import GP_RESTARTS
from .config import ModelConfig
from .constants import ID_COLUMNS
from .dataset import CohortDataset
from .exceptions import DataError, InsufficientDataError, UnknownBiomarkerError
from .fit import FitLogger, fit, predict_frame
from .stats import DEFAULT_BOOTSTRAP, EvalReport, compare_table

logger = logging.getLogger(__name__)

MODEL_NAMES = ("dkt", "latent", "gp", "spline", "linear")
REFERENCE_MODEL = "dkt"
# exact GP training cost is cubic in the number of points
GP_MAX_POINTS = 200


@dataclass(frozen=True)
class TransferTask:
    """Which biomarkers are inputs, which are predicted, and for whom.

    Attributes
    ----------
        inputs: biomarkers observed in the target diseases.
        targets: biomarkers to predict.
        source_diseases: diseases the univariate and GP baselines learn from.
        target_diseases: diseases whose subjects are predicted.
        units: unit name of every biomarker, used to pick univariate inputs.

    """

    inputs: tuple[str, ...]
    targets: tuple[str, ...]
    source_diseases: tuple[str, ...]
    target_diseases: tuple[str, ...]
    units: dict[str, str]

    @classmethod
    def from_dataset(
        cls,
        data: CohortDataset,
        config: ModelConfig,
        inputs: list[str] | None = None,
        targets: list[str] | None = None,
    ) -> "TransferTask":
        """Derive the task from what each disease of `data` observes.

        Without explicit `inputs`, the target disease is the one observing
        the fewest biomarkers and the inputs are the biomarkers it observes.
        With explicit inputs, every disease that misses one of the targets
        is a target disease.
        """
        targets = list(targets or config.biomarkers)
        for name in [*targets, *(inputs or [])]:
            if name not in config.biomarkers:
                msg = f"Unknown biomarker {name!r}; known: {config.biomarkers}."
                raise UnknownBiomarkerError(msg)

        observed = {}
        for d, label in enumerate(data.diseases):
            seen = set(data.biomarker[data.measurement_disease == d].tolist())
            observed[label] = {data.biomarkers[k] for k in seen}
        present = [label for label in data.diseases if observed[label]]

        if inputs is None:
            target_disease = min(present, key=lambda label: (len(observed[label]), present.index(label)))
            inputs = [b for b in config.biomarkers if b in observed[target_disease]]
            target_diseases = [target_disease]
        else:
            target_diseases = [label for label in present if not set(targets) <= observed[label]]
        if not inputs:
            msg = "The transfer task needs at least one input biomarker."
            raise DataError(msg)
        source_diseases = [label for label in present if label not in target_diseases]
        if not source_diseases:
            msg = "No disease observes every target biomarker; nothing to transfer from."
            raise DataError(msg)

        units = {b: config.units[config.unit_allocation[k]] for k, b in enumerate(config.biomarkers)}
        task = cls(tuple(inputs), tuple(targets), tuple(source_diseases), tuple(target_diseases), units)
        logger.info(f"Transfer task: {task.source_diseases} -> {task.target_diseases}, inputs {task.inputs}")
        return task

    def input_for(self, target: str) -> str:
        """The single input a univariate baseline predicts `target` from.

        The target itself when observed, else the first input in the same
        unit, else the first input.
        """
        if target in self.inputs:
            return target
        same_unit = [b for b in self.inputs if self.units.get(b) == self.units.get(target)]
        return same_unit[0] if same_unit else self.inputs[0]


def _subjects_of(data: CohortDataset, diseases: tuple[str, ...]) -> CohortDataset:
    wanted = [data.diseases.index(label) for label in diseases if label in data.diseases]
    subjects = np.flatnonzero(np.isin(data.disease, wanted))
    return data.subset(subjects=subjects)


def _pairs(frame: pd.DataFrame, inputs: list[str], target: str) -> tuple[np.ndarray, np.ndarray]:
    rows = frame[[*inputs, target]].dropna()
    return rows[inputs].to_numpy(dtype=float), rows[target].to_numpy(dtype=float)


def _gp_training_set(x: np.ndarray, y: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if len(y) <= GP_MAX_POINTS:
        return x, y
    keep = np.sort(np.random.default_rng(seed).choice(len(y), GP_MAX_POINTS, replace=False))
    return x[keep], y[keep]


def fit_transfer_models(
    train: CohortDataset,
    task: TransferTask,
    models: list[str] | tuple[str, ...],
    config: ModelConfig,
    seed: int = 0,
    fit_logger: FitLogger | None = None,
) -> dict[str, Any]:
    """Train every requested model on `train`.

    DKT and the latent-stage model use the whole training cohort. The
    regression baselines learn from source-disease visits where both input
    and target were measured; they are keyed by target biomarker.
    """
    unknown = [name for name in models if name not in MODEL_NAMES]
    if unknown:
        msg = f"Unknown models {unknown}; choose from {list(MODEL_NAMES)}."
        raise DataError(msg)

    source = _subjects_of(train, task.source_diseases).to_wide()
    fitted: dict[str, Any] = {}
    for name in models:
        logger.info(f"Training {name}")
        if name == "dkt":
            fitted[name] = fit(train, config, fit_logger=fit_logger)
        elif name == "latent":
            fitted[name] = latent_stage_fit(train, config, fit_logger=fit_logger)
        elif name == "gp":
            regressors = {}
            for t, target in enumerate(task.targets):
                x, y = _gp_training_set(*_pairs(source, list(task.inputs), target), seed=seed + t)
                regressors[target] = GPRegressor.fit(x, y, restarts=GP_RESTARTS, seed=seed)
            fitted[name] = regressors
        else:
            fit_fn = spline_fit if name == "spline" else linear_fit
            regressors = {}
            for target in task.targets:
                x, y = _pairs(source, [task.input_for(target)], target)
                regressors[target] = fit_fn(x.ravel(), y)
            fitted[name] = regressors
    return fitted


def predict_transfer(name: str, fitted: Any, task: TransferTask, test: CohortDataset) -> pd.DataFrame:  # noqa: ANN401
    """Predict every target for the target-disease subjects of `test`.

    Returns
    -------
        A wide table: the identifier columns and one column per target.
        Visits missing a needed input get NaN.

    """
    subjects = _subjects_of(test, task.target_diseases)
    if not subjects.n_subjects:
        msg = f"The test set has no subjects of {list(task.target_diseases)}."
        raise InsufficientDataError(msg)
    inputs = list(task.inputs)

    if name == "dkt":
        return predict_frame(fitted, subjects, biomarkers=list(task.targets), inputs=inputs)

    wide = subjects.to_wide()
    frame = wide[list(ID_COLUMNS)].copy()
    if name == "latent":
        beta = fitted.stage_subjects(subjects, inputs)
        subject = np.repeat(np.arange(subjects.n_subjects), [len(m) for m in subjects.visit_months])
        months = frame["months_since_baseline"].to_numpy(dtype=float)
        for target in task.targets:
            frame[target] = fitted.predict(beta[subject], months, target)
        return frame

    for target in task.targets:
        columns = inputs if name == "gp" else [task.input_for(target)]
        x = wide[columns].to_numpy(dtype=float)
        usable = np.all(np.isfinite(x), axis=1)
        values = np.full(len(wide), np.nan)
        if usable.any():
            chosen = x[usable] if name == "gp" else x[usable, 0]
            values[usable] = fitted[target].predict(chosen)
        frame[target] = values
    return frame


def run_transfer_comparison(
    train: CohortDataset,
    test: CohortDataset,
    models: list[str] | tuple[str, ...] = MODEL_NAMES,
    config: ModelConfig | None = None,
    bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    task: TransferTask | None = None,
    fit_logger: FitLogger | None = None,
    truth: CohortDataset | None = None,
) -> EvalReport:
    """Train, predict and score every model on the transfer task.

    Models see the inputs of `test`; predictions are scored against the
    target values of `truth`, which defaults to `test` itself. With DKT
    among several models, every other model is tested against it with a
    Bonferroni family of the other models.
    """
    if config is None:
        config = ModelConfig(
            biomarkers=list(train.biomarkers),
            units=["l0"],
            unit_allocation=[0] * len(train.biomarkers),
            diseases=list(train.diseases),
        )
    train = train.align_to(config.biomarkers, config.diseases)
    task = task or TransferTask.from_dataset(train, config)
    fitted = fit_transfer_models(train, task, models, config, seed=seed, fit_logger=fit_logger)
    predictions = {name: predict_transfer(name, fitted[name], task, test) for name in models}
    truth = _subjects_of(test if truth is None else truth, task.target_diseases).to_wide()
    reference = REFERENCE_MODEL if REFERENCE_MODEL in models and len(models) > 1 else None
    return compare_table(predictions, truth, list(task.targets), bootstrap=bootstrap, seed=seed, reference=reference)
