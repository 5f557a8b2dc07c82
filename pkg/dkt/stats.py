"""Evaluation statistics.

Rank correlations with bootstrap spread, trajectory and time-shift recovery
metrics, and Welch tests with Bonferroni correction between models.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.stats import linregress, spearmanr, ttest_ind

from .constants import DATASET_COLUMNS
from .exceptions import DataError, DegenerateInputError, TooFewResamplesError
from .formatters import format_report
from .model import sigmoid_values

if TYPE_CHECKING:
    from .model import FittedModel
    from .synth import GroundTruth

logger = logging.getLogger(__name__)

DEFAULT_BOOTSTRAP = 100
SIGNIFICANCE_LEVEL = 0.05
GRID_POINTS = 100
KEY_COLUMNS = ["subject_id", "months_since_baseline"]


def _is_constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation: Pearson correlation of mid-ranks.

    Raises
    ------
        DataError: lengths differ or are below 3.
        DegenerateInputError: either vector is constant.

    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 3:
        msg = f"spearman needs two vectors of equal length >= 3, got {len(x)} and {len(y)}."
        raise DataError(msg)
    if _is_constant(x) or _is_constant(y):
        msg = "Rank correlation is undefined for a constant vector."
        raise DegenerateInputError(msg)
    return float(np.clip(spearmanr(x, y)[0], -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    mean: float
    std: float
    samples: np.ndarray
    n_degenerate: int = 0


def bootstrap_indices(n: int, resamples: int, seed: int | list[int]) -> np.ndarray:
    """Index draws shared by every model evaluated on the same rows."""
    return np.random.default_rng(seed).integers(0, n, size=(resamples, n))


def bootstrap_corr(
    pred: np.ndarray,
    meas: np.ndarray,
    resamples: int = DEFAULT_BOOTSTRAP,
    seed: int | list[int] = 0,
    indices: np.ndarray | None = None,
) -> BootstrapResult:
    """Spearman correlation over bootstrap resamples of (pred, meas) pairs.

    Resamples where either side is constant are skipped and counted.

    Raises
    ------
        DataError: fewer than 5 pairs or fewer than 100 resamples.
        TooFewResamplesError: more than half of the resamples were degenerate.

    """
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if len(pred) != len(meas) or len(pred) < 5:
        msg = f"bootstrap_corr needs at least 5 pairs, got {len(pred)} and {len(meas)}."
        raise DataError(msg)
    if indices is None:
        if resamples < DEFAULT_BOOTSTRAP:
            msg = f"At least {DEFAULT_BOOTSTRAP} resamples are needed, got {resamples}."
            raise DataError(msg)
        indices = bootstrap_indices(len(pred), resamples, seed)

    samples = []
    for idx in indices:
        a, b = pred[idx], meas[idx]
        if _is_constant(a) or _is_constant(b):
            continue
        samples.append(spearman(a, b))
    n_degenerate = len(indices) - len(samples)
    if n_degenerate > len(indices) / 2:
        msg = f"{n_degenerate} of {len(indices)} bootstrap resamples were degenerate."
        raise TooFewResamplesError(msg)
    samples = np.asarray(samples)
    std = float(np.std(samples, ddof=1)) if len(samples) > 1 else 0.0
    return BootstrapResult(float(np.mean(samples)), std, samples, n_degenerate)


def curve_values(params: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Values of a (n_curves, 4) sigmoid family on `grid`, shape (n_curves, len(grid))."""
    params = np.asarray(params, dtype=float).reshape(-1, 1, 4)
    return sigmoid_values(np.asarray(grid, dtype=float)[None, :], params)


def trajectory_mae(true_family: np.ndarray, estimated_family: np.ndarray, grid: np.ndarray | None = None) -> float:
    """Mean absolute difference of curve values on `grid`, averaged over curves.

    Args:
    ----
        true_family: (n, 4) sigmoid parameters.

        estimated_family: (n, 4) sigmoid parameters of the same curves.

        grid: evaluation points. The default, 100 points over [0, 1], spans
            the dysfunction range every θ curve is evaluated on. λ families
            live on the stage axis and need a stage grid, as in
            `recovery_report`. The default grid is the same for every pair
            of families.

    """
    true_family = np.asarray(true_family, dtype=float).reshape(-1, 4)
    estimated_family = np.asarray(estimated_family, dtype=float).reshape(-1, 4)
    if true_family.shape != estimated_family.shape:
        msg = f"Curve families differ in size: {len(true_family)} vs {len(estimated_family)}."
        raise DataError(msg)
    grid = np.linspace(0.0, 1.0, GRID_POINTS) if grid is None else np.asarray(grid, dtype=float)
    if not len(grid):
        msg = "trajectory_mae needs a non-empty grid."
        raise DataError(msg)
    return float(np.mean(np.abs(curve_values(true_family, grid) - curve_values(estimated_family, grid))))


def affine_alignment(true_beta: np.ndarray, estimated_beta: np.ndarray) -> tuple[float, float]:
    """(slope, intercept) of the least-squares map from estimated onto true shifts."""
    fit = linregress(np.asarray(estimated_beta, dtype=float), np.asarray(true_beta, dtype=float))
    return float(fit.slope), float(fit.intercept)


def shift_r2(true_beta: np.ndarray, estimated_beta: np.ndarray) -> float:
    """R² of the linear regression of true on estimated time shifts."""
    true_beta = np.asarray(true_beta, dtype=float)
    estimated_beta = np.asarray(estimated_beta, dtype=float)
    if len(true_beta) != len(estimated_beta) or len(true_beta) < 3:
        msg = f"shift_r2 needs two vectors of equal length >= 3, got {len(true_beta)} and {len(estimated_beta)}."
        raise DataError(msg)
    if _is_constant(estimated_beta) or _is_constant(true_beta):
        msg = "shift_r2 is undefined for constant shifts."
        raise DegenerateInputError(msg)
    return float(linregress(estimated_beta, true_beta).rvalue ** 2)


def align_lambda(params: np.ndarray, slope: float, intercept: float) -> np.ndarray:
    """Re-express stage-axis sigmoids on the axis s' = slope · s + intercept."""
    out = np.array(params, dtype=float).reshape(-1, 4)
    out[:, 2] = slope * out[:, 2] + intercept
    out[:, 1] = out[:, 1] / slope
    return out


@dataclass(frozen=True)
class RecoveryReport:
    """How well a fit recovered generating parameters.

    Attributes
    ----------
        theta_mae: per biomarker, on the dysfunction axis [0, 1].
        lambda_mae: per disease, averaged over units, on the true stage axis
            after affine alignment.
        shift_r2: per disease.

    """

    theta_mae: dict[str, float]
    lambda_mae: dict[str, float]
    shift_r2: dict[str, float]

    @property
    def trajectory_mae(self) -> float:
        return float(np.mean(list(self.theta_mae.values())))

    def to_frame(self) -> pd.DataFrame:
        rows = [("theta_mae", k, v) for k, v in self.theta_mae.items()]
        rows += [("lambda_mae", k, v) for k, v in self.lambda_mae.items()]
        rows += [("shift_r2", k, v) for k, v in self.shift_r2.items()]
        return pd.DataFrame(rows, columns=["metric", "name", "value"])


def recovery_report(ground_truth: "GroundTruth", model: "FittedModel") -> RecoveryReport:
    """Compare a fitted model with the parameters that generated its data.

    Subjects are matched by position; the model must have been fitted on the
    generated dataset.
    """
    config = model.config
    true_theta = np.array([p.as_array() for p in ground_truth.theta])
    theta_mae = {
        name: trajectory_mae(true_theta[k], model.theta_array[k]) for k, name in enumerate(config.biomarkers)
    }

    true_beta = np.asarray(ground_truth.beta, dtype=float)
    slope, intercept = affine_alignment(true_beta, model.beta)
    max_years = max(float(np.max(m)) for m in ground_truth.dataset.visit_months) / 12.0
    grid = np.linspace(true_beta.min(), true_beta.max() + max_years, GRID_POINTS)

    disease = ground_truth.dataset.disease
    lambda_mae, r2 = {}, {}
    for d, label in enumerate(config.diseases):
        true_lambda = np.array([p.as_array() for p in ground_truth.lambda_[d]])
        aligned = align_lambda(model.lambda_array[d], slope, intercept)
        lambda_mae[label] = trajectory_mae(true_lambda, aligned, grid)
        members = disease == d
        if members.sum() >= 3:
            r2[label] = shift_r2(true_beta[members], model.beta[members])
    return RecoveryReport(theta_mae=theta_mae, lambda_mae=lambda_mae, shift_r2=r2)


@dataclass(frozen=True)
class Comparison:
    p_raw: float
    p_bonferroni: float
    significant: bool


def compare_models(
    samples_a: np.ndarray,
    samples_b: np.ndarray,
    comparisons: int = 1,
    alpha: float = SIGNIFICANCE_LEVEL,
) -> Comparison:
    """Two-tailed Welch t-test with Bonferroni correction.

    Raises
    ------
        DataError: fewer than two samples on a side.
        DegenerateInputError: both sides are the same constant.

    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        msg = "compare_models needs at least two samples per model."
        raise DataError(msg)
    if _is_constant(a) and _is_constant(b):
        if a[0] == b[0]:
            msg = "Both sample sets are the same constant."
            raise DegenerateInputError(msg)
        p_raw = 0.0
    else:
        p_raw = float(ttest_ind(a, b, equal_var=False).pvalue)
    p_bonferroni = min(1.0, p_raw * comparisons)
    return Comparison(p_raw, p_bonferroni, p_bonferroni < alpha)


@dataclass(frozen=True)
class CellStats:
    """Statistics of one (model, region) cell."""

    point: float
    mean: float
    std: float
    n: int
    n_degenerate: int = 0
    p_raw: float | None = None
    p_bonferroni: float | None = None
    significant: bool = False


@dataclass
class EvalReport:
    """Rank-correlation table, model × region.

    `reference` is the model every other model is tested against; without
    one there is no significance column.
    """

    models: list[str]
    regions: list[str]
    cells: dict[tuple[str, str], CellStats]
    bootstrap: int = DEFAULT_BOOTSTRAP
    reference: str | None = None
    recovery: RecoveryReport | None = None
    samples: dict[tuple[str, str], np.ndarray] = field(default_factory=dict, repr=False)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for model in self.models:
            for region in self.regions:
                cell = self.cells.get((model, region))
                if cell is None:
                    continue
                row = {
                    "model": model,
                    "region": region,
                    "spearman": cell.point,
                    "bootstrap_mean": cell.mean,
                    "bootstrap_std": cell.std,
                    "n": cell.n,
                    "degenerate_resamples": cell.n_degenerate,
                }
                if self.reference is not None:
                    row |= {"p_raw": cell.p_raw, "p_bonferroni": cell.p_bonferroni, "significant": cell.significant}
                rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_text(self) -> str:
        return format_report(self)


def _joined(pred: pd.DataFrame, truth: pd.DataFrame, regions: list[str]) -> pd.DataFrame:
    missing = [r for r in regions if r not in truth.columns]
    if missing:
        msg = f"Truth table has no columns {missing}."
        raise DataError(msg)
    left = pred[KEY_COLUMNS + [r for r in regions if r in pred.columns]]
    right = truth[KEY_COLUMNS + regions]
    merged = left.merge(right, on=KEY_COLUMNS, how="left", suffixes=("_pred", "_true"), indicator=True)
    unmatched = merged["_merge"] != "both"
    if unmatched.any():
        row = merged[unmatched].iloc[0]
        msg = (
            f"{int(unmatched.sum())} predicted visits have no match in the truth table, "
            f"e.g. subject {row['subject_id']!r} at month {row['months_since_baseline']}."
        )
        raise DataError(msg)
    return merged


def compare_table(
    predictions: dict[str, pd.DataFrame],
    truth: pd.DataFrame,
    regions: list[str],
    bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    reference: str | None = None,
) -> EvalReport:
    """Rank-correlation table of several models against the same truth.

    Per region, only visits where the truth and every model have a value are
    used, and every model is resampled with the same bootstrap draws. With a
    `reference`, each other model is tested against it with a Bonferroni
    family of size `len(predictions) - 1`.
    """
    models = list(predictions)
    if reference is not None and reference not in predictions:
        msg = f"Reference model {reference!r} is not among {models}."
        raise DataError(msg)
    if len(models) < 2:
        reference = None
    merged = {name: _joined(frame, truth, regions) for name, frame in predictions.items()}

    cells: dict[tuple[str, str], CellStats] = {}
    samples: dict[tuple[str, str], np.ndarray] = {}
    for r, region in enumerate(regions):
        true_values = merged[models[0]][f"{region}_true"].to_numpy(dtype=float)
        usable = np.isfinite(true_values)
        pred_values = {}
        for name in models:
            column = f"{region}_pred"
            if column not in merged[name]:
                msg = f"Model {name!r} made no predictions for {region!r}."
                raise DataError(msg)
            pred_values[name] = merged[name][column].to_numpy(dtype=float)
            usable &= np.isfinite(pred_values[name])
        n = int(usable.sum())
        indices = bootstrap_indices(n, bootstrap, [seed, r])
        results = {}
        for name in models:
            pred, meas = pred_values[name][usable], true_values[usable]
            result = bootstrap_corr(pred, meas, indices=indices)
            results[name] = result
            samples[(name, region)] = result.samples
            cells[(name, region)] = CellStats(
                point=spearman(pred, meas),
                mean=result.mean,
                std=result.std,
                n=n,
                n_degenerate=result.n_degenerate,
            )
        if reference is not None:
            for name in models:
                if name == reference:
                    continue
                test = compare_models(results[reference].samples, results[name].samples, len(models) - 1)
                cells[(name, region)] = replace(
                    cells[(name, region)],
                    p_raw=test.p_raw,
                    p_bonferroni=test.p_bonferroni,
                    significant=test.significant,
                )
    return EvalReport(
        models=models,
        regions=list(regions),
        cells=cells,
        bootstrap=bootstrap,
        reference=reference,
        samples=samples,
    )


def evaluate_predictions(
    pred: pd.DataFrame,
    truth: pd.DataFrame,
    regions: list[str] | None = None,
    bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    name: str = "prediction",
) -> EvalReport:
    """Rank correlation of one prediction table against a truth table."""
    if regions is None:
        regions = [c for c in pred.columns if c not in DATASET_COLUMNS and c in truth.columns]
    return compare_table({name: pred}, truth, regions, bootstrap=bootstrap, seed=seed)
