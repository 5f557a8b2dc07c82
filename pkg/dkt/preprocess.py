"""Reading, writing and preprocessing cohort tables.

Tables are CSV files with the exact header

    subject_id,disease,diagnosis,months_since_baseline,age,gender,tiv,source,<biomarkers...>

and one row per visit; an empty cell is a missing measurement. Ground-truth
files carry an additional `true_beta` column.

Preprocessing follows two steps. Covariates are regressed out per biomarker
with a least-squares fit on control subjects, and every row is replaced by
its residual plus the control mean. Each biomarker is then min-max scaled to
[0, 1] and flipped where smaller raw values are more abnormal. The fitted
coefficients and ranges are kept in `NormalizationParams` so test data can be
mapped with the training transform; test values outside [0, 1] are not
clipped.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from .config import PreprocessSpec
from .constants import COVARIATE_COLUMNS, DATASET_COLUMNS, ID_COLUMNS, TRUE_BETA_COLUMN
from .dataset import CohortDataset
from .exceptions import (
    ConstantBiomarkerError,
    DataError,
    InsufficientDataError,
    ParseError,
    RankDeficientError,
    SchemaError,
    UnknownBiomarkerError,
)

logger = logging.getLogger(__name__)

MIN_CONTROL_ROWS = 10
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True, eq=False)
class RawTable:
    """A parsed cohort table, one row per visit.

    Attributes
    ----------
        frame: identifier, covariate and biomarker columns; numeric cells are
            floats with NaN for missing values.
        biomarkers: biomarker column names in file order.
        true_beta: the `true_beta` column of ground-truth files, per row.

    """

    frame: pd.DataFrame
    biomarkers: tuple[str, ...]
    true_beta: np.ndarray | None = field(default=None)

    def to_dataset(self, diseases: list[str] | None = None) -> CohortDataset:
        """Dataset of the values as they are, without any preprocessing."""
        return CohortDataset.from_wide(self.frame, list(self.biomarkers), diseases)

    def subject_true_beta(self) -> dict[str, float]:
        if self.true_beta is None:
            return {}
        firsts = self.frame.assign(_beta=self.true_beta).groupby("subject_id", sort=False)["_beta"].first()
        return {str(k): float(v) for k, v in firsts.items()}

    def with_values(self, values: dict[str, np.ndarray]) -> "RawTable":
        frame = self.frame.copy()
        for name, column in values.items():
            frame[name] = column
        return RawTable(frame, self.biomarkers, self.true_beta)


class NormalizationParams(BaseModel):
    """Frozen preprocessing transform.

    `coefficients[b]` holds the intercept followed by one slope per entry of
    `covariates`; it is empty when residualisation was not applied.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    biomarkers: list[str]
    covariates: list[str] = []
    coefficients: dict[str, list[float]] = {}
    control_means: dict[str, float] = {}
    minimum: dict[str, float] = {}
    maximum: dict[str, float] = {}
    direction: dict[str, Literal[1, -1]] = {}


def load_csv(path: str | Path) -> RawTable:
    """Parse a cohort CSV.

    Raises
    ------
        SchemaError: the file is missing or its header does not match.
        ParseError: a cell is not a finite number; the message names the
            file line and column.

    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        msg = f"No such file: {path}"
        raise SchemaError(msg) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        msg = f"Cannot parse {path}: {e}"
        raise SchemaError(msg) from e

    columns = list(raw.columns)
    if tuple(columns[: len(DATASET_COLUMNS)]) != DATASET_COLUMNS:
        msg = f"{path}: header must start with {','.join(DATASET_COLUMNS)}, got {','.join(columns)}."
        raise SchemaError(msg)
    rest = columns[len(DATASET_COLUMNS) :]
    has_truth = TRUE_BETA_COLUMN in rest
    biomarkers = tuple(c for c in rest if c != TRUE_BETA_COLUMN)
    if len(set(biomarkers)) != len(biomarkers):
        msg = f"{path}: duplicate biomarker columns."
        raise SchemaError(msg)

    frame = raw[list(ID_COLUMNS[:3])].copy()
    numeric = ["months_since_baseline", *COVARIATE_COLUMNS, *biomarkers] + ([TRUE_BETA_COLUMN] if has_truth else [])
    for column in numeric:
        cells = raw[column].str.strip()
        values = pd.to_numeric(cells.where(cells != ""), errors="coerce").to_numpy(dtype=float)
        bad = (cells != "").to_numpy() & ~np.isfinite(values)
        if column == "months_since_baseline":
            bad |= (cells == "").to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            # header is line 1
            msg = f"{path}: line {row + 2}, column {column!r}: cannot parse {raw[column].iloc[row]!r} as a number."
            raise ParseError(msg)
        frame[column] = values

    if frame.duplicated(["subject_id", "months_since_baseline"]).any():
        dup = frame[frame.duplicated(["subject_id", "months_since_baseline"])].iloc[0]
        msg = f"{path}: subject {dup['subject_id']!r} has two rows at month {dup['months_since_baseline']}."
        raise DataError(msg)

    true_beta = frame.pop(TRUE_BETA_COLUMN).to_numpy() if has_truth else None
    logger.debug(f"Read {len(frame)} rows and {len(biomarkers)} biomarkers from {path}")
    return RawTable(frame=frame, biomarkers=biomarkers, true_beta=true_beta)


def write_csv(
    dataset: CohortDataset,
    path: str | Path,
    true_beta: np.ndarray | None = None,
    covariates: pd.DataFrame | None = None,
) -> None:
    """Write a dataset in the cohort CSV layout.

    Args:
    ----
        dataset: cohort to write.

        path: output file.

        true_beta: per-subject generating time shifts; adds a `true_beta`
            column.

        covariates: optional per-visit covariate columns aligned with the
            rows of `dataset.to_wide()`; left empty otherwise.

    """
    wide = dataset.to_wide()
    for column in COVARIATE_COLUMNS:
        wide[column] = covariates[column].to_numpy() if covariates is not None else np.nan
    ordered = [*DATASET_COLUMNS, *dataset.biomarkers]
    if true_beta is not None:
        per_row = np.repeat(np.asarray(true_beta, dtype=float), [len(m) for m in dataset.visit_months])
        wide[TRUE_BETA_COLUMN] = per_row
        ordered.append(TRUE_BETA_COLUMN)
    wide[ordered].to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def write_frame(frame: pd.DataFrame, path: str | Path) -> None:
    """Write a wide prediction table, adding empty covariate columns."""
    frame = frame.copy()
    for column in COVARIATE_COLUMNS:
        if column not in frame:
            frame[column] = np.nan
    biomarkers = [c for c in frame.columns if c not in DATASET_COLUMNS]
    frame[[*DATASET_COLUMNS, *biomarkers]].to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def _design(frame: pd.DataFrame, covariates: list[str]) -> np.ndarray:
    return np.column_stack([np.ones(len(frame)), frame[covariates].to_numpy(dtype=float)])


def residualize(table: RawTable, spec: PreprocessSpec | None = None) -> tuple[RawTable, NormalizationParams]:
    """Regress covariates out of every biomarker.

    The regression is fitted on control rows only and applied to all rows:
    value - X·coef + mean of the control values.

    Raises
    ------
        InsufficientDataError: fewer than 10 usable control rows for a biomarker.
        RankDeficientError: the covariate design on controls is rank deficient.

    """
    spec = spec or PreprocessSpec()
    covariates = list(spec.covariates)
    frame = table.frame
    controls = (frame["diagnosis"] == spec.control_label).to_numpy()
    design = _design(frame, covariates)
    covariates_ok = np.all(np.isfinite(design), axis=1)

    coefficients: dict[str, list[float]] = {}
    control_means: dict[str, float] = {}
    values: dict[str, np.ndarray] = {}
    for name in table.biomarkers:
        y = frame[name].to_numpy(dtype=float)
        present = np.isfinite(y)
        if np.any(present & ~covariates_ok):
            msg = f"Biomarker {name!r} has measurements on rows with missing covariates {covariates}."
            raise DataError(msg)
        rows = controls & present
        if rows.sum() < MIN_CONTROL_ROWS:
            msg = f"Biomarker {name!r} has {rows.sum()} control rows, at least {MIN_CONTROL_ROWS} are needed."
            raise InsufficientDataError(msg)
        x = design[rows]
        if np.linalg.matrix_rank(x) < x.shape[1]:
            msg = f"Covariates {covariates} are rank deficient on the control rows of {name!r}."
            raise RankDeficientError(msg)
        coef, *_ = np.linalg.lstsq(x, y[rows], rcond=None)
        mean = float(np.mean(y[rows]))
        coefficients[name] = coef.tolist()
        control_means[name] = mean
        out = np.full(len(y), np.nan)
        out[present] = y[present] - design[present] @ coef + mean
        values[name] = out

    params = NormalizationParams(
        biomarkers=list(table.biomarkers),
        covariates=covariates,
        coefficients=coefficients,
        control_means=control_means,
    )
    return table.with_values(values), params


def _direction(name: str, spec: PreprocessSpec) -> Literal[1, -1]:
    return spec.directions.get(name, 1)


def normalize(
    table: RawTable,
    spec: PreprocessSpec | None = None,
    params: NormalizationParams | None = None,
    diseases: list[str] | None = None,
) -> tuple[CohortDataset, NormalizationParams]:
    """Min-max scale each biomarker to [0, 1], larger meaning more abnormal.

    Args:
    ----
        table: values to scale, usually residualised.

        spec: abnormality directions.

        params: residualisation parameters to carry along.

        diseases: disease label order of the resulting dataset.

    Raises:
    ------
        ConstantBiomarkerError: a biomarker has no spread.

    """
    spec = spec or PreprocessSpec()
    unknown = sorted(set(spec.directions) - set(table.biomarkers))
    if unknown:
        msg = f"Directions given for unknown biomarkers {unknown}."
        raise UnknownBiomarkerError(msg)
    minimum, maximum, direction = {}, {}, {}
    values = {}
    for name in table.biomarkers:
        y = table.frame[name].to_numpy(dtype=float)
        lo, hi = float(np.nanmin(y)), float(np.nanmax(y))
        if not hi > lo:
            msg = f"Biomarker {name!r} is constant and cannot be normalised."
            raise ConstantBiomarkerError(msg)
        minimum[name], maximum[name], direction[name] = lo, hi, _direction(name, spec)
        values[name] = _scale(y, lo, hi, direction[name])

    base = params.model_dump() if params is not None else {"biomarkers": list(table.biomarkers)}
    params = NormalizationParams(**{**base, "minimum": minimum, "maximum": maximum, "direction": direction})
    return table.with_values(values).to_dataset(diseases), params


def _scale(y: np.ndarray, lo: float, hi: float, direction: int) -> np.ndarray:
    unit = (y - lo) / (hi - lo)
    return 1.0 - unit if direction == -1 else unit


def denormalize(values: np.ndarray | float, biomarker: str, params: NormalizationParams) -> np.ndarray | float:
    """Map normalised values of one biomarker back onto its (residualised) raw scale."""
    if biomarker not in params.minimum:
        msg = f"No normalisation range for biomarker {biomarker!r}."
        raise UnknownBiomarkerError(msg)
    lo, hi = params.minimum[biomarker], params.maximum[biomarker]
    unit = np.asarray(values, dtype=float)
    if params.direction[biomarker] == -1:
        unit = 1.0 - unit
    out = lo + unit * (hi - lo)
    return float(out) if np.ndim(out) == 0 else out


def apply_normalization(
    table: RawTable,
    params: NormalizationParams,
    diseases: list[str] | None = None,
) -> CohortDataset:
    """Apply a frozen transform to new data, without refitting anything."""
    frame = table.frame
    values = {}
    for name in table.biomarkers:
        if name not in params.biomarkers:
            msg = f"Biomarker {name!r} was not part of the fitted transform."
            raise UnknownBiomarkerError(msg)
        y = frame[name].to_numpy(dtype=float)
        if params.coefficients:
            coef = np.asarray(params.coefficients[name])
            present = np.isfinite(y)
            design = _design(frame, params.covariates)
            out = np.full(len(y), np.nan)
            out[present] = y[present] - design[present] @ coef + params.control_means[name]
            y = out
        if params.minimum:
            y = _scale(y, params.minimum[name], params.maximum[name], params.direction[name])
        values[name] = y
    return table.with_values(values).to_dataset(diseases)


def preprocess(
    table: RawTable,
    spec: PreprocessSpec,
    diseases: list[str] | None = None,
) -> tuple[CohortDataset, NormalizationParams | None]:
    """Residualise and/or normalise as `spec` asks."""
    params = None
    if spec.residualize:
        table, params = residualize(table, spec)
    if spec.normalize:
        return normalize(table, spec, params, diseases)
    return table.to_dataset(diseases), params
