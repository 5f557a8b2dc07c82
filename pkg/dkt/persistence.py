"""Saving and loading fitted models as versioned JSON documents."""

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import ModelConfig
from .constants import SCHEMA_VERSION
from .exceptions import CorruptModelFileError, ModelVersionError
from .model import FitDiagnostics, FittedModel
from .preprocess import NormalizationParams

logger = logging.getLogger(__name__)


class ModelDocument(BaseModel):
    """On-disk layout of a fitted model."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: str
    config: ModelConfig
    theta: list[list[float]]
    lambda_: list[list[list[float]]] = Field(alias="lambda")
    beta: list[float]
    epsilon: list[float]
    normalization: NormalizationParams | None = None
    diagnostics: dict[str, Any] | None = None
    trace: list[float] = []
    subject_ids: list[str] = []
    biomarkers: list[str] = []
    diseases: list[str] = []


def to_document(model: FittedModel) -> ModelDocument:
    return ModelDocument(
        schema_version=SCHEMA_VERSION,
        config=model.config,
        theta=model.theta_array.tolist(),
        lambda_=model.lambda_array.tolist(),
        beta=model.beta.tolist(),
        epsilon=model.epsilon.tolist(),
        normalization=model.normalization,
        diagnostics=model.diagnostics.to_dict() if model.diagnostics is not None else None,
        trace=list(model.trace),
        subject_ids=list(model.subject_ids),
        biomarkers=list(model.config.biomarkers),
        diseases=list(model.config.diseases),
    )


def save_model(model: FittedModel, path: str | Path) -> None:
    """Write `model` as JSON. Floats are written with full precision."""
    document = to_document(model).model_dump(mode="python", by_alias=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    logger.debug(f"Saved model to {path}")


def load_model(path: str | Path) -> FittedModel:
    """Read a model written by `save_model`.

    Raises
    ------
        ModelVersionError: the file carries another schema version.
        CorruptModelFileError: the file is not a readable model document.

    """
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        msg = f"{path} is not a valid model file: {e}"
        raise CorruptModelFileError(msg) from e
    except OSError as e:
        msg = f"Cannot read model file {path}: {e}"
        raise CorruptModelFileError(msg) from e

    if not isinstance(raw, dict) or "schema_version" not in raw:
        msg = f"{path} has no schema_version field."
        raise CorruptModelFileError(msg)
    if raw["schema_version"] != SCHEMA_VERSION:
        msg = f"{path} has schema version {raw['schema_version']!r}, expected {SCHEMA_VERSION!r}."
        raise ModelVersionError(msg)

    try:
        document = ModelDocument.model_validate(raw)
        diagnostics = FitDiagnostics.from_dict(document.diagnostics) if document.diagnostics else None
        return FittedModel.from_arrays(
            np.array(document.theta, dtype=float),
            np.array(document.lambda_, dtype=float),
            np.array(document.beta, dtype=float),
            np.array(document.epsilon, dtype=float),
            document.config,
            subject_ids=tuple(document.subject_ids),
            trace=tuple(document.trace),
            diagnostics=diagnostics,
            normalization=document.normalization,
        )
    except (ValidationError, ValueError, KeyError, TypeError) as e:
        msg = f"{path} is not a valid model file: {e}"
        raise CorruptModelFileError(msg) from e
