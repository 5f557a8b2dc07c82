"""Configuration models.

Every configuration object is a pydantic model that rejects unknown keys, so a
misspelt option in a YAML file fails loudly instead of being ignored. Files are
read with `load_config`, which accepts either a full run configuration or a
bare model configuration at the top level.
"""

import logging
import math
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .constants import COVARIATE_COLUMNS, CONTROL_LABEL
from .exceptions import SchemaError

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class FlatPrior(BaseModel):
    """Improper flat prior.

    Contributes nothing to the objective inside its support. `low` and `high`
    only bound the range optimiser restarts are drawn from; `lower`, when set,
    is an exclusive hard lower bound of the support.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["flat"] = "flat"
    low: float
    high: float
    lower: float | None = None

    @model_validator(mode="after")
    def _check_range(self) -> "FlatPrior":
        if self.high < self.low:
            msg = f"Flat prior range is empty: low={self.low} > high={self.high}."
            raise ValueError(msg)
        return self

    @property
    def center(self) -> float:
        return 0.5 * (self.low + self.high)

    def neg_log_density(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.lower is not None:
            out = np.where(x > self.lower, out, np.inf)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator) -> float:
        value = rng.uniform(self.low, self.high)
        if self.lower is not None and value <= self.lower:
            value = max(self.center, np.nextafter(self.lower, np.inf))
        return float(value)


class GaussianPrior(BaseModel):
    """Gaussian prior, optionally truncated below at `lower`.

    The truncation constant is left out of the density since it does not
    depend on the parameter.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["gaussian"] = "gaussian"
    mean: float
    std: float = Field(gt=0)
    lower: float | None = None

    @property
    def center(self) -> float:
        return self.mean

    def neg_log_density(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.std
        out = 0.5 * z * z + math.log(self.std) + _LOG_SQRT_2PI
        if self.lower is not None:
            out = np.where(x > self.lower, out, np.inf)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator) -> float:
        for _ in range(100):
            value = rng.normal(self.mean, self.std)
            if self.lower is None or value > self.lower:
                return float(value)
        # the prior mass above `lower` is tiny, fall back to a point inside
        return float(max(self.mean, self.lower + self.std))


Prior = Annotated[FlatPrior | GaussianPrior, Field(discriminator="kind")]


class SigmoidPriors(BaseModel):
    """Priors on the four components of a sigmoid (a, b, c, d)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    amplitude: Prior
    slope: Prior
    center: Prior
    offset: Prior

    def components(self) -> tuple[Prior, Prior, Prior, Prior]:
        return (self.amplitude, self.slope, self.center, self.offset)


def _default_theta_priors() -> SigmoidPriors:
    return SigmoidPriors(
        amplitude=FlatPrior(low=0.5, high=1.5, lower=0.0),
        slope=FlatPrior(low=1.0, high=15.0, lower=0.0),
        center=FlatPrior(low=0.0, high=1.0),
        offset=FlatPrior(low=-0.2, high=0.2),
    )


def _default_lambda_priors() -> SigmoidPriors:
    return SigmoidPriors(
        amplitude=FlatPrior(low=0.5, high=1.5, lower=0.0),
        slope=GaussianPrior(mean=0.25, std=0.5, lower=0.0),
        center=GaussianPrior(mean=0.0, std=10.0),
        offset=FlatPrior(low=-0.2, high=0.2),
    )


class PriorSpec(BaseModel):
    """Priors for every parameter family.

    Defaults anchor the stage axis weakly at the scale of the synthetic
    reference cohort: β ~ N(0, 10) years, dysfunction slopes ~ N(0.25, 0.5)
    truncated positive, dysfunction centres ~ N(0, 10), biomarker trajectories
    flat apart from positive amplitude and slope.
    """

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    theta: SigmoidPriors = Field(default_factory=_default_theta_priors)
    lambda_: SigmoidPriors = Field(default_factory=_default_lambda_priors, alias="lambda")
    beta: Prior = Field(default_factory=lambda: GaussianPrior(mean=0.0, std=10.0))


class OptimizerSpec(BaseModel):
    """Settings of the inner solver and of the outer sweep loop."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    restarts: int = Field(5, ge=0)
    max_iter: int = Field(500, ge=1)
    xatol: float = Field(1e-8, gt=0)
    fatol: float = Field(1e-12, gt=0)
    sweep_tol: float = Field(1e-6, gt=0)
    max_sweeps: int = Field(100, ge=1)
    rng_seed: int = 0
    beta_grid: int = Field(64, ge=2)
    stage_bounds: tuple[float, float] | None = None
    init_stage_halfwidth: float = Field(10.0, gt=0)
    n_threads: int = Field(1, ge=1)

    @field_validator("stage_bounds")
    @classmethod
    def _check_bounds(cls, value: tuple[float, float] | None) -> tuple[float, float] | None:
        if value is not None and not value[0] < value[1]:
            msg = f"stage_bounds must be increasing, got {value}."
            raise ValueError(msg)
        return value


class ModelConfig(BaseModel):
    """Structure of a DKT model.

    `unit_allocation[k]` is the index of the agnostic unit biomarker `k`
    belongs to. In YAML it may also be written as a mapping from biomarker
    name to unit name.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    biomarkers: list[str]
    units: list[str]
    unit_allocation: list[int]
    diseases: list[str]
    fixed_lambda_shape: bool = True
    priors: PriorSpec = Field(default_factory=PriorSpec)
    optimizer: OptimizerSpec = Field(default_factory=OptimizerSpec)

    @model_validator(mode="before")
    @classmethod
    def _allocation_by_name(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not isinstance(data.get("unit_allocation"), dict):
            return data
        data = dict(data)
        mapping = data["unit_allocation"]
        biomarkers = data.get("biomarkers") or list(mapping)
        units = data.get("units") or sorted({str(u) for u in mapping.values()})
        try:
            data["unit_allocation"] = [units.index(str(mapping[name])) for name in biomarkers]
        except (KeyError, ValueError) as e:
            msg = f"unit_allocation does not cover every biomarker with a known unit: {e}"
            raise ValueError(msg) from e
        data["biomarkers"] = list(biomarkers)
        data["units"] = list(units)
        return data

    @model_validator(mode="after")
    def _check_allocation(self) -> "ModelConfig":
        if len(self.unit_allocation) != len(self.biomarkers):
            msg = (
                f"unit_allocation has {len(self.unit_allocation)} entries for "
                f"{len(self.biomarkers)} biomarkers."
            )
            raise ValueError(msg)
        for k, unit in enumerate(self.unit_allocation):
            if not 0 <= unit < len(self.units):
                msg = f"Biomarker {self.biomarkers[k]!r} is allocated to unknown unit index {unit}."
                raise ValueError(msg)
        for name, values in (("biomarkers", self.biomarkers), ("units", self.units), ("diseases", self.diseases)):
            if not values:
                msg = f"{name} must not be empty."
                raise ValueError(msg)
            if len(set(values)) != len(values):
                msg = f"{name} contains duplicates: {values}."
                raise ValueError(msg)
        return self

    @property
    def n_biomarkers(self) -> int:
        return len(self.biomarkers)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_diseases(self) -> int:
        return len(self.diseases)

    def biomarkers_in_unit(self, unit: int) -> list[int]:
        return [k for k, u in enumerate(self.unit_allocation) if u == unit]

    def with_optimizer(self, **changes: Any) -> "ModelConfig":
        """Return a copy with some optimizer settings replaced."""
        optimizer = OptimizerSpec.model_validate({**self.optimizer.model_dump(), **changes})
        return self.model_copy(update={"optimizer": optimizer})


class PreprocessSpec(BaseModel):
    """Preprocessing applied before fitting."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    residualize: bool = False
    normalize: bool = False
    covariates: list[str] = Field(default_factory=lambda: list(COVARIATE_COLUMNS))
    control_label: str = CONTROL_LABEL
    # +1: larger values are more abnormal, -1: smaller values are (volumes, FA)
    directions: dict[str, Literal[1, -1]] = Field(default_factory=dict)

    @field_validator("covariates")
    @classmethod
    def _known_covariates(cls, value: list[str]) -> list[str]:
        unknown = sorted(set(value) - set(COVARIATE_COLUMNS))
        if unknown:
            msg = f"Unknown covariates {unknown}; expected a subset of {list(COVARIATE_COLUMNS)}."
            raise ValueError(msg)
        return value


class RunConfig(BaseModel):
    """Options of a command-line run, as read from a configuration file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig | None = None
    preprocess: PreprocessSpec = Field(default_factory=PreprocessSpec)
    seed: int | None = None
    threads: int | None = Field(None, ge=1)
    verbosity: int = Field(1, ge=0, le=2)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML (or JSON) configuration file.

    Args:
    ----
        path: location of the file. A file whose top level carries
            `unit_allocation` is read as a bare `ModelConfig`.

    Returns:
    -------
        The validated run configuration.

    """
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
    except OSError as e:
        msg = f"Cannot read configuration file {path}: {e}"
        raise SchemaError(msg) from e
    except yaml.YAMLError as e:
        msg = f"Configuration file {path} is not valid YAML: {e}"
        raise SchemaError(msg) from e

    if not isinstance(raw, dict):
        msg = f"Configuration file {path} must contain a mapping at the top level."
        raise SchemaError(msg)
    if "unit_allocation" in raw:
        raw = {"model": raw}
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        msg = f"Invalid configuration in {path}:\n{e}"
        raise SchemaError(msg) from e
    logger.debug(f"Loaded configuration from {path}")
    return config


def dump_config(config: RunConfig | ModelConfig, path: str | Path) -> None:
    """Write a configuration as YAML."""
    if isinstance(config, ModelConfig):
        config = RunConfig(model=config)
    with open(path, "w") as f:
        yaml.safe_dump(config.model_dump(mode="json", by_alias=True, exclude_none=True), f, sort_keys=False)
