"""The DKT generative model.

A subject's disease stage is its time shift plus the time since baseline. A
disease-specific sigmoid maps the stage to one dysfunction score per agnostic
unit, and a disease-agnostic sigmoid maps the dysfunction score of the unit a
biomarker belongs to onto the biomarker's expected value. Measurements scatter
around that value with a per-biomarker Gaussian noise variance.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any

import numpy as np

from .constants import EXP_CLAMP, MONTHS_PER_YEAR
from .exceptions import DegenerateNoiseError, InvalidParameterError

if TYPE_CHECKING:
    from .config import ModelConfig, PriorSpec, SigmoidPriors
    from .dataset import CohortDataset
    from .preprocess import NormalizationParams


@dataclass(frozen=True)
class SigmoidParams:
    """Four-parameter logistic curve a / (1 + exp(-b (s - c))) + d."""

    amplitude: float
    slope: float
    center: float
    offset: float

    def __post_init__(self) -> None:
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            msg = f"Sigmoid parameters must be finite, got {tuple(values)}."
            raise InvalidParameterError(msg)
        if self.amplitude <= 0:
            msg = f"Sigmoid amplitude must be positive, got {self.amplitude}."
            raise InvalidParameterError(msg)
        if self.slope <= 0:
            msg = f"Sigmoid slope must be positive, got {self.slope}."
            raise InvalidParameterError(msg)

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitude, self.slope, self.center, self.offset], dtype=float)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.amplitude, self.slope, self.center, self.offset)

    @classmethod
    def from_array(cls, values: np.ndarray | list[float] | tuple[float, ...]) -> SigmoidParams:
        a, b, c, d = (float(v) for v in values)
        return cls(a, b, c, d)


def sigmoid_values(s: np.ndarray | float, params: np.ndarray) -> np.ndarray:
    """Vectorised sigmoid.

    Args:
    ----
        s: input-axis values.

        params: array whose last axis holds (a, b, c, d); broadcast against `s`.

    """
    params = np.asarray(params, dtype=float)
    a, b, c, d = params[..., 0], params[..., 1], params[..., 2], params[..., 3]
    z = np.clip(b * (np.asarray(s, dtype=float) - c), -EXP_CLAMP, EXP_CLAMP)
    return a / (1.0 + np.exp(-z)) + d


def sigmoid_eval(s: np.ndarray | float, p: SigmoidParams) -> np.ndarray | float:
    out = sigmoid_values(s, p.as_array())
    return float(out) if np.ndim(out) == 0 else out


def stage(beta: np.ndarray | float, months: np.ndarray | float) -> np.ndarray | float:
    """Disease stage in years."""
    return beta + np.asarray(months, dtype=float) / MONTHS_PER_YEAR


def dysfunction_score(beta_i: float | np.ndarray, m_ij: float | np.ndarray, lambda_: SigmoidParams):
    """Dysfunction score of one unit at stage `beta_i + m_ij / 12`."""
    return sigmoid_eval(stage(beta_i, m_ij), lambda_)


def biomarker_predict(
    beta_i: float | np.ndarray,
    m_ij: float | np.ndarray,
    lambda_: SigmoidParams,
    theta: SigmoidParams,
):
    """Expected biomarker value: theta's sigmoid of the unit's dysfunction score."""
    return sigmoid_eval(dysfunction_score(beta_i, m_ij, lambda_), theta)


@dataclass(frozen=True)
class FitDiagnostics:
    """What happened during a fit.

    `trace` holds the penalized objective before the first sweep and after
    every sweep, `posterior_trace` the negative log posterior at the same
    points. `last_improvement` maps each parameter family to the last sweep
    in which it lowered the objective (0 if never). `block_trace` is only
    filled when block tracking was requested.
    """

    sweeps: int
    trace: tuple[float, ...]
    converged: bool
    last_improvement: dict[str, int] = field(default_factory=dict)
    empty_blocks: tuple[tuple[int, int], ...] = ()
    posterior_trace: tuple[float, ...] = ()
    block_trace: tuple[tuple[str, str, float], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "sweeps": self.sweeps,
            "trace": list(self.trace),
            "converged": self.converged,
            "last_improvement": dict(self.last_improvement),
            "empty_blocks": [list(b) for b in self.empty_blocks],
            "posterior_trace": list(self.posterior_trace),
            "block_trace": [list(b) for b in self.block_trace],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FitDiagnostics:
        return cls(
            sweeps=int(data["sweeps"]),
            trace=tuple(float(v) for v in data["trace"]),
            converged=bool(data["converged"]),
            last_improvement={str(k): int(v) for k, v in data.get("last_improvement", {}).items()},
            empty_blocks=tuple((int(d), int(l)) for d, l in data.get("empty_blocks", [])),
            posterior_trace=tuple(float(v) for v in data.get("posterior_trace", [])),
            block_trace=tuple((str(f), str(b), float(v)) for f, b, v in data.get("block_trace", [])),
        )


@dataclass(frozen=True, eq=False)
class FittedModel:
    """All parameters of a DKT model.

    Attributes
    ----------
        theta: biomarker trajectory per biomarker k.
        lambda_: dysfunction trajectory per disease d and unit l, as
            `lambda_[d][l]`.
        beta: time shift per training subject, in years.
        epsilon: noise variance per biomarker.
        config: structure, priors and optimizer settings the model was fitted with.
        subject_ids: training subject identifiers, aligned with `beta`.
        trace: penalized objective per sweep.

    """

    theta: tuple[SigmoidParams, ...]
    lambda_: tuple[tuple[SigmoidParams, ...], ...]
    beta: np.ndarray
    epsilon: np.ndarray
    config: ModelConfig
    subject_ids: tuple[str, ...] = ()
    trace: tuple[float, ...] = ()
    diagnostics: FitDiagnostics | None = None
    normalization: NormalizationParams | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "epsilon", np.asarray(self.epsilon, dtype=float))
        if len(self.theta) != self.config.n_biomarkers or len(self.epsilon) != self.config.n_biomarkers:
            msg = "theta and epsilon need one entry per biomarker."
            raise InvalidParameterError(msg)
        if len(self.lambda_) != self.config.n_diseases or any(
            len(row) != self.config.n_units for row in self.lambda_
        ):
            msg = "lambda needs one entry per disease and unit."
            raise InvalidParameterError(msg)
        if np.any(self.epsilon < 0) or not np.all(np.isfinite(self.epsilon)):
            msg = f"Noise variances must be finite and non-negative, got {self.epsilon}."
            raise InvalidParameterError(msg)
        if self.subject_ids and len(self.subject_ids) != len(self.beta):
            msg = "subject_ids and beta must have equal lengths."
            raise InvalidParameterError(msg)

    @cached_property
    def theta_array(self) -> np.ndarray:
        """θ as a (K, 4) array."""
        return np.array([p.as_array() for p in self.theta]).reshape(len(self.theta), 4)

    @cached_property
    def lambda_array(self) -> np.ndarray:
        """λ as a (D, L, 4) array."""
        return np.array([[p.as_array() for p in row] for row in self.lambda_]).reshape(
            self.config.n_diseases,
            self.config.n_units,
            4,
        )

    @cached_property
    def allocation(self) -> np.ndarray:
        return np.asarray(self.config.unit_allocation, dtype=np.int64)

    def replace(self, **changes: Any) -> FittedModel:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_arrays(
        cls,
        theta: np.ndarray,
        lambda_: np.ndarray,
        beta: np.ndarray,
        epsilon: np.ndarray,
        config: ModelConfig,
        **kwargs: Any,
    ) -> FittedModel:
        return cls(
            theta=tuple(SigmoidParams.from_array(row) for row in theta),
            lambda_=tuple(tuple(SigmoidParams.from_array(p) for p in row) for row in lambda_),
            beta=np.array(beta, dtype=float),
            epsilon=np.array(epsilon, dtype=float),
            config=config,
            **kwargs,
        )


def predict_measurements(
    data: CohortDataset,
    theta: np.ndarray,
    lambda_: np.ndarray,
    beta: np.ndarray,
    allocation: np.ndarray,
) -> np.ndarray:
    """ŷ for every measurement of `data`, from raw parameter arrays."""
    k = data.biomarker
    s = beta[data.subject] + data.years
    gamma = sigmoid_values(s, lambda_[data.measurement_disease, allocation[k]])
    return sigmoid_values(gamma, theta[k])


def predictions(data: CohortDataset, model: FittedModel) -> np.ndarray:
    return predict_measurements(data, model.theta_array, model.lambda_array, model.beta, model.allocation)


def residuals(data: CohortDataset, model: FittedModel) -> np.ndarray:
    """y - ŷ in measurement order."""
    return data.value - predictions(data, model)


def sigmoid_penalty(params: np.ndarray, priors: SigmoidPriors, free: tuple[int, ...] = (0, 1, 2, 3)) -> float:
    """Σ -log p over the free components of one sigmoid."""
    components = priors.components()
    return float(sum(components[j].neg_log_density(params[j]) for j in free))


def lambda_free_components(config: ModelConfig) -> tuple[int, ...]:
    return (1, 2) if config.fixed_lambda_shape else (0, 1, 2, 3)


def prior_penalty(
    theta: np.ndarray,
    lambda_: np.ndarray,
    beta: np.ndarray,
    priors: PriorSpec,
    config: ModelConfig,
) -> float:
    """-Σ log p(θ_k) - Σ log p(λ_d^l) - Σ log p(β_i)."""
    free = lambda_free_components(config)
    total = sum(sigmoid_penalty(row, priors.theta) for row in theta)
    total += sum(sigmoid_penalty(p, priors.lambda_, free) for row in lambda_ for p in row)
    total += float(np.sum(priors.beta.neg_log_density(beta))) if len(beta) else 0.0
    return float(total)


def penalized_objective(data: CohortDataset, model: FittedModel, config: ModelConfig | None = None) -> float:
    """Σ_Ω r² - Σ log priors.

    The unweighted cost minimised by every block update of the fit.
    """
    config = config or model.config
    r = residuals(data, model)
    prior = prior_penalty(model.theta_array, model.lambda_array, model.beta, config.priors, config)
    return float(np.dot(r, r)) + prior


def neg_log_posterior(data: CohortDataset, model: FittedModel, config: ModelConfig | None = None) -> float:
    """Gaussian negative log likelihood over Ω plus negative log priors.

    Raises
    ------
        DegenerateNoiseError: a biomarker has zero noise variance but a
            nonzero residual.

    """
    config = config or model.config
    r = residuals(data, model)
    eps = model.epsilon[data.biomarker]
    zero = eps == 0
    if np.any(zero & (r != 0)):
        bad = sorted({config.biomarkers[k] for k in data.biomarker[zero & (r != 0)]})
        msg = f"Zero noise variance with nonzero residuals for biomarkers {bad}."
        raise DegenerateNoiseError(msg)
    eps = np.where(zero, np.finfo(float).tiny, eps)
    nll = float(np.sum(r * r / (2.0 * eps) + 0.5 * np.log(2.0 * math.pi * eps)))
    return nll + prior_penalty(model.theta_array, model.lambda_array, model.beta, config.priors, config)
