"""Synthetic cohorts that follow the DKT model exactly.

The default recipe has two diseases ("AD" and "PCA") with opposite orderings
of two agnostic units, six biomarkers alternating between the units, four
yearly visits per subject and Gaussian noise with standard deviation 0.05.
PCA subjects only keep biomarkers k2 and k3, emulating a cohort observed in
one modality.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.special import expit

from .config import ModelConfig
from .constants import CONTROL_LABEL, PATIENT_LABEL
from .dataset import CohortDataset
from .exceptions import SchemaError
from .model import SigmoidParams, biomarker_predict
from .preprocess import write_csv

logger = logging.getLogger(__name__)

Quad = tuple[float, float, float, float]


class SynthSpec(BaseModel):
    """Recipe of a synthetic cohort."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    diseases: list[str] = Field(default_factory=lambda: ["AD", "PCA"])
    subjects_per_disease: list[int] = Field(default_factory=lambda: [100, 50])
    beta_low: float = -13.0
    beta_high: float = 10.0
    visits: int = Field(4, gt=0)
    visit_spacing_months: float = Field(12.0, gt=0)
    biomarkers: list[str] = Field(default_factory=lambda: [f"k{k}" for k in range(6)])
    units: list[str] = Field(default_factory=lambda: ["l0", "l1"])
    unit_allocation: list[int] = Field(default_factory=lambda: [0, 1, 0, 1, 0, 1])
    noise_std: list[float] = Field(default_factory=lambda: [0.05] * 6)
    theta: list[Quad] = Field(
        default_factory=lambda: [
            (1.0, 5.0, 0.2, 0.0),
            (1.0, 10.0, 0.2, 0.0),
            (1.0, 5.0, 0.55, 0.0),
            (1.0, 10.0, 0.55, 0.0),
            (1.0, 5.0, 0.9, 0.0),
            (1.0, 10.0, 0.9, 0.0),
        ],
    )
    lambda_: list[list[Quad]] = Field(
        default_factory=lambda: [
            [(1.0, 0.3, -4.0, 0.0), (1.0, 0.2, 6.0, 0.0)],
            [(1.0, 0.3, 6.0, 0.0), (1.0, 0.2, -4.0, 0.0)],
        ],
        alias="lambda",
    )
    withheld: dict[str, list[str]] = Field(default_factory=lambda: {"PCA": ["k0", "k1", "k4", "k5"]})
    # P(control) ∝ exp(-s z), P(patient) ∝ exp(s z), z the stage mapped onto [-1, 1]
    diagnosis_sharpness: float = 4.5
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _scalar_noise(cls, data: object) -> object:
        if isinstance(data, dict) and isinstance(data.get("noise_std"), int | float):
            n = len(data.get("biomarkers") or range(6))
            data = {**data, "noise_std": [float(data["noise_std"])] * n}
        return data

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        k, d = len(self.biomarkers), len(self.diseases)
        if len(self.subjects_per_disease) != d or any(n <= 0 for n in self.subjects_per_disease):
            msg = "subjects_per_disease needs one positive count per disease."
            raise ValueError(msg)
        if not self.beta_low < self.beta_high:
            msg = f"beta_low must be below beta_high, got {self.beta_low} and {self.beta_high}."
            raise ValueError(msg)
        if len(self.noise_std) != k or any(s < 0 for s in self.noise_std):
            msg = "noise_std needs one non-negative value per biomarker."
            raise ValueError(msg)
        if len(self.theta) != k or len(self.unit_allocation) != k:
            msg = "theta and unit_allocation need one entry per biomarker."
            raise ValueError(msg)
        if len(self.lambda_) != d or any(len(row) != len(self.units) for row in self.lambda_):
            msg = "lambda needs one entry per disease and unit."
            raise ValueError(msg)
        for disease, names in self.withheld.items():
            if disease not in self.diseases or set(names) - set(self.biomarkers):
                msg = f"withheld refers to unknown disease or biomarkers: {disease}: {names}."
                raise ValueError(msg)
        return self

    @property
    def n_subjects(self) -> int:
        return sum(self.subjects_per_disease)

    def true_theta(self) -> tuple[SigmoidParams, ...]:
        return tuple(SigmoidParams(*p) for p in self.theta)

    def true_lambda(self) -> tuple[tuple[SigmoidParams, ...], ...]:
        return tuple(tuple(SigmoidParams(*p) for p in row) for row in self.lambda_)

    def to_model_config(self, **kwargs: object) -> ModelConfig:
        """Model configuration with the structure of this cohort."""
        return ModelConfig(
            biomarkers=self.biomarkers,
            units=self.units,
            unit_allocation=self.unit_allocation,
            diseases=self.diseases,
            **kwargs,
        )


def default_spec() -> SynthSpec:
    return SynthSpec()


def load_spec(path: str | Path) -> SynthSpec:
    """Read a generation recipe from YAML; missing keys take the defaults."""
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
        return SynthSpec.model_validate(raw)
    except OSError as e:
        msg = f"Cannot read generation spec {path}: {e}"
        raise SchemaError(msg) from e
    except (yaml.YAMLError, ValidationError) as e:
        msg = f"Invalid generation spec {path}:\n{e}"
        raise SchemaError(msg) from e


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Generating parameters and noise-free values, withheld entries included."""

    dataset: CohortDataset
    beta: np.ndarray
    theta: tuple[SigmoidParams, ...]
    lambda_: tuple[tuple[SigmoidParams, ...], ...]


def diagnosis_probability(beta: float | np.ndarray, spec: SynthSpec) -> float | np.ndarray:
    """P(control) of a subject with time shift `beta`.

    With z the shift mapped linearly from [beta_low, beta_high] onto [-1, 1],
    P(control) = exp(-s z) / (exp(-s z) + exp(s z)).
    """
    z = 2.0 * (np.asarray(beta, dtype=float) - spec.beta_low) / (spec.beta_high - spec.beta_low) - 1.0
    p = expit(-2.0 * spec.diagnosis_sharpness * z)
    return float(p) if np.ndim(p) == 0 else p


def assign_diagnosis(beta: float, spec: SynthSpec, rng: np.random.Generator) -> str:
    return CONTROL_LABEL if rng.random() < diagnosis_probability(beta, spec) else PATIENT_LABEL


def generate(spec: SynthSpec | None = None) -> tuple[CohortDataset, GroundTruth]:
    """Draw a cohort.

    Each subject has its own random stream derived from (seed, subject
    index), so the draw of one subject does not depend on any other.
    """
    spec = spec or default_spec()
    theta = spec.true_theta()
    lambda_ = spec.true_lambda()
    k_count = len(spec.biomarkers)
    visit_months = np.arange(spec.visits) * spec.visit_spacing_months
    noise_std = np.asarray(spec.noise_std)
    withheld = {
        spec.diseases.index(d): {spec.biomarkers.index(b) for b in names} for d, names in spec.withheld.items()
    }

    subject_ids, disease, diagnosis, betas = [], [], [], []
    observed: list[tuple[int, int, int, float]] = []
    truth: list[tuple[int, int, int, float]] = []
    i = 0
    for d, count in enumerate(spec.subjects_per_disease):
        for _ in range(count):
            rng = np.random.default_rng([spec.seed, i])
            beta = rng.uniform(spec.beta_low, spec.beta_high)
            label = assign_diagnosis(beta, spec, rng)
            noise = rng.normal(0.0, 1.0, size=(spec.visits, k_count)) * noise_std
            for j, m in enumerate(visit_months):
                for k in range(k_count):
                    value = biomarker_predict(beta, m, lambda_[d][spec.unit_allocation[k]], theta[k])
                    truth.append((i, j, k, value))
                    if k not in withheld.get(d, ()):
                        observed.append((i, j, k, value + noise[j, k]))
            subject_ids.append(f"{spec.diseases[d]}-{i:04d}")
            disease.append(d)
            diagnosis.append(label)
            betas.append(beta)
            i += 1

    def build(rows: list[tuple[int, int, int, float]]) -> CohortDataset:
        arr = np.array(rows, dtype=float).reshape(-1, 4)
        return CohortDataset(
            subject_ids=tuple(subject_ids),
            disease=np.array(disease),
            diagnosis=tuple(diagnosis),
            visit_months=tuple(visit_months.copy() for _ in subject_ids),
            subject=arr[:, 0].astype(np.int64),
            visit=arr[:, 1].astype(np.int64),
            biomarker=arr[:, 2].astype(np.int64),
            value=arr[:, 3],
            biomarkers=tuple(spec.biomarkers),
            diseases=tuple(spec.diseases),
        )

    dataset = build(observed)
    ground_truth = GroundTruth(dataset=build(truth), beta=np.array(betas), theta=theta, lambda_=lambda_)
    logger.info(f"Generated {dataset.n_subjects} subjects with {len(dataset)} measurements")
    return dataset, ground_truth


def write_cohort(dataset: CohortDataset, ground_truth: GroundTruth, out_dir: str | Path) -> tuple[Path, Path]:
    """Write `dataset.csv` and `ground_truth.csv` into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path, truth_path = out_dir / "dataset.csv", out_dir / "ground_truth.csv"
    write_csv(dataset, data_path)
    write_csv(ground_truth.dataset, truth_path, true_beta=ground_truth.beta)
    return data_path, truth_path
