"""Latent-stage model: one sigmoid per biomarker directly on the stage axis.

Structurally the DKT fit without the disease-specific layer. All subjects
share a single stage axis whatever their disease; each sweep refits the
biomarker trajectories, their noise variances and the subject time shifts
with the same solver, priors and convergence rule as the DKT fit.
"""

import logging
from dataclasses import dataclass

import numpy as np

from dkt.config import ModelConfig, SigmoidPriors
from dkt.dataset import CohortDataset
from dkt.exceptions import EmptyBlockError, InsufficientDataError
from dkt.fit import FitLogger, ShiftProblem, biomarker_index, check_coverage, initial_shifts, stage_support
from dkt.model import SigmoidParams, sigmoid_penalty, sigmoid_values, stage
from dkt.optim import LATENT_STREAM, block_rng, minimize_with_restarts

logger = logging.getLogger(__name__)


def stage_axis_priors(config: ModelConfig) -> SigmoidPriors:
    """θ priors of the latent model.

    Amplitude and offset are biomarker-scale quantities and keep the θ
    priors; slope and centre live on the stage axis and take the λ priors.
    """
    theta, lam = config.priors.theta, config.priors.lambda_
    return SigmoidPriors(amplitude=theta.amplitude, slope=lam.slope, center=lam.center, offset=theta.offset)


@dataclass(frozen=True, eq=False)
class LatentStageModel:
    """Fitted latent-stage model.

    Attributes
    ----------
        theta: trajectory per biomarker against disease stage (years).
        beta: time shift per training subject.
        epsilon: noise variance per biomarker.
        config: model configuration; only biomarkers, priors and optimizer
            settings are used.
        trace: penalized objective before the first and after every sweep.

    """

    theta: tuple[SigmoidParams, ...]
    beta: np.ndarray
    epsilon: np.ndarray
    config: ModelConfig
    subject_ids: tuple[str, ...] = ()
    trace: tuple[float, ...] = ()
    converged: bool = False

    @property
    def theta_array(self) -> np.ndarray:
        return np.array([p.as_array() for p in self.theta]).reshape(len(self.theta), 4)

    def _problem(self, data: CohortDataset, idx: np.ndarray) -> ShiftProblem:
        rows = self.theta_array[data.biomarker[idx]]
        prior = self.config.priors.beta
        return ShiftProblem(data.years[idx], data.value[idx], prior, lambda s: sigmoid_values(s, rows))

    def stage_subjects(self, data: CohortDataset, biomarkers: list[str] | None = None) -> np.ndarray:
        """Time shift of every subject of `data` with the trajectories frozen."""
        data = data.align_to(self.config.biomarkers, data.diseases)
        if biomarkers is not None:
            data = data.subset(biomarkers=[biomarker_index(self.config, b) for b in biomarkers])
        support = stage_support(self.beta, self.config.optimizer)
        beta = np.empty(data.n_subjects)
        for i in range(data.n_subjects):
            idx = data.by_subject.get(i)
            if idx is None:
                msg = f"Subject {data.subject_ids[i]!r} has no measurements to be staged from."
                raise InsufficientDataError(msg)
            beta[i], _ = self._problem(data, idx).search(support, self.config.optimizer)
        return beta

    def stage_subject(self, subset: CohortDataset) -> float:
        return float(self.stage_subjects(subset)[0])

    def predict(self, beta: float | np.ndarray, months: float | np.ndarray, k: int | str) -> np.ndarray | float:
        """Expected value of biomarker k at stage beta + months / 12."""
        k = biomarker_index(self.config, k)
        out = sigmoid_values(stage(beta, months), self.theta_array[k])
        return float(out) if np.ndim(out) == 0 else out


def _objective(data: CohortDataset, theta: np.ndarray, beta: np.ndarray, config: ModelConfig) -> float:
    priors = stage_axis_priors(config)
    r = data.value - sigmoid_values(beta[data.subject] + data.years, theta[data.biomarker])
    penalty = sum(sigmoid_penalty(row, priors) for row in theta)
    penalty += float(np.sum(config.priors.beta.neg_log_density(beta))) if len(beta) else 0.0
    return float(np.dot(r, r)) + penalty


def _trajectory_update(
    k: int,
    theta: np.ndarray,
    beta: np.ndarray,
    data: CohortDataset,
    config: ModelConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    idx = data.by_biomarker.get(k)
    if idx is None:
        msg = f"Biomarker {config.biomarkers[k]!r} has no measurements."
        raise EmptyBlockError(msg)
    s = beta[data.subject[idx]] + data.years[idx]
    y = data.value[idx]
    priors = stage_axis_priors(config)

    def objective(x: np.ndarray) -> float:
        if x[0] <= 0 or x[1] <= 0:
            return np.inf
        r = y - sigmoid_values(s, x)
        return float(np.dot(r, r)) + sigmoid_penalty(x, priors)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        return np.array([p.sample(rng) for p in priors.components()])

    x, _ = minimize_with_restarts(objective, theta[k], sampler, rng, config.optimizer)
    return x


def latent_stage_fit(data: CohortDataset, config: ModelConfig, fit_logger: FitLogger | None = None) -> LatentStageModel:
    """Fit the latent-stage model by alternating trajectory and shift updates.

    The time shifts start from the same rank heuristic as the DKT fit.
    """
    data = data.align_to(config.biomarkers, config.diseases)
    check_coverage(data)
    fit_logger = fit_logger or FitLogger()
    spec = config.optimizer

    beta = initial_shifts(data, spec.init_stage_halfwidth)
    stages = beta[data.subject] + data.years
    theta = np.tile([1.0, 0.5, float(np.median(stages)), 0.0], (config.n_biomarkers, 1))
    for k in range(config.n_biomarkers):
        theta[k] = _trajectory_update(k, theta, beta, data, config, block_rng(spec.rng_seed, LATENT_STREAM, k, 0))

    current = _objective(data, theta, beta, config)
    trace = [current]
    converged = False
    subjects = [i for i in range(data.n_subjects) if i in data.by_subject]
    for sweep in range(1, spec.max_sweeps + 1):
        before = current
        for k in range(config.n_biomarkers):
            theta[k] = _trajectory_update(
                k, theta, beta, data, config, block_rng(spec.rng_seed, LATENT_STREAM, k, sweep)
            )

        support = stage_support(beta, spec)
        previous = beta.copy()
        for i in subjects:
            idx = data.by_subject[i]
            rows = theta[data.biomarker[idx]]
            problem = ShiftProblem(
                data.years[idx], data.value[idx], config.priors.beta, lambda s, rows=rows: sigmoid_values(s, rows)
            )
            incoming = float(problem(previous[i : i + 1])[0])
            candidate, value = problem.search(support, spec)
            if value < incoming:
                beta[i] = candidate

        current = _objective(data, theta, beta, config)
        trace.append(current)
        fit_logger.log_sweep(sweep, current, before - current)
        if before - current < spec.sweep_tol:
            converged = True
            break

    r = data.value - sigmoid_values(beta[data.subject] + data.years, theta[data.biomarker])
    counts = np.bincount(data.biomarker, minlength=config.n_biomarkers)
    sums = np.bincount(data.biomarker, weights=r * r, minlength=config.n_biomarkers)
    epsilon = np.divide(sums, counts, out=np.zeros(config.n_biomarkers), where=counts > 0)
    logger.info(f"latent-stage fit {'converged' if converged else 'stopped'} after {len(trace) - 1} sweeps")
    return LatentStageModel(
        theta=tuple(SigmoidParams.from_array(row) for row in theta),
        beta=beta,
        epsilon=epsilon,
        config=config,
        subject_ids=data.subject_ids,
        trace=tuple(trace),
        converged=converged,
    )
