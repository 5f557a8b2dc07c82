"""Parameter estimation for DKT models.

Parameters are estimated by cyclic block coordinate descent on the penalized
objective Σ r² - Σ log priors. Every sweep updates all biomarker trajectories
(and their noise variances), then all dysfunction trajectories, then all
subject time shifts. Blocks of one family touch disjoint measurements, so a
family can run on several threads without changing the result.
"""

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Literal

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from .config import ModelConfig, OptimizerSpec, Prior
from .constants import ID_COLUMNS, MIN_MEASUREMENTS, TIE_TOLERANCE
from .dataset import CohortDataset
from .exceptions import (
    DataError,
    DegenerateNoiseError,
    EmptyBlockError,
    InsufficientDataError,
    SolverFailureError,
    UnknownBiomarkerError,
    UnknownDiseaseError,
)
from .model import (
    FitDiagnostics,
    FittedModel,
    SigmoidParams,
    lambda_free_components,
    neg_log_posterior,
    predict_measurements,
    prior_penalty,
    sigmoid_penalty,
    sigmoid_values,
    stage,
)
from .optim import LAMBDA_STREAM, THETA_STREAM, block_rng, minimize_with_restarts

logger = logging.getLogger(__name__)

NEUTRAL_THETA = np.array([1.0, 5.0, 0.5, 0.0])
INITIAL_LAMBDA_SLOPE = 0.5


class FitLogger:
    """Collects sweep-level progress of a fit.

    Messages are forwarded to the module logger and kept as plain text, so a
    caller can inspect what happened after the fit returns.
    """

    def __init__(self) -> None:
        self._logs: str = ""

    def log_sweep(self, sweep: int, objective: float, decrease: float) -> None:
        """Log the objective after a sweep.

        Args:
        ----
            sweep: sweep index, starting at 1

            objective: penalized objective after the sweep

            decrease: drop of the objective during the sweep

        """
        self._log_message(f"sweep {sweep}: objective {objective:.10g}, decrease {decrease:.3g}")

    def log_final(self, diagnostics: FitDiagnostics) -> None:
        status = "converged" if diagnostics.converged else "did not converge"
        self._log_message(
            f"fit {status} after {diagnostics.sweeps} sweeps, final objective {diagnostics.trace[-1]:.10g}",
            level="info" if diagnostics.converged else "warn",
        )
        for d, l in diagnostics.empty_blocks:
            self._log_message(f"no data for disease {d} in unit {l}, dysfunction held at the prior centre", "warn")

    def _log_message(self, msg: str = "", level: Literal["info", "error", "warn"] = "info") -> None:
        logger_func = logger.info if level == "info" else (logger.error if level == "error" else logger.warning)
        logger_func(msg)
        self._logs = self._logs + f"[{level}]" + f"{datetime.now().isoformat()} - {msg}\n"

    @property
    def logs(self) -> str:
        return self._logs


# ---------------------------------------------------------------------------
# block updates on raw arrays
# ---------------------------------------------------------------------------


def _objective(data: CohortDataset, theta, lambda_, beta, config: ModelConfig) -> float:
    r = data.value - predict_measurements(data, theta, lambda_, beta, np.asarray(config.unit_allocation))
    return float(np.dot(r, r)) + prior_penalty(theta, lambda_, beta, config.priors, config)


def _theta_update(
    k: int,
    theta: np.ndarray,
    lambda_: np.ndarray,
    beta: np.ndarray,
    data: CohortDataset,
    config: ModelConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    idx = data.by_biomarker.get(k)
    if idx is None:
        msg = f"Biomarker {config.biomarkers[k]!r} has no measurements."
        raise EmptyBlockError(msg)
    unit = config.unit_allocation[k]
    gamma = sigmoid_values(beta[data.subject[idx]] + data.years[idx], lambda_[data.measurement_disease[idx], unit])
    y = data.value[idx]
    priors = config.priors.theta

    def objective(x: np.ndarray) -> float:
        if x[0] <= 0 or x[1] <= 0:
            return np.inf
        r = y - sigmoid_values(gamma, x)
        return float(np.dot(r, r)) + sigmoid_penalty(x, priors)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        return np.array([p.sample(rng) for p in priors.components()])

    x, value = minimize_with_restarts(objective, theta[k], sampler, rng, config.optimizer)
    logger.debug(f"theta[{config.biomarkers[k]}] -> {np.round(x, 6).tolist()} (block objective {value:.6g})")
    return x


def _lambda_update(
    d: int,
    l: int,
    theta: np.ndarray,
    lambda_: np.ndarray,
    beta: np.ndarray,
    data: CohortDataset,
    config: ModelConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    idx = data.block_indices(d, config.biomarkers_in_unit(l))
    if not len(idx):
        msg = f"Disease {config.diseases[d]!r} has no measurements in unit {config.units[l]!r}."
        raise EmptyBlockError(msg)
    s = beta[data.subject[idx]] + data.years[idx]
    rows = theta[data.biomarker[idx]]
    y = data.value[idx]
    priors = config.priors.lambda_
    free = list(lambda_free_components(config))
    base = lambda_[d, l].copy()
    if config.fixed_lambda_shape:
        base[0], base[3] = 1.0, 0.0

    def expand(x: np.ndarray) -> np.ndarray:
        p = base.copy()
        p[free] = x
        return p

    def objective(x: np.ndarray) -> float:
        p = expand(x)
        if p[0] <= 0 or p[1] <= 0:
            return np.inf
        r = y - sigmoid_values(sigmoid_values(s, p), rows)
        return float(np.dot(r, r)) + sigmoid_penalty(p, priors, tuple(free))

    def sampler(rng: np.random.Generator) -> np.ndarray:
        components = priors.components()
        return np.array([components[j].sample(rng) for j in free])

    x, value = minimize_with_restarts(objective, base[free], sampler, rng, config.optimizer)
    logger.debug(f"lambda[{config.diseases[d]}][{config.units[l]}] -> {np.round(expand(x), 6).tolist()} ({value:.6g})")
    return expand(x)


def _lambda_fallback(config: ModelConfig) -> np.ndarray:
    centers = np.array([p.center for p in config.priors.lambda_.components()])
    if config.fixed_lambda_shape:
        centers[0], centers[3] = 1.0, 0.0
    return centers


class ShiftProblem:
    """Time-shift objective of one subject, vectorised over candidate shifts.

    Args:
    ----
        years: time since baseline of each measurement.

        y: measured values.

        prior: prior on the shift.

        curve: maps a (shifts, measurements) array of stages onto expected
            values.

    """

    def __init__(
        self,
        years: np.ndarray,
        y: np.ndarray,
        prior: Prior,
        curve: Callable[[np.ndarray], np.ndarray],
    ) -> None:
        self.years = years
        self.y = y
        self.prior = prior
        self.curve = curve

    @classmethod
    def for_subject(cls, data: CohortDataset, idx: np.ndarray, theta, lambda_, config: ModelConfig) -> "ShiftProblem":
        units = np.asarray(config.unit_allocation)[data.biomarker[idx]]
        lam = lambda_[data.measurement_disease[idx], units]
        rows = theta[data.biomarker[idx]]
        return cls(
            data.years[idx],
            data.value[idx],
            config.priors.beta,
            lambda s: sigmoid_values(sigmoid_values(s, lam), rows),
        )

    def __call__(self, betas: np.ndarray) -> np.ndarray:
        betas = np.atleast_1d(np.asarray(betas, dtype=float))
        s = betas[:, None] + self.years[None, :]
        r = self.y[None, :] - self.curve(s)
        return np.sum(r * r, axis=1) + np.asarray(self.prior.neg_log_density(betas))

    def search(self, support: tuple[float, float], spec: OptimizerSpec) -> tuple[float, float]:
        """Grid seeding then bounded refinement around the best seed.

        Seeds within `TIE_TOLERANCE` of the best are tied; the one closest to
        the prior centre wins. Refinement is kept only if it improves on the
        seed by more than the tie tolerance.
        """
        grid = np.linspace(support[0], support[1], spec.beta_grid)
        values = self(grid)
        best = values.min()
        if not np.isfinite(best):
            msg = "Time-shift objective is non-finite over the whole stage support."
            raise SolverFailureError(msg)
        ties = np.flatnonzero(values <= best + TIE_TOLERANCE)
        g = ties[np.argmin(np.abs(grid[ties] - self.prior.center))]
        beta, value = float(grid[g]), float(values[g])

        step = grid[1] - grid[0]
        result = minimize_scalar(
            lambda b: float(self(np.array([b]))[0]),
            bounds=(beta - step, beta + step),
            method="bounded",
            options={"xatol": spec.xatol},
        )
        refined = float(self(np.array([result.x]))[0])
        if refined < value - TIE_TOLERANCE:
            beta, value = float(result.x), refined
        return beta, value


def stage_support(beta: np.ndarray | FittedModel, spec: OptimizerSpec | None = None) -> tuple[float, float]:
    """Range of the time-shift grid.

    The fitted shifts widened by a fifth of their span plus one year on each
    side, unless `spec.stage_bounds` fixes it.
    """
    if isinstance(beta, FittedModel):
        spec = spec or beta.config.optimizer
        beta = beta.beta
    if spec is not None and spec.stage_bounds is not None:
        return spec.stage_bounds
    finite = np.asarray(beta, dtype=float)
    finite = finite[np.isfinite(finite)]
    if not len(finite):
        return (-1.0, 1.0)
    lo, hi = float(finite.min()), float(finite.max())
    margin = 0.2 * (hi - lo) + 1.0
    return (lo - margin, hi + margin)


def _beta_update(
    i: int,
    theta: np.ndarray,
    lambda_: np.ndarray,
    beta: np.ndarray,
    data: CohortDataset,
    config: ModelConfig,
    support: tuple[float, float],
) -> float:
    idx = data.by_subject.get(i)
    if idx is None:
        msg = f"Subject {data.subject_ids[i]!r} has no measurements."
        raise EmptyBlockError(msg)
    problem = ShiftProblem.for_subject(data, idx, theta, lambda_, config)
    incoming = float(problem(np.array([beta[i]]))[0])
    candidate, value = problem.search(support, config.optimizer)
    return candidate if value < incoming else float(beta[i])


# ---------------------------------------------------------------------------
# public block operations
# ---------------------------------------------------------------------------


def _aligned(data: CohortDataset, config: ModelConfig) -> CohortDataset:
    return data.align_to(config.biomarkers, config.diseases)


def fit_trajectory(
    k: int,
    state: FittedModel,
    data: CohortDataset,
    config: ModelConfig | None = None,
    sweep: int = 0,
) -> SigmoidParams:
    """Minimise the penalized objective over θ_k with everything else fixed."""
    config = config or state.config
    data = _aligned(data, config)
    rng = block_rng(config.optimizer.rng_seed, THETA_STREAM, k, sweep)
    x = _theta_update(k, state.theta_array, state.lambda_array, state.beta, data, config, rng)
    return SigmoidParams.from_array(x)


def update_noise(k: int, state: FittedModel, data: CohortDataset) -> float:
    """Mean squared residual of biomarker k under the current parameters."""
    data = _aligned(data, state.config)
    idx = data.by_biomarker.get(k)
    if idx is None:
        msg = f"Biomarker {state.config.biomarkers[k]!r} has no measurements."
        raise EmptyBlockError(msg)
    r = data.value - predict_measurements(data, state.theta_array, state.lambda_array, state.beta, state.allocation)
    return float(np.mean(r[idx] ** 2))


def fit_dysfunction(
    d: int,
    l: int,
    state: FittedModel,
    data: CohortDataset,
    config: ModelConfig | None = None,
    sweep: int = 0,
) -> SigmoidParams:
    """Minimise the penalized objective over λ_d^l with everything else fixed."""
    config = config or state.config
    data = _aligned(data, config)
    rng = block_rng(config.optimizer.rng_seed, LAMBDA_STREAM, d * config.n_units + l, sweep)
    x = _lambda_update(d, l, state.theta_array, state.lambda_array, state.beta, data, config, rng)
    return SigmoidParams.from_array(x)


def fit_subject_shift(i: int, state: FittedModel, data: CohortDataset, config: ModelConfig | None = None) -> float:
    """Minimise the penalized objective over β_i with everything else fixed."""
    config = config or state.config
    data = _aligned(data, config)
    support = stage_support(state.beta, config.optimizer)
    return _beta_update(i, state.theta_array, state.lambda_array, state.beta, data, config, support)


# ---------------------------------------------------------------------------
# initialisation and the outer loop
# ---------------------------------------------------------------------------


def check_coverage(data: CohortDataset, minimum: int = MIN_MEASUREMENTS) -> None:
    """Require `minimum` measurements of every biomarker."""
    if not len(data):
        msg = "Cannot fit a model to an empty dataset."
        raise InsufficientDataError(msg)
    counts = np.bincount(data.biomarker, minlength=data.n_biomarkers)
    for k, count in enumerate(counts):
        if count < minimum:
            msg = f"Biomarker {data.biomarkers[k]!r} has {count} measurements, at least {minimum} are needed."
            raise InsufficientDataError(msg)


def initial_shifts(data: CohortDataset, halfwidth: float) -> np.ndarray:
    """Rank heuristic for β^(0).

    Within each disease, subjects are ordered by their mean biomarker value
    and spread evenly over [-H, H], H being `halfwidth` or the observed time
    range if that is longer. Each subject's shift then places the middle of
    its visits at that position.
    """
    counts = np.bincount(data.subject, minlength=data.n_subjects)
    sums = np.bincount(data.subject, weights=data.value, minlength=data.n_subjects)
    means = np.divide(sums, counts, out=np.zeros(data.n_subjects), where=counts > 0)
    years = data.years
    h = max(halfwidth, float(years.max() - years.min()) if len(years) else 0.0)

    position = np.zeros(data.n_subjects)
    for d in range(len(data.diseases)):
        members = np.flatnonzero((data.disease == d) & (counts > 0))
        if not len(members):
            continue
        order = members[np.argsort(means[members], kind="stable")]
        position[order] = np.linspace(-h, h, len(order)) if len(order) > 1 else 0.0

    centre = np.array([np.mean(m) if len(m) else 0.0 for m in data.visit_months]) / 12.0
    return position - centre


def initialize(data: CohortDataset, config: ModelConfig) -> FittedModel:
    """Starting point of the fit.

    β from `initial_shifts`, λ with slope 0.5 centred on the median stage of
    each disease, θ fitted against the resulting dysfunction scores, ε as the
    mean squared residual.
    """
    data = _aligned(data, config)
    check_coverage(data)
    beta = initial_shifts(data, config.optimizer.init_stage_halfwidth)

    stages = beta[data.subject] + data.years
    lambda_ = np.zeros((config.n_diseases, config.n_units, 4))
    fallback = _lambda_fallback(config)
    for d in range(config.n_diseases):
        mask = data.measurement_disease == d
        center = float(np.median(stages[mask])) if mask.any() else fallback[2]
        lambda_[d, :] = [1.0, INITIAL_LAMBDA_SLOPE, center, 0.0]

    theta = np.tile(NEUTRAL_THETA, (config.n_biomarkers, 1))
    for k in range(config.n_biomarkers):
        rng = block_rng(config.optimizer.rng_seed, THETA_STREAM, k, 0)
        theta[k] = _theta_update(k, theta, lambda_, beta, data, config, rng)

    epsilon = _noise(data, theta, lambda_, beta, config)
    return FittedModel.from_arrays(theta, lambda_, beta, epsilon, config, subject_ids=data.subject_ids)


def _noise(data: CohortDataset, theta, lambda_, beta, config: ModelConfig) -> np.ndarray:
    r = data.value - predict_measurements(data, theta, lambda_, beta, np.asarray(config.unit_allocation))
    counts = np.bincount(data.biomarker, minlength=config.n_biomarkers)
    sums = np.bincount(data.biomarker, weights=r * r, minlength=config.n_biomarkers)
    return np.divide(sums, counts, out=np.zeros(config.n_biomarkers), where=counts > 0)


def _posterior(data: CohortDataset, theta, lambda_, beta, epsilon, config: ModelConfig) -> float:
    model = FittedModel.from_arrays(theta, lambda_, beta, epsilon, config)
    try:
        return neg_log_posterior(data, model, config)
    except DegenerateNoiseError:
        return float("inf")


def _run(
    executor: ThreadPoolExecutor | None,
    fn: Callable[[object], object],
    items: Iterable[object],
) -> list:
    if executor is None:
        return [fn(item) for item in items]
    return list(executor.map(fn, items))


def fit(
    data: CohortDataset,
    config: ModelConfig,
    init: FittedModel | None = None,
    track_blocks: bool = False,
    fit_logger: FitLogger | None = None,
) -> FittedModel:
    """Fit a DKT model.

    Args:
    ----
        data: cohort on the normalised scale.

        config: model structure, priors and optimizer settings.

        init: starting point; defaults to `initialize(data, config)`.

        track_blocks: record the penalized objective after every block update
            in the diagnostics.

        fit_logger: receives sweep-level progress.

    Returns:
    -------
        The fitted model, carrying its trace and diagnostics. Running out of
        sweeps is not an error; `diagnostics.converged` says whether the
        tolerance was met.

    """
    data = _aligned(data, config)
    fit_logger = fit_logger or FitLogger()
    spec = config.optimizer
    if init is not None and len(init.beta) != data.n_subjects:
        msg = f"Initial model has {len(init.beta)} time shifts for {data.n_subjects} subjects."
        raise DataError(msg)
    # fitted in subject-id order, reported in input order
    order = np.argsort(np.array(data.subject_ids, dtype=str), kind="stable")
    input_ids = data.subject_ids
    data = data.subset(subjects=order)
    state = init if init is not None else initialize(data, config)

    theta = state.theta_array.copy()
    lambda_ = state.lambda_array.copy()
    beta = state.beta[order] if init is not None else state.beta.copy()
    epsilon = state.epsilon.copy()

    current = _objective(data, theta, lambda_, beta, config)
    trace = [current]
    posterior_trace = [_posterior(data, theta, lambda_, beta, epsilon, config)]
    block_trace: list[tuple[str, str, float]] = []
    last_improvement = {"theta": 0, "lambda": 0, "beta": 0}
    empty_blocks: set[tuple[int, int]] = set()
    converged = False
    sweeps = 0

    def record(family: str, label: str) -> None:
        if track_blocks:
            block_trace.append((family, label, _objective(data, theta, lambda_, beta, config)))

    lambda_blocks = [(d, l) for d in range(config.n_diseases) for l in range(config.n_units)]
    subjects = [i for i in range(data.n_subjects) if i in data.by_subject]
    executor = ThreadPoolExecutor(max_workers=spec.n_threads) if spec.n_threads > 1 else None
    try:
        for sweep in range(1, spec.max_sweeps + 1):
            sweeps = sweep
            before = current

            snapshot = (theta.copy(), lambda_.copy(), beta.copy())
            updates = _run(
                executor,
                lambda k: _theta_update(
                    k, *snapshot, data, config, block_rng(spec.rng_seed, THETA_STREAM, k, sweep)
                ),
                range(config.n_biomarkers),
            )
            for k, x in enumerate(updates):
                theta[k] = x
                record("theta", config.biomarkers[k])
            epsilon = _noise(data, theta, lambda_, beta, config)
            after = _objective(data, theta, lambda_, beta, config)
            if after < before:
                last_improvement["theta"] = sweep

            snapshot = (theta.copy(), lambda_.copy(), beta.copy())

            def lambda_block(block: tuple[int, int], snapshot=snapshot, sweep=sweep) -> np.ndarray | None:
                d, l = block
                rng = block_rng(spec.rng_seed, LAMBDA_STREAM, d * config.n_units + l, sweep)
                try:
                    return _lambda_update(d, l, *snapshot, data, config, rng)
                except EmptyBlockError:
                    return None

            family_start = after
            for (d, l), x in zip(lambda_blocks, _run(executor, lambda_block, lambda_blocks), strict=True):
                if x is None:
                    empty_blocks.add((d, l))
                    x = _lambda_fallback(config)
                lambda_[d, l] = x
                record("lambda", f"{config.diseases[d]}/{config.units[l]}")
            after = _objective(data, theta, lambda_, beta, config)
            if after < family_start:
                last_improvement["lambda"] = sweep

            support = stage_support(beta, spec)
            snapshot = (theta.copy(), lambda_.copy(), beta.copy())
            family_start = after
            shifts = _run(executor, lambda i: _beta_update(i, *snapshot, data, config, support), subjects)
            for i, value in zip(subjects, shifts, strict=True):
                beta[i] = value
                record("beta", data.subject_ids[i])
            current = _objective(data, theta, lambda_, beta, config)
            if current < family_start:
                last_improvement["beta"] = sweep

            trace.append(current)
            posterior_trace.append(_posterior(data, theta, lambda_, beta, epsilon, config))
            decrease = before - current
            fit_logger.log_sweep(sweep, current, decrease)
            if decrease < spec.sweep_tol:
                converged = True
                break
    finally:
        if executor is not None:
            executor.shutdown()

    diagnostics = FitDiagnostics(
        sweeps=sweeps,
        trace=tuple(trace),
        converged=converged,
        last_improvement=last_improvement,
        empty_blocks=tuple(sorted(empty_blocks)),
        posterior_trace=tuple(posterior_trace),
        block_trace=tuple(block_trace),
    )
    fit_logger.log_final(diagnostics)
    shifts = np.empty_like(beta)
    shifts[order] = beta
    return FittedModel.from_arrays(
        theta,
        lambda_,
        shifts,
        epsilon,
        config,
        subject_ids=input_ids,
        trace=tuple(trace),
        diagnostics=diagnostics,
        normalization=state.normalization,
    )


# ---------------------------------------------------------------------------
# using a fitted model
# ---------------------------------------------------------------------------


def stage_subject(model: FittedModel, subset: CohortDataset, config: ModelConfig | None = None) -> float:
    """Time shift of one subject from whatever measurements it has.

    Model parameters stay frozen; the search is the one used for
    `fit_subject_shift`, over `stage_support(model)`.
    """
    config = config or model.config
    data = _aligned(subset, config)
    if not len(data):
        msg = "Cannot stage a subject without measurements."
        raise InsufficientDataError(msg)
    if len(np.unique(data.subject)) != 1:
        msg = "stage_subject expects the measurements of exactly one subject."
        raise DataError(msg)
    problem = ShiftProblem.for_subject(data, np.arange(len(data)), model.theta_array, model.lambda_array, config)
    beta, _ = problem.search(stage_support(model.beta, config.optimizer), config.optimizer)
    return beta


def stage_subjects(
    model: FittedModel,
    data: CohortDataset,
    biomarkers: list[str] | None = None,
) -> np.ndarray:
    """Stage every subject of `data`, optionally from some biomarkers only."""
    config = model.config
    data = _aligned(data, config)
    if biomarkers is not None:
        data = data.subset(biomarkers=[biomarker_index(config, b) for b in biomarkers])
    support = stage_support(model.beta, config.optimizer)
    beta = np.empty(data.n_subjects)
    for i in range(data.n_subjects):
        idx = data.by_subject.get(i)
        if idx is None:
            msg = f"Subject {data.subject_ids[i]!r} has no measurements to be staged from."
            raise InsufficientDataError(msg)
        problem = ShiftProblem.for_subject(data, idx, model.theta_array, model.lambda_array, config)
        beta[i], _ = problem.search(support, config.optimizer)
    return beta


def biomarker_index(config: ModelConfig, k: int | str) -> int:
    if isinstance(k, str):
        if k not in config.biomarkers:
            msg = f"Unknown biomarker {k!r}; known: {config.biomarkers}."
            raise UnknownBiomarkerError(msg)
        return config.biomarkers.index(k)
    if not 0 <= k < config.n_biomarkers:
        msg = f"Biomarker index {k} out of range [0, {config.n_biomarkers})."
        raise UnknownBiomarkerError(msg)
    return int(k)


def disease_index(config: ModelConfig, d: int | str) -> int:
    if isinstance(d, str):
        if d not in config.diseases:
            msg = f"Unknown disease {d!r}; known: {config.diseases}."
            raise UnknownDiseaseError(msg)
        return config.diseases.index(d)
    if not 0 <= d < config.n_diseases:
        msg = f"Disease index {d} out of range [0, {config.n_diseases})."
        raise UnknownDiseaseError(msg)
    return int(d)


def predict_missing(
    model: FittedModel,
    disease: int | str,
    beta: float | np.ndarray,
    m: float | np.ndarray,
    k: int | str,
) -> float | np.ndarray:
    """Expected value of biomarker k for a subject of `disease` at shift `beta`, month `m`."""
    config = model.config
    d = disease_index(config, disease)
    k = biomarker_index(config, k)
    gamma = sigmoid_values(stage(beta, m), model.lambda_array[d, config.unit_allocation[k]])
    out = sigmoid_values(gamma, model.theta_array[k])
    return float(out) if np.ndim(out) == 0 else out


def predict_frame(
    model: FittedModel,
    data: CohortDataset,
    biomarkers: list[str] | None = None,
    inputs: list[str] | None = None,
) -> pd.DataFrame:
    """Stage every subject from `inputs` and predict `biomarkers` at every visit.

    Returns
    -------
        A wide table in the dataset layout: one row per visit with the
        identifier columns and one column per predicted biomarker.

    """
    config = model.config
    biomarkers = list(biomarkers or config.biomarkers)
    targets = [biomarker_index(config, b) for b in biomarkers]
    aligned = _aligned(data, config)
    beta = stage_subjects(model, aligned, inputs)

    frame = aligned.to_wide()[list(ID_COLUMNS)]
    subject = np.repeat(np.arange(aligned.n_subjects), [len(m) for m in aligned.visit_months])
    months = frame["months_since_baseline"].to_numpy(dtype=float)
    disease = aligned.disease[subject]
    for name, k in zip(biomarkers, targets, strict=True):
        lam = model.lambda_array[disease, config.unit_allocation[k]]
        gamma = sigmoid_values(stage(beta[subject], months), lam)
        frame[name] = sigmoid_values(gamma, model.theta_array[k])
    return frame


def curve_table(model: FittedModel, points: int = 100) -> pd.DataFrame:
    """Sample every dysfunction and biomarker trajectory on a stage grid.

    The grid spans the fitted time shifts widened by 20% of their range on
    each side. Rows are (disease, curve, stage, value); `curve` names a unit
    for dysfunction trajectories and a biomarker for biomarker trajectories.
    """
    if points < 2:
        msg = f"A curve grid needs at least 2 points, got {points}."
        raise DataError(msg)
    config = model.config
    lo, hi = float(np.min(model.beta)), float(np.max(model.beta))
    margin = 0.2 * (hi - lo) or 1.0
    grid = np.linspace(lo - margin, hi + margin, points)

    frames = []
    for d, disease in enumerate(config.diseases):
        gammas = sigmoid_values(grid[None, :], model.lambda_array[d][:, None, :])
        for unit, gamma in zip(config.units, gammas, strict=True):
            frames.append(pd.DataFrame({"disease": disease, "curve": unit, "stage": grid, "value": gamma}))
        for k, name in enumerate(config.biomarkers):
            values = sigmoid_values(gammas[config.unit_allocation[k]], model.theta_array[k])
            frames.append(pd.DataFrame({"disease": disease, "curve": name, "stage": grid, "value": values}))
    return pd.concat(frames, ignore_index=True)
