"""Exact Gaussian process regression with an ARD RBF kernel.

k(x, x') = σ² exp(-½ Σ_a (x_a - x'_a)² / ℓ_a²), observation noise σ_n², and a
constant prior mean equal to the mean of the training targets.
Hyperparameters maximise the log marginal likelihood.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from dkt.config import OptimizerSpec
from dkt.exceptions import SingularKernelError
from dkt.optim import GP_STREAM, minimize_with_restarts

from .base import BaseRegressor, check_training_data

logger = logging.getLogger(__name__)

GP_RESTARTS = 3
MAX_JITTER = 1e-4
# log-hyperparameters are searched inside this box
LOG_BOUND = 15.0
# the marginal likelihood is flat near its optimum, coarse tolerances suffice
GP_SOLVER = OptimizerSpec(max_iter=200, xatol=1e-4, fatol=1e-6)


def rbf_kernel(x1: np.ndarray, x2: np.ndarray, signal_variance: float, length_scales: np.ndarray) -> np.ndarray:
    """ARD squared-exponential covariance between the rows of x1 and x2."""
    d = (x1[:, None, :] - x2[None, :, :]) / length_scales
    return signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))


def cholesky_with_jitter(matrix: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cholesky factor, adding diagonal jitter up to `MAX_JITTER` if needed.

    Raises
    ------
        SingularKernelError: the matrix stays singular at the largest jitter.

    """
    try:
        return cho_factor(matrix, lower=True)
    except LinAlgError:
        pass
    jitter = 1e-10
    eye = np.eye(len(matrix))
    while jitter <= MAX_JITTER:
        try:
            factor = cho_factor(matrix + jitter * eye, lower=True)
        except LinAlgError:
            jitter *= 10.0
            continue
        logger.debug(f"Kernel matrix needed jitter {jitter:g}")
        return factor
    msg = f"Kernel matrix is not positive definite even with jitter {MAX_JITTER:g}."
    raise SingularKernelError(msg)


@dataclass(frozen=True, eq=False)
class GPRegressor(BaseRegressor):
    """Fitted GP regressor.

    Attributes
    ----------
        signal_variance: σ².
        length_scales: ℓ_a per input dimension.
        noise_variance: σ_n², always positive.
        x_train: training inputs, shape (n, p).
        y_train: training targets.

    """

    signal_variance: float
    length_scales: np.ndarray
    noise_variance: float
    x_train: np.ndarray
    y_train: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.y_train))

    @cached_property
    def _factor(self) -> tuple[np.ndarray, bool]:
        k = rbf_kernel(self.x_train, self.x_train, self.signal_variance, self.length_scales)
        return cholesky_with_jitter(k + self.noise_variance * np.eye(len(k)))

    @cached_property
    def _alpha(self) -> np.ndarray:
        return cho_solve(self._factor, self.y_train - self.mean)

    @classmethod
    def from_hyperparameters(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        signal_variance: float,
        length_scales: np.ndarray | float,
        noise_variance: float,
    ) -> "GPRegressor":
        """GP conditioned on (x, y) with fixed hyperparameters."""
        x, y = check_training_data(x, y, minimum=2)
        x = x.reshape(len(y), -1)
        length_scales = np.broadcast_to(np.asarray(length_scales, dtype=float), (x.shape[1],)).copy()
        return cls(float(signal_variance), length_scales, float(noise_variance), x, y)

    @classmethod
    def fit(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        restarts: int = GP_RESTARTS,
        seed: int = 0,
        spec: OptimizerSpec | None = None,
    ) -> "GPRegressor":
        """Maximise the log marginal likelihood over log-hyperparameters.

        The data-driven initialisation is kept unless a restart beats it.
        """
        x, y = check_training_data(x, y, minimum=2)
        x = x.reshape(len(y), -1)
        spec = spec or GP_SOLVER
        p = x.shape[1]

        signal = float(np.var(y))
        # rounding leaves a tiny nonzero variance on constant targets
        if np.ptp(y) == 0 or signal <= np.finfo(float).eps * max(1.0, float(np.mean(y * y))):
            signal = 1.0
        scales = np.std(x, axis=0)
        scales[scales == 0] = 1.0
        start = np.log(np.concatenate([[signal], scales, [max(0.1 * signal, 1e-6)]]))

        def objective(log_params: np.ndarray) -> float:
            if np.any(np.abs(log_params) > LOG_BOUND):
                return np.inf
            params = np.exp(log_params)
            model = cls(params[0], params[1 : p + 1], params[p + 1], x, y)
            try:
                return -model.log_marginal_likelihood()
            except SingularKernelError:
                return np.inf

        def sampler(rng: np.random.Generator) -> np.ndarray:
            return start + rng.normal(0.0, 1.0, size=len(start))

        rng = np.random.default_rng([seed, GP_STREAM])
        best, value = minimize_with_restarts(objective, start, sampler, rng, spec, restarts=restarts)
        params = np.exp(best)
        logger.debug(f"GP hyperparameters {params.tolist()}, log marginal likelihood {-value:.6g}")
        return cls(float(params[0]), params[1 : p + 1], float(params[p + 1]), x, y)

    def log_marginal_likelihood(self) -> float:
        """log p(y | X, hyperparameters)."""
        factor, _ = self._factor
        centred = self.y_train - self.mean
        n = len(centred)
        return float(
            -0.5 * centred @ self._alpha - np.sum(np.log(np.diag(factor))) - 0.5 * n * math.log(2.0 * math.pi),
        )

    def _inputs(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float).reshape(-1, self.x_train.shape[1])

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predictive mean."""
        x = self._inputs(x)
        k_star = rbf_kernel(x, self.x_train, self.signal_variance, self.length_scales)
        return self.mean + k_star @ self._alpha

    def predict_with_variance(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance of the latent function."""
        x = self._inputs(x)
        k_star = rbf_kernel(x, self.x_train, self.signal_variance, self.length_scales)
        mean = self.mean + k_star @ self._alpha
        v = cho_solve(self._factor, k_star.T)
        variance = self.signal_variance - np.sum(k_star * v.T, axis=1)
        return mean, np.maximum(variance, 0.0)


def gp_fit(x: np.ndarray, y: np.ndarray, restarts: int = GP_RESTARTS, seed: int = 0) -> GPRegressor:
    return GPRegressor.fit(x, y, restarts=restarts, seed=seed)


def gp_predict(model: GPRegressor, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return model.predict_with_variance(x)
