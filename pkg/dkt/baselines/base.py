"""Abstract base class for the comparison regressors.

A regressor maps the value of one or more input markers onto a target marker.
Fitted regressors are immutable.
"""

from abc import ABC, abstractmethod

import numpy as np

from dkt.exceptions import DataError, InsufficientDataError


class BaseRegressor(ABC):
    """An abstract base class for marker-to-marker regressors."""

    @classmethod
    @abstractmethod
    def fit(cls, x: np.ndarray, y: np.ndarray, **kwargs: object) -> "BaseRegressor":
        """Fit the regressor.

        Must be implemented by subclasses.

        Args:
        ----
            x: training inputs, shape (n,) for univariate regressors or (n, p).

            y: training targets, shape (n,).

            **kwargs: regressor-specific options.

        Returns:
        -------
            The fitted regressor.

        """

    @abstractmethod
    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predict targets for new inputs."""


def check_training_data(x: np.ndarray, y: np.ndarray, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate and convert a training set.

    Raises
    ------
        DataError: shapes disagree or values are not finite.
        InsufficientDataError: fewer than `minimum` points.

    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        msg = f"Inputs and targets differ in length: {len(x)} vs {len(y)}."
        raise DataError(msg)
    if len(y) < minimum:
        msg = f"At least {minimum} training points are needed, got {len(y)}."
        raise InsufficientDataError(msg)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        msg = "Training inputs and targets must be finite."
        raise DataError(msg)
    return x, y
