"""Univariate regressors: least-squares cubic B-spline and straight line."""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.interpolate import BSpline

from dkt.exceptions import DegenerateInputError

from .base import BaseRegressor, check_training_data

logger = logging.getLogger(__name__)

DEFAULT_INTERIOR_KNOTS = 4


def _require_spread(x: np.ndarray) -> None:
    if np.ptp(x) == 0:
        msg = "All training inputs are identical; the regression is undetermined."
        raise DegenerateInputError(msg)


@dataclass(frozen=True, eq=False)
class UnivariateRegressor(BaseRegressor):
    """One marker predicted from another.

    For `kind="linear"`, `coefficients` are (slope, intercept). Otherwise
    they are B-spline coefficients on the clamped knot
    vector `knots` with degree `degree`.
    """

    kind: Literal["cubic-spline", "spline", "linear"]
    coefficients: np.ndarray
    knots: np.ndarray | None = None
    degree: int = 3

    @classmethod
    def fit(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        kind: Literal["cubic-spline", "linear"] = "linear",
        **kwargs: object,
    ) -> "UnivariateRegressor":
        if kind == "linear":
            return linear_fit(x, y)
        return spline_fit(x, y, **kwargs)

    @property
    def interior_knots(self) -> np.ndarray:
        if self.knots is None:
            return np.zeros(0)
        return self.knots[self.degree + 1 : len(self.knots) - self.degree - 1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            slope, intercept = self.coefficients
            return slope * x + intercept
        return BSpline(self.knots, self.coefficients, self.degree, extrapolate=True)(x)


def linear_fit(x: np.ndarray, y: np.ndarray) -> UnivariateRegressor:
    """Ordinary least squares y ≈ slope · x + intercept."""
    x, y = check_training_data(x, y, minimum=2)
    x = x.ravel()
    _require_spread(x)
    design = np.column_stack([x, np.ones_like(x)])
    coefficients, *_ = np.linalg.lstsq(design, y, rcond=None)
    return UnivariateRegressor(kind="linear", coefficients=coefficients)


def spline_fit(
    x: np.ndarray,
    y: np.ndarray,
    n_knots: int = DEFAULT_INTERIOR_KNOTS,
    degree: int = 3,
) -> UnivariateRegressor:
    """Least-squares B-spline with interior knots at data quantiles.

    Args:
    ----
        x: inputs.

        y: targets.

        n_knots: number of interior knots. Quantiles that coincide (heavy
            ties) or land on the data range boundary are dropped, so the
            knot vector stays strictly increasing inside.

        degree: spline degree; 3 gives a cubic spline.

    """
    x, y = check_training_data(x, y, minimum=n_knots + degree + 1)
    x = x.ravel()
    _require_spread(x)
    lo, hi = float(x.min()), float(x.max())
    interior = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_knots + 2)[1:-1]))
    interior = interior[(interior > lo) & (interior < hi)]
    if len(interior) < n_knots:
        logger.info(f"Using {len(interior)} of {n_knots} interior knots; the remaining quantiles coincide.")
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    design = BSpline.design_matrix(x, knots, degree).toarray()
    coefficients, *_ = np.linalg.lstsq(design, y, rcond=None)
    kind = "cubic-spline" if degree == 3 else "spline"
    return UnivariateRegressor(kind=kind, coefficients=coefficients, knots=knots, degree=degree)
