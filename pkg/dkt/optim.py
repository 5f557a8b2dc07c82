"""Derivative-free local minimisation with random restarts.

Each call keeps the incoming point as a candidate: a restart only replaces it
if it is strictly better, so a block update can never raise its objective.
"""

import logging
from collections.abc import Callable

import numpy as np
from scipy.optimize import minimize

from .config import OptimizerSpec
from .exceptions import SolverFailureError

logger = logging.getLogger(__name__)

# family codes for restart streams
THETA_STREAM = 0
LAMBDA_STREAM = 1
LATENT_STREAM = 2
GP_STREAM = 3


def block_rng(seed: int, family: int, block: int, sweep: int) -> np.random.Generator:
    """Random stream of one block update, independent of scheduling order."""
    return np.random.default_rng([seed, family, block, sweep])


def _safe(objective: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def wrapped(x: np.ndarray) -> float:
        value = float(objective(x))
        return value if np.isfinite(value) else np.inf

    return wrapped


def _nelder_mead(objective: Callable[[np.ndarray], float], start: np.ndarray, spec: OptimizerSpec) -> np.ndarray:
    result = minimize(
        objective,
        start,
        method="Nelder-Mead",
        options={"xatol": spec.xatol, "fatol": spec.fatol, "maxiter": spec.max_iter},
    )
    return np.asarray(result.x, dtype=float)


def minimize_with_restarts(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    sampler: Callable[[np.random.Generator], np.ndarray],
    rng: np.random.Generator,
    spec: OptimizerSpec,
    restarts: int | None = None,
) -> tuple[np.ndarray, float]:
    """Minimise `objective` from `x0` and from `restarts` sampled points.

    Args:
    ----
        objective: function to minimise; non-finite values count as +inf.

        x0: incoming point. Always a candidate.

        sampler: draws a restart point from `rng`.

        rng: restart stream.

        spec: solver tolerances and default restart count.

        restarts: overrides `spec.restarts`.

    Returns:
    -------
        The best point and its objective value. Ties among restarts go to the
        lexicographically smallest parameter vector; the incoming point wins
        every tie.

    Raises:
    ------
        SolverFailureError: no candidate has a finite objective.

    """
    f = _safe(objective)
    x0 = np.asarray(x0, dtype=float)
    incoming = f(x0)
    n_restarts = spec.restarts if restarts is None else restarts

    starts = [x0] + [np.asarray(sampler(rng), dtype=float) for _ in range(n_restarts)]
    candidates: list[tuple[float, tuple[float, ...], np.ndarray]] = []
    for start in starts:
        if not np.isfinite(f(start)):
            continue
        x = _nelder_mead(f, start, spec)
        value = f(x)
        if np.isfinite(value):
            candidates.append((value, tuple(x.tolist()), x))

    if not candidates:
        if np.isfinite(incoming):
            return x0, incoming
        msg = f"Every one of {len(starts)} solver starts gave a non-finite objective."
        raise SolverFailureError(msg)

    best_value, _, best = min(candidates, key=lambda c: (c[0], c[1]))
    # polish from the winner, the simplex may have stalled early
    polished = _nelder_mead(f, best, spec)
    polished_value = f(polished)
    if polished_value < best_value:
        best, best_value = polished, polished_value

    if best_value < incoming:
        return best, best_value
    return x0, incoming
