"""Operator-norm estimation by power iteration on T*T."""

import logging
from typing import Callable, NamedTuple, Optional

import numpy as np

from .exceptions import ConvergenceError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200

Operator = Callable[[np.ndarray], np.ndarray]
InnerProduct = Callable[[np.ndarray, np.ndarray], complex]


class PowerIterationResult(NamedTuple):
    norm: float
    iterations: int
    vector: np.ndarray
    last_ratio: float


def _euclidean(u: np.ndarray, v: np.ndarray) -> complex:
    return np.vdot(v, u)


def random_start(size: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Deterministic complex starting vector."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def power_norm(
    apply: Operator,
    apply_adjoint: Operator,
    size: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[InnerProduct] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> PowerIterationResult:
    """
    Largest singular value of a linear operator.

    The adjoint must be taken with respect to ``inner``; the estimate at each
    step is ``||T x|| / ||x||`` in the norm induced by ``inner``.

    Args:
        apply: x -> T x
        apply_adjoint: y -> T* y
        size: Vector length (ignored when x0 is given)
        x0: Starting vector
        inner: Inner product <u, v>, linear in u; Euclidean by default
        tol: Relative change in the estimate that stops the iteration
        max_iter: Iteration cap
        seed: Seed of the random starting vector

    Returns:
        PowerIterationResult(norm, iterations, vector, last_ratio)
    """
    inner = inner or _euclidean

    def norm_of(z: np.ndarray) -> float:
        return float(np.sqrt(max(inner(z, z).real, 0.0)))

    if x0 is None:
        if size is None:
            raise ValueError("Either size or x0 is required")
        x0 = random_start(size, seed)
    x = np.asarray(x0, dtype=complex)
    x = x / norm_of(x)

    ratio_old = np.inf
    last_ratio = np.nan
    for iteration in range(1, max_iter + 1):
        tx = apply(x)
        ratio = norm_of(tx)
        if ratio == 0.0:
            logger.debug("Operator annihilates the iterate; norm estimate 0")
            return PowerIterationResult(0.0, iteration, x, 0.0)
        last_ratio = ratio / ratio_old if np.isfinite(ratio_old) else np.nan
        if abs(ratio - ratio_old) <= tol * ratio:
            logger.debug("Power iteration converged in %d iterations: norm=%.10g", iteration, ratio)
            return PowerIterationResult(ratio, iteration, x, last_ratio)
        ratio_old = ratio
        x = apply_adjoint(tx)
        x = x / norm_of(x)

    raise ConvergenceError(
        f"Power iteration did not reach tol={tol} within {max_iter} iterations "
        f"(last ratio of successive estimates {last_ratio:.6g})",
        iterations=max_iter,
        last_ratio=float(last_ratio),
    )
