"""
Separation of variables on the rectangle.

Fields on a rectangle mesh are expanded in the transverse sine basis
``e_k(y) = sqrt(2/Ly) sin(k pi y / Ly)``; each coefficient ``u_k(x)`` then
solves a 1D damped problem on the x-grid

    (-d_xx + 2 i a(x) lam + k^2 - lam^2) u_k = f_k + d_x g_k,   u_k = 0 at both ends.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg as la
import scipy.sparse as sp
from scipy.fft import dst
from scipy.sparse.linalg import splu

from .exceptions import DampingError, FieldSizeError, MeshError, RegimeError, SolverError
from .geometry import GridMesh, transverse_eigenvalue
from .operator_norm import DEFAULT_SEED, DEFAULT_TOL, power_norm

logger = logging.getLogger(__name__)

# Largest 1D grid for which R_0 norms come from a dense SVD
DENSE_NODE_LIMIT = 400


def _dst1(values: np.ndarray, axis: int) -> np.ndarray:
    """Orthonormal type-I sine transform (self-inverse), complex-safe."""
    if np.iscomplexobj(values):
        return dst(values.real, type=1, norm="ortho", axis=axis) + 1j * dst(
            values.imag, type=1, norm="ortho", axis=axis
        )
    return dst(values, type=1, norm="ortho", axis=axis)


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    """
    Transverse sine coefficients of a rectangle field.

    Args:
        coefficients: Array indexed by (k - 1, x-node)
        Ly: y-extent of the rectangle
        hx: x-spacing of the coefficient rows
        hy: y-spacing the coefficients were taken with
        transverse_eigenvalues: Discrete ``(k pi/Ly)^2`` for k = 1..K
    """

    coefficients: np.ndarray
    Ly: float
    hx: float
    hy: float
    transverse_eigenvalues: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.coefficients.shape[0]

    def mode(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.n_modes:
            raise RegimeError(f"Mode index k={k} outside 1..{self.n_modes}")
        return self.coefficients[k - 1]

    def norm_squared(self) -> float:
        """Sum over k of the 1D norms ``hx sum_i |u_k(x_i)|^2``."""
        return self.hx * float(np.sum(np.abs(self.coefficients) ** 2))


def _rectangle_grid(mesh: GridMesh, u: np.ndarray) -> np.ndarray:
    if not mesh.is_rectangle:
        raise MeshError(f"Sine decomposition needs a rectangle mesh, got {mesh.spec.shape.value}")
    nx, ny = mesh.rectangle_counts
    return mesh.check_field(u).reshape(nx - 1, ny - 1)


def sine_decompose(mesh: GridMesh, u: np.ndarray) -> ModeDecomposition:
    """
    Coefficients ``u_k(x_i) = hy sum_j u(x_i, y_j) e_k(y_j)`` for k = 1..Ny-1.

    Discrete Parseval holds exactly: ``mesh.norm(u)**2 == decomposition.norm_squared()``.
    """
    grid = _rectangle_grid(mesh, u)
    coefficients = math.sqrt(mesh.hy) * _dst1(grid, axis=1)
    _, ny = mesh.rectangle_counts
    mus = np.array([transverse_eigenvalue(mesh, k) for k in range(1, ny)])
    return ModeDecomposition(
        coefficients=np.ascontiguousarray(coefficients.T),
        Ly=mesh.spec.Ly,
        hx=mesh.hx,
        hy=mesh.hy,
        transverse_eigenvalues=mus,
    )


def sine_reconstruct(mesh: GridMesh, decomposition: ModeDecomposition) -> np.ndarray:
    """Inverse of ``sine_decompose``."""
    nx, ny = mesh.rectangle_counts
    if decomposition.coefficients.shape != (ny - 1, nx - 1):
        raise FieldSizeError(
            f"Decomposition of shape {decomposition.coefficients.shape} does not match mesh ({ny - 1}, {nx - 1})"
        )
    grid = _dst1(decomposition.coefficients.T / math.sqrt(mesh.hy), axis=1)
    return grid.reshape(-1)


@dataclass(frozen=True, eq=False)
class Mode1DProblem:
    """
    One transverse mode of the rectangle problem.

    Args:
        k: Mode index >= 1
        lam: Real frequency
        a_x: Damping at the interior x-nodes
        hx: x-spacing (the interval is ``(0, (len(a_x) + 1) hx)``)
        f_k: Source at the interior x-nodes
        g_k: Flux datum whose discrete x-derivative enters the right-hand side
        k_squared: Transverse eigenvalue; defaults to ``k**2``
    """

    k: int
    lam: float
    a_x: np.ndarray
    hx: float
    f_k: np.ndarray
    g_k: np.ndarray
    k_squared: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise RegimeError(f"Mode index must be >= 1, got {self.k}")
        n = np.shape(self.a_x)[0]
        if np.shape(self.f_k) != (n,) or np.shape(self.g_k) != (n,):
            raise FieldSizeError(
                f"f_k {np.shape(self.f_k)} and g_k {np.shape(self.g_k)} must match a_x ({n},)"
            )
        if np.any(np.asarray(self.a_x) < 0):
            raise DampingError("a_x must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.a_x)

    @property
    def transverse(self) -> float:
        return float(self.k ** 2 if self.k_squared is None else self.k_squared)


def mode_operator(hx: float, a_x: np.ndarray, lam: float, k_squared: float = 0.0) -> sp.csr_matrix:
    """Tridiagonal ``-d_xx + 2 i a lam + k^2 - lam^2`` with Dirichlet ends."""
    n = len(a_x)
    diag = 2.0 / hx ** 2 + 2j * np.asarray(a_x) * lam + k_squared - lam ** 2
    off = np.full(n - 1, -1.0 / hx ** 2)
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr", dtype=complex)


def x_derivative_matrix(n: int, hx: float) -> sp.csr_matrix:
    """Centered first difference with one-sided rows at both ends."""
    main = np.zeros(n)
    upper = np.full(n - 1, 0.5 / hx)
    lower = np.full(n - 1, -0.5 / hx)
    main[0], upper[0] = -1.0 / hx, 1.0 / hx
    main[-1], lower[-1] = 1.0 / hx, -1.0 / hx
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def mode_rhs(p: Mode1DProblem) -> np.ndarray:
    return np.asarray(p.f_k, dtype=complex) + x_derivative_matrix(p.n, p.hx) @ np.asarray(p.g_k, dtype=complex)


def solve_mode_bvp(p: Mode1DProblem) -> np.ndarray:
    """
    Solve the per-mode boundary value problem.

    Args:
        p: Mode1DProblem

    Returns:
        u_k at the interior x-nodes
    """
    matrix = mode_operator(p.hx, p.a_x, p.lam, p.transverse)
    rhs = mode_rhs(p)
    banded = np.zeros((3, p.n), dtype=complex)
    banded[0, 1:] = matrix.diagonal(1)
    banded[1, :] = matrix.diagonal(0)
    banded[2, :-1] = matrix.diagonal(-1)
    try:
        u = la.solve_banded((1, 1), banded, rhs)
    except la.LinAlgError as exc:
        sigma_min = float(la.svdvals(matrix.toarray()).min())
        raise SolverError(
            f"Mode problem k={p.k}, lam={p.lam} is singular (smallest singular value {sigma_min:.3e})",
            smallest_singular_value=sigma_min,
        ) from exc

    scale = np.linalg.norm(rhs)
    if scale > 0:
        rel = np.linalg.norm(matrix @ u - rhs) / scale
        if rel > 1e-10:
            logger.warning("Mode solve k=%d lam=%g has relative residual %.3e", p.k, p.lam, rel)
    return u


def mode_bound_ratio(p: Mode1DProblem) -> float:
    """``||u_k|| / (||f_k|| + ||g_k||)`` in the discrete L2 norm (0 for zero data)."""
    denom = np.linalg.norm(p.f_k) + np.linalg.norm(p.g_k)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(solve_mode_bvp(p)) / denom)


def high_mode_check(
    k: int,
    lam: float,
    trials: int,
    a_x: np.ndarray,
    hx: float,
    seed: int = DEFAULT_SEED,
) -> float:
    """
    Worst ``||u_k|| / (||f_k|| + ||g_k||)`` over random complex data.

    Only meaningful in the regime ``k >= |lam|``, where the real part of the
    energy identity and Poincare's inequality bound the ratio by a constant
    that does not involve the damping.
    """
    if k < abs(lam):
        raise RegimeError(f"high_mode_check needs k >= |lam|, got k={k}, lam={lam}")
    rng = np.random.default_rng(seed)
    n = len(a_x)
    worst = 0.0
    for _ in range(trials):
        f_k = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        g_k = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst = max(worst, mode_bound_ratio(Mode1DProblem(k, lam, a_x, hx, f_k, g_k)))
    logger.info("High-mode check k=%d lam=%g trials=%d: worst ratio %.6g", k, lam, trials, worst)
    return worst


def r0_operator_norm(tau: float, a_x: np.ndarray, hx: float, tol: float = DEFAULT_TOL) -> float:
    """
    L2 operator norm of ``R_0(tau) = (-d_xx + 2 i a tau - tau^2)^{-1}`` on the x-grid.

    Dense SVD up to ``DENSE_NODE_LIMIT`` nodes, power iteration on R_0* R_0 above.
    """
    a_x = np.asarray(a_x, dtype=float)
    if np.any(a_x < 0) or not np.any(a_x > 0):
        raise DampingError("R_0 needs a nonnegative damping that is not identically zero")
    matrix = mode_operator(hx, a_x, tau)

    if len(a_x) <= DENSE_NODE_LIMIT:
        sigma_min = float(la.svdvals(matrix.toarray()).min())
        if sigma_min == 0.0:
            raise SolverError(f"R_0({tau}) is singular", smallest_singular_value=0.0)
        return 1.0 / sigma_min

    lu = splu(matrix.tocsc())
    result = power_norm(
        lambda x: lu.solve(x),
        lambda y: lu.solve(y, trans="H"),
        size=len(a_x),
        tol=tol,
    )
    return result.norm


def r0_sweep(taus: Sequence[float], a_x: np.ndarray, hx: float) -> pd.DataFrame:
    """Tabulate ``(tau, norm, norm_times_1plustau)``."""
    norms = [r0_operator_norm(tau, a_x, hx) for tau in taus]
    frame = pd.DataFrame({"tau": np.asarray(taus, dtype=float), "norm": norms})
    frame["norm_times_1plustau"] = frame["norm"] * (1.0 + frame["tau"].abs())
    return frame


def dyadic_window_maxima(taus: Sequence[float], values: Sequence[float]) -> List[Tuple[float, float, float]]:
    """Maximum of ``values`` on each dyadic window ``[2^j, 2^(j+1))`` met by ``taus``."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    exponents = np.floor(np.log2(taus)).astype(int)
    windows = []
    for j in np.unique(exponents):
        in_window = exponents == j
        windows.append((float(2.0 ** j), float(2.0 ** (j + 1)), float(values[in_window].max())))
    return windows


def window_growth_ratio(taus: Sequence[float], values: Sequence[float]) -> float:
    """
    Spread of the dyadic window maxima: largest window maximum over the smallest.

    Stays O(1) when the values are uniformly bounded above and below across
    windows; any growth or intermittent spike across the tau-range shows up.
    """
    maxima = [m for _, _, m in dyadic_window_maxima(taus, values)]
    if len(maxima) < 2:
        raise RegimeError("Window comparison needs at least two dyadic windows")
    smallest = min(maxima)
    return max(maxima) / smallest if smallest > 0 else math.inf
