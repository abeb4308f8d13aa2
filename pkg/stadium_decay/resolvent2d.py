"""
Stationary damped Helmholtz problem and resolvent norms.

With ``L = -Delta_h`` the stationary operator is ``M(lam) = L + 2 i a lam - lam^2``
and ``R(lam) = M(lam)^{-1}``. M is complex symmetric, so the adjoint solve is
``conj(R(lam) conj(b))`` and reuses the same factorization.

The generator acting on ``(u, D_t u)`` is ``A = (0 1; L 2ia)``; its resolvent
is assembled blockwise from R:

    (lam - A)^{-1}(f, g) = (u, lam u - f),   u = R(lam) ((2ia - lam) f - g)
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .damping import DampingProfile
from .exceptions import (
    FieldSizeError,
    FitError,
    MeshError,
    RegimeError,
    ResolutionWarning,
    SolverError,
    StadiumDecayError,
)
from .fitting import FitReport, fit_power_law
from .geometry import GridMesh
from .mode1d import x_derivative_matrix
from .operator_norm import DEFAULT_MAX_ITER, DEFAULT_SEED, DEFAULT_TOL, power_norm

logger = logging.getLogger(__name__)

SOLVE_RTOL = 1e-9
POINTS_PER_WAVELENGTH = 10
DEFAULT_FIT_WINDOW = (5.0, math.inf)


def check_resolution(mesh: GridMesh, lam: complex) -> bool:
    """Warn when h exceeds ``2 pi / (10 |lam|)``; returns True when resolved."""
    if lam == 0 or mesh.h <= 2 * math.pi / (POINTS_PER_WAVELENGTH * abs(lam)):
        return True
    message = (
        f"h={mesh.h:.4g} gives fewer than {POINTS_PER_WAVELENGTH} points per wavelength "
        f"at |lam|={abs(lam):.4g}; results may be polluted"
    )
    warnings.warn(message, ResolutionWarning, stacklevel=3)
    logger.warning(message)
    return False


@dataclass(eq=False)
class HelmholtzSystem:
    """
    ``M(lam) = -Delta_h + diag(2 i a lam - lam^2)`` with a cached sparse LU.

    ``lam`` may be complex; for the real-axis estimates it is real.
    """

    mesh: GridMesh
    damping: DampingProfile
    lam: complex

    def __post_init__(self):
        if self.damping.values.shape != (self.mesh.n_interior,):
            raise FieldSizeError("Damping profile was built on a different mesh")

    @cached_property
    def operator(self) -> sp.csc_matrix:
        diagonal = 2j * self.damping.values * self.lam - self.lam ** 2
        return (self.mesh.laplacian.astype(complex) + sp.diags(diagonal)).tocsc()

    @cached_property
    def _lu(self):
        try:
            return splu(self.operator)
        except RuntimeError as exc:
            raise SolverError(f"Helmholtz operator at lam={self.lam} is singular: {exc}") from exc

    def solve(self, f: np.ndarray) -> np.ndarray:
        u = self._lu.solve(np.asarray(f, dtype=complex))
        if not np.all(np.isfinite(u)):
            raise SolverError(f"Non-finite solution at lam={self.lam}")
        return u

    def solve_adjoint(self, f: np.ndarray) -> np.ndarray:
        return np.conj(self.solve(np.conj(f)))

    def relative_residual(self, u: np.ndarray, f: np.ndarray) -> float:
        scale = np.linalg.norm(f)
        return float(np.linalg.norm(self.operator @ u - f) / scale) if scale > 0 else 0.0


def solve_helmholtz(
    mesh: GridMesh,
    damping: DampingProfile,
    lam: float,
    f: np.ndarray,
    system: Optional[HelmholtzSystem] = None,
) -> np.ndarray:
    """
    Solve ``(-Delta_h + 2 i a lam - lam^2) u = f`` with Dirichlet data.

    Args:
        mesh: Domain mesh
        damping: Damping profile on mesh
        lam: Frequency
        f: Right-hand side on the interior nodes
        system: Reusable factorization for the same (mesh, damping, lam)

    Returns:
        u on the interior nodes
    """
    f = mesh.check_field(f)
    check_resolution(mesh, lam)
    if not np.any(f):
        return np.zeros(mesh.n_interior, dtype=complex)
    system = system or HelmholtzSystem(mesh, damping, lam)
    u = system.solve(f)
    residual = system.relative_residual(u, f)
    if residual >= SOLVE_RTOL:
        raise SolverError(f"Helmholtz solve at lam={lam} has relative residual {residual:.3e}")
    return u


def imaginary_identity_defect(
    mesh: GridMesh, damping: DampingProfile, lam: float, f: np.ndarray, u: np.ndarray
) -> float:
    """``|lam int a|u|^2 - 1/2 Im int f conj(u)| / (||f|| ||u||)`` (0 for zero data)."""
    scale = mesh.norm(f) * mesh.norm(u)
    if scale == 0:
        return 0.0
    dissipated = lam * mesh.cell_area * float(np.sum(damping.values * np.abs(u) ** 2))
    forcing = 0.5 * mesh.inner(f, u).imag
    return abs(dissipated - forcing) / scale


def h10_bound_slack(mesh: GridMesh, lam: float, f: np.ndarray, u: np.ndarray) -> float:
    """
    Relative slack in ``||u||_{H^1_0}^2 <= lam^2 ||u||^2 + ||f|| ||u||``.

    Nonnegative (up to rounding) for any solve with real lam.
    """
    h10 = mesh.inner(mesh.laplacian @ u, u).real
    bound = lam ** 2 * mesh.norm(u) ** 2 + mesh.norm(f) * mesh.norm(u)
    return (bound - h10) / bound if bound > 0 else 0.0


def rectangle_estimate_ratio(
    mesh: GridMesh, damping: DampingProfile, lam: float, f: np.ndarray, g: np.ndarray
) -> float:
    """
    ``||u||^2 / (||f||^2 + ||g||^2 + lam^2 int a|u|^2)`` for ``M(lam) u = f + d_x g`` on a rectangle.

    The ratio stays bounded in lam for damping whose y-minorant does not vanish identically.
    """
    if not mesh.is_rectangle:
        raise MeshError("The rectangle estimate needs a rectangle mesh")
    f, g = mesh.check_field(f), mesh.check_field(g)
    nx, ny = mesh.rectangle_counts
    d_x = sp.kron(x_derivative_matrix(nx - 1, mesh.hx), sp.identity(ny - 1), format="csr")
    rhs = np.asarray(f, dtype=complex) + d_x @ np.asarray(g, dtype=complex)
    u = solve_helmholtz(mesh, damping, lam, rhs)
    damped = lam ** 2 * mesh.cell_area * float(np.sum(damping.values * np.abs(u) ** 2))
    denom = mesh.norm(f) ** 2 + mesh.norm(g) ** 2 + damped
    return mesh.norm(u) ** 2 / denom if denom > 0 else 0.0


def resolvent_norm(
    mesh: GridMesh,
    damping: DampingProfile,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> Tuple[float, int]:
    """
    L2 -> L2 norm of ``R(lam)`` by power iteration on ``R* R``.

    Returns:
        (norm, iterations)
    """
    entry = _resolvent_entry(mesh, damping, lam, tol, max_iter, seed)
    return entry.norm, entry.iterations


@dataclass(frozen=True)
class SweepEntry:
    lam: float
    norm: float
    iterations: int
    residual: float
    failed: bool = False
    message: str = ""


@dataclass
class SweepResult:
    """
    Norm estimates along a frequency sweep, in increasing lam order.

    Args:
        entries: One SweepEntry per requested frequency
        fit: Log-log fit over the successful entries in the fit window (None when too few)
        window: Requested fit window
        reference_exponent: Exponent the growth is compared against
    """

    entries: List[SweepEntry]
    fit: Optional[FitReport]
    window: Tuple[float, float]
    reference_exponent: Optional[float] = None
    label: str = "resolvent"

    @property
    def fitted_exponent(self) -> float:
        return self.fit.exponent if self.fit else math.nan

    @property
    def fit_window(self) -> Tuple[float, float]:
        return self.fit.window if self.fit else self.window

    @property
    def fit_residual(self) -> float:
        return self.fit.residual if self.fit else math.nan

    @property
    def failures(self) -> List[SweepEntry]:
        return [entry for entry in self.entries if entry.failed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "lambda": [e.lam for e in self.entries],
                "norm": [e.norm for e in self.entries],
                "iterations": [e.iterations for e in self.entries],
                "residual": [e.residual for e in self.entries],
                "failed": [e.failed for e in self.entries],
                "message": [e.message for e in self.entries],
            }
        )

    def failure_records(self) -> List[dict]:
        return [{"sweep": self.label, "lambda": e.lam, "message": e.message} for e in self.failures]

    def fit_summary(self) -> dict:
        summary = self.fit.to_dict() if self.fit else {"alpha": None, "c": None, "residual": None}
        summary["window"] = list(self.fit_window)
        summary["reference_exponent"] = self.reference_exponent
        return summary


def _resolvent_entry(
    mesh: GridMesh,
    damping: DampingProfile,
    lam: float,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> SweepEntry:
    check_resolution(mesh, lam)
    system = HelmholtzSystem(mesh, damping, lam)
    result = power_norm(system.solve, system.solve_adjoint, size=mesh.n_interior, tol=tol, max_iter=max_iter, seed=seed)
    u = system.solve(result.vector)
    residual = system.relative_residual(u, result.vector)
    logger.info("R(%g): norm=%.8g after %d iterations", lam, result.norm, result.iterations)
    return SweepEntry(lam=float(lam), norm=result.norm, iterations=result.iterations, residual=residual)


def _generator_entry(
    mesh: GridMesh,
    damping: DampingProfile,
    lam: float,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> SweepEntry:
    check_resolution(mesh, lam)
    norm, iterations, residual = _generator_norm(mesh, damping, lam, tol, max_iter, seed)
    logger.info("(lam - A)^-1 at %g: norm=%.8g after %d iterations", lam, norm, iterations)
    return SweepEntry(lam=float(lam), norm=norm, iterations=iterations, residual=residual)


def _run_sweep(
    compute: Callable[[float], SweepEntry],
    lambdas: Sequence[float],
    window: Tuple[float, float],
    jobs: int,
    label: str,
    reference_exponent: Optional[float],
) -> SweepResult:
    lambdas = [float(lam) for lam in lambdas]
    if any(lam < 1 for lam in lambdas):
        raise RegimeError(f"Sweep frequencies must be >= 1, got {lambdas}")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise RegimeError("Sweep frequencies must be strictly increasing")

    def guarded(lam: float) -> SweepEntry:
        try:
            return compute(lam)
        except StadiumDecayError as exc:
            logger.warning("Sweep entry lam=%g failed: %s", lam, exc)
            return SweepEntry(lam=lam, norm=math.nan, iterations=getattr(exc, "iterations", 0),
                              residual=math.nan, failed=True, message=str(exc))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        entries = list(pool.map(guarded, lambdas))

    ok = [e for e in entries if not e.failed]
    try:
        fit = fit_power_law([e.lam for e in ok], [e.norm for e in ok], window)
    except FitError as exc:
        logger.warning("No %s exponent fit: %s", label, exc)
        fit = None
    result = SweepResult(entries=entries, fit=fit, window=tuple(window), reference_exponent=reference_exponent, label=label)
    logger.info("%s sweep: alpha=%.4g over %s", label, result.fitted_exponent, result.fit_window)
    return result


def sweep_and_fit(
    mesh: GridMesh,
    damping: DampingProfile,
    lambdas: Sequence[float],
    tol: float = DEFAULT_TOL,
    window: Tuple[float, float] = DEFAULT_FIT_WINDOW,
    jobs: int = 1,
    seed: int = DEFAULT_SEED,
) -> SweepResult:
    """
    Resolvent norms along ``lambdas`` and the fitted growth exponent.

    Failed entries are kept (marked failed) and excluded from the fit.
    The reference exponent is 1, or ``4/m`` for an order-m profile.
    """
    reference = 4.0 / damping.m if damping.m else 1.0
    return _run_sweep(
        lambda lam: _resolvent_entry(mesh, damping, lam, tol, seed=seed),
        lambdas, window, jobs, "resolvent", reference,
    )


def _h_inner(mesh: GridMesh) -> Callable[[np.ndarray, np.ndarray], complex]:
    n = mesh.n_interior
    laplacian = mesh.laplacian

    def inner(x: np.ndarray, y: np.ndarray) -> complex:
        return mesh.cell_area * (np.vdot(y[:n], laplacian @ x[:n]) + np.vdot(y[n:], x[n:]))

    return inner


def h_norm(mesh: GridMesh, state: np.ndarray) -> float:
    """Energy-space norm of a stacked state ``(u, v)``."""
    return math.sqrt(max(_h_inner(mesh)(state, state).real, 0.0))


def apply_generator_resolvent(
    system: HelmholtzSystem, state: np.ndarray, adjoint: bool = False
) -> np.ndarray:
    """
    Apply ``(lam - A)^{-1}`` (or its H-adjoint) to a stacked state ``(f, g)``.

    The H-adjoint is the same block formula with a -> -a and lam -> conj(lam),
    whose stationary inverse is ``conj(R(lam) conj(.))``.
    """
    n = system.mesh.n_interior
    f, g = state[:n], state[n:]
    a = system.damping.values
    if adjoint:
        lam = np.conj(system.lam)
        u = system.solve_adjoint((-2j * a - lam) * f - g)
    else:
        lam = system.lam
        u = system.solve((2j * a - lam) * f - g)
    return np.concatenate([u, lam * u - f])


def _generator_norm(
    mesh: GridMesh, damping: DampingProfile, lam: complex, tol: float, max_iter: int, seed: int
) -> Tuple[float, int, float]:
    system = HelmholtzSystem(mesh, damping, lam)
    result = power_norm(
        lambda x: apply_generator_resolvent(system, x),
        lambda y: apply_generator_resolvent(system, y, adjoint=True),
        size=2 * mesh.n_interior,
        inner=_h_inner(mesh),
        tol=tol,
        max_iter=max_iter,
        seed=seed,
    )
    x = result.vector
    n = mesh.n_interior
    u = system.solve((2j * damping.values - lam) * x[:n] - x[n:])
    residual = system.relative_residual(u, (2j * damping.values - lam) * x[:n] - x[n:])
    return result.norm, result.iterations, residual


def generator_resolvent_norm(
    mesh: GridMesh,
    damping: DampingProfile,
    lam: complex,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> float:
    """
    Energy-space operator norm of ``(lam - A)^{-1}``.

    Args:
        lam: Any complex number off the spectrum; for ``Im lam < 0`` the norm
            is at most ``1 / |Im lam|``

    Returns:
        Power-iteration estimate of the norm
    """
    norm, _, _ = _generator_norm(mesh, damping, complex(lam), tol, max_iter, seed)
    return norm


def generator_sweep(
    mesh: GridMesh,
    damping: DampingProfile,
    lambdas: Sequence[float],
    tol: float = DEFAULT_TOL,
    window: Tuple[float, float] = DEFAULT_FIT_WINDOW,
    jobs: int = 1,
    seed: int = DEFAULT_SEED,
) -> SweepResult:
    """Real-axis sweep of the generator resolvent; reference exponent 2, or ``1 + 4/m``."""
    reference = 1.0 + 4.0 / damping.m if damping.m else 2.0
    return _run_sweep(
        lambda lam: _generator_entry(mesh, damping, lam, tol, seed=seed),
        lambdas, window, jobs, "generator", reference,
    )
