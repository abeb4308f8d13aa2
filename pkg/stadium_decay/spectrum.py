"""
Spectrum of the damped-wave generator ``A = (0 1; L 2ia)``, ``L = -Delta_h``.

The companion form acts on ``(u, v)`` with ``v = lam u`` at an eigenpair, so
eigenvalues of A are exactly the roots of the pencil ``L + 2 i a lam - lam^2``.
Dense computations run in the energy-orthonormal frame
``S A S^{-1} = (0 L^{1/2}; L^{1/2} 2ia)``, ``S = diag(L^{1/2}, I)``, which is
similar to A and has the energy norm as its Euclidean norm.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs, splu

from .damping import DampingProfile
from .exceptions import FieldSizeError, RegimeError, SolverError
from .geometry import GridMesh
from .operator_norm import DEFAULT_MAX_ITER, DEFAULT_SEED, DEFAULT_TOL, power_norm

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4000
RESIDUAL_TOL = 1e-8
DEDUPE_TOL = 1e-6
BAND_SLACK = 1e-10

# (re_min, re_max, im_min, im_max)
Window = Tuple[float, float, float, float]


class SpectrumMethod(str, Enum):
    DENSE = "dense"
    SHIFT_INVERT = "shift_invert"


@dataclass(eq=False)
class GeneratorMatrix:
    """
    Block generator on stacked states ``(u, v)`` of length ``2 n_interior``.

    The dense forms are only materialized when ``dimension <= DENSE_LIMIT``.
    """

    mesh: GridMesh
    damping: DampingProfile

    @property
    def n(self) -> int:
        return self.mesh.n_interior

    @property
    def dimension(self) -> int:
        return 2 * self.n

    @property
    def a_max(self) -> float:
        return self.damping.a_max

    def apply(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state)
        if state.shape != (self.dimension,):
            raise FieldSizeError(f"State of shape {state.shape} does not match generator of size {self.dimension}")
        u, v = state[: self.n], state[self.n :]
        return np.concatenate([v, self.mesh.laplacian @ u + 2j * self.damping.values * v])

    @cached_property
    def sparse(self) -> sp.csc_matrix:
        identity = sp.identity(self.n, format="csr")
        damping = sp.diags(2j * self.damping.values)
        return sp.bmat([[None, identity], [self.mesh.laplacian, damping]], format="csc").astype(complex)

    def _require_dense(self):
        if self.dimension > DENSE_LIMIT:
            raise RegimeError(f"Dense generator limited to dimension {DENSE_LIMIT}, got {self.dimension}")

    @cached_property
    def dense(self) -> np.ndarray:
        self._require_dense()
        return self.sparse.toarray()

    @cached_property
    def _laplacian_eig(self) -> Tuple[np.ndarray, np.ndarray]:
        self._require_dense()
        return la.eigh(self.mesh.laplacian.toarray())

    @cached_property
    def energy_frame(self) -> np.ndarray:
        """``S A S^{-1}`` with ``S = diag(L^{1/2}, I)``; Euclidean norm equals the energy norm / h."""
        mu, q = self._laplacian_eig
        root = (q * np.sqrt(mu)) @ q.T
        n = self.n
        frame = np.zeros((2 * n, 2 * n), dtype=complex)
        frame[:n, n:] = root
        frame[n:, :n] = root
        frame[n:, n:] = np.diag(2j * self.damping.values)
        return frame

    def from_energy_frame(self, y: np.ndarray) -> np.ndarray:
        """Map frame coordinates back to ``(u, v)``."""
        mu, q = self._laplacian_eig
        n = self.n
        u = (q / np.sqrt(mu)) @ (q.T @ y[:n])
        return np.concatenate([u, y[n:]], axis=0)

    def h_inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        n = self.n
        return self.mesh.cell_area * (np.vdot(y[:n], self.mesh.laplacian @ x[:n]) + np.vdot(y[n:], x[n:]))

    def h_norm(self, state: np.ndarray) -> float:
        return math.sqrt(max(self.h_inner(state, state).real, 0.0))


def assemble_generator(mesh: GridMesh, damping: DampingProfile) -> GeneratorMatrix:
    """Pair a mesh with a damping profile built on it."""
    if damping.values.shape != (mesh.n_interior,):
        raise FieldSizeError(
            f"Damping with {damping.values.shape[0]} values does not match mesh with {mesh.n_interior} nodes"
        )
    return GeneratorMatrix(mesh, damping)


@dataclass
class SpectrumResult:
    """
    Eigenvalues of the generator with their scaled residuals.

    ``vectors`` holds the stacked ``(u, v)`` eigenvectors column-wise.
    """

    eigenvalues: np.ndarray
    method: SpectrumMethod
    window: Optional[Window]
    residuals: np.ndarray
    vectors: Optional[np.ndarray] = None
    failed_targets: List[complex] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "re_lambda": self.eigenvalues.real,
                "im_lambda": self.eigenvalues.imag,
                "residual": self.residuals,
            }
        )


def _in_window(values: np.ndarray, window: Optional[Window]) -> np.ndarray:
    if window is None:
        return np.ones(values.shape, dtype=bool)
    re_min, re_max, im_min, im_max = window
    return (values.real >= re_min) & (values.real <= re_max) & (values.imag >= im_min) & (values.imag <= im_max)


def scaled_residual(gen: GeneratorMatrix, lam: complex, x: np.ndarray) -> float:
    """``||A x - lam x||_H / (||x||_H max(1, |lam|))``."""
    return gen.h_norm(gen.apply(x) - lam * x) / (gen.h_norm(x) * max(1.0, abs(lam)))


def _dense_spectrum(gen: GeneratorMatrix, window: Optional[Window]) -> SpectrumResult:
    frame = gen.energy_frame
    values, vectors = la.eig(frame)
    norms = np.linalg.norm(vectors, axis=0)
    residuals = np.linalg.norm(frame @ vectors - vectors * values, axis=0) / (norms * np.maximum(1.0, np.abs(values)))
    keep = _in_window(values, window)
    order = np.lexsort((values.imag[keep], values.real[keep]))
    values, residuals = values[keep][order], residuals[keep][order]
    states = gen.from_energy_frame(vectors[:, keep][:, order])
    return SpectrumResult(values, SpectrumMethod.DENSE, window, residuals, states)


def _dedupe(values: List[complex]) -> List[int]:
    """Indices of the first occurrence of each eigenvalue up to DEDUPE_TOL."""
    kept: List[int] = []
    for i, lam in enumerate(values):
        if all(abs(lam - values[j]) > DEDUPE_TOL for j in kept):
            kept.append(i)
    return kept


def _shift_invert_spectrum(
    gen: GeneratorMatrix, window: Window, targets: Sequence[complex], per_target: int, jobs: int
) -> SpectrumResult:
    matrix = gen.sparse
    k = min(per_target, gen.dimension - 2)

    def run(target: complex):
        try:
            values, vectors = eigs(matrix, k=k, sigma=target, which="LM")
            return target, values, vectors
        except (ArpackNoConvergence, ArpackError, RuntimeError) as exc:
            logger.warning("Shift-invert at target %s failed: %s", target, exc)
            return target, None, None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(run, targets))

    values, vectors, residuals, failed = [], [], [], []
    for target, vals, vecs in outcomes:
        if vals is None:
            failed.append(target)
            continue
        for lam, x in zip(vals, vecs.T):
            values.append(complex(lam))
            vectors.append(x)
            residuals.append(scaled_residual(gen, lam, x))

    kept = [i for i in _dedupe(values) if _in_window(np.array([values[i]]), window)[0]]
    kept.sort(key=lambda i: (values[i].real, values[i].imag))
    states = np.stack([vectors[i] for i in kept], axis=1) if kept else np.zeros((gen.dimension, 0), dtype=complex)
    return SpectrumResult(
        np.array([values[i] for i in kept], dtype=complex),
        SpectrumMethod.SHIFT_INVERT,
        window,
        np.array([residuals[i] for i in kept]),
        states,
        failed,
    )


def default_targets(window: Window, count: int = 8) -> List[complex]:
    """Shifts spread along the real direction of the window at its mid height."""
    re_min, re_max, im_min, im_max = window
    return [complex(re, 0.5 * (im_min + im_max)) for re in np.linspace(re_min, re_max, count)]


def compute_spectrum(
    gen: GeneratorMatrix,
    window: Optional[Window] = None,
    targets: Optional[Sequence[complex]] = None,
    per_target: int = 12,
    jobs: int = 1,
) -> SpectrumResult:
    """
    Eigenvalues of the generator inside ``window``.

    Args:
        gen: Assembled generator
        window: (re_min, re_max, im_min, im_max); the whole spectrum on the dense path when None
        targets: Shifts for shift-invert; spread over the window when None
        per_target: Eigenvalues requested per shift
        jobs: Worker threads for independent shifts

    Returns:
        SpectrumResult sorted by real then imaginary part
    """
    if gen.dimension <= DENSE_LIMIT:
        result = _dense_spectrum(gen, window)
    else:
        if window is None:
            raise RegimeError("Shift-invert spectra need a target window")
        result = _shift_invert_spectrum(gen, window, targets or default_targets(window), per_target, jobs)

    bad = result.residuals > RESIDUAL_TOL
    if bad.any():
        logger.warning("%d eigenvalues exceed the residual tolerance %.0e", int(bad.sum()), RESIDUAL_TOL)
    logger.info("Spectrum (%s): %d eigenvalues", result.method.value, len(result.eigenvalues))
    return result


def band_violations(result: SpectrumResult, a_max: float, slack: float = BAND_SLACK) -> np.ndarray:
    """Eigenvalues outside ``-slack <= Im lam <= 2 a_max + slack``."""
    im = result.eigenvalues.imag
    return result.eigenvalues[(im < -slack) | (im > 2 * a_max + slack)]


def pencil_residuals(gen: GeneratorMatrix, result: SpectrumResult) -> np.ndarray:
    """``||(L + 2ia lam - lam^2) u|| / (||u|| max(1, |lam|)^2)`` per eigenpair."""
    out = []
    for lam, x in zip(result.eigenvalues, result.vectors.T):
        u = x[: gen.n]
        pencil = gen.mesh.laplacian @ u + (2j * gen.damping.values * lam - lam ** 2) * u
        out.append(np.linalg.norm(pencil) / (np.linalg.norm(u) * max(1.0, abs(lam)) ** 2))
    return np.array(out)


def match_sets(first: np.ndarray, second: np.ndarray) -> float:
    """Largest distance in the optimal one-to-one matching of two equal-size sets."""
    first, second = np.asarray(first), np.asarray(second)
    if first.shape != second.shape:
        raise FieldSizeError(f"Cannot match sets of sizes {first.shape} and {second.shape}")
    if first.size == 0:
        return 0.0
    cost = np.abs(first[:, None] - second[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def reflection_mismatch(result: SpectrumResult) -> float:
    """Distance between the spectrum and its reflection ``lam -> -conj(lam)``."""
    return match_sets(result.eigenvalues, -np.conj(result.eigenvalues))


def lower_halfplane_bound_check(
    gen: GeneratorMatrix,
    lam: complex,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
) -> float:
    """
    Energy-norm of ``(lam - A)^{-1}`` for ``Im lam < 0``, bounded by ``1 / |Im lam|``.

    Uses a sparse LU of ``lam - A`` directly; the energy adjoint of A is A
    with the damping sign flipped, so the adjoint solve factors
    ``conj(lam) - A(-a)``.
    """
    lam = complex(lam)
    if lam.imag >= 0:
        raise RegimeError(f"Lower half-plane check needs Im lam < 0, got {lam}")
    identity = sp.identity(gen.dimension, format="csc", dtype=complex)
    flipped = GeneratorMatrix(gen.mesh, _negated(gen.damping))
    try:
        lu = splu((lam * identity - gen.sparse).tocsc())
        lu_adjoint = splu((np.conj(lam) * identity - flipped.sparse).tocsc())
    except RuntimeError as exc:
        raise SolverError(f"lam - A is singular at {lam}: {exc}") from exc

    result = power_norm(
        lu.solve,
        lu_adjoint.solve,
        size=gen.dimension,
        inner=gen.h_inner,
        tol=tol,
        max_iter=max_iter,
        seed=seed,
    )
    logger.info("||(%s - A)^-1||_H = %.8g (bound %.8g)", lam, result.norm, 1.0 / abs(lam.imag))
    return result.norm


def dense_resolvent_norm(gen: GeneratorMatrix, lam: complex) -> float:
    """Dense oracle: ``1 / sigma_min(lam - S A S^{-1})``."""
    frame = gen.energy_frame
    sigma_min = la.svdvals(lam * np.eye(gen.dimension) - frame).min()
    if sigma_min == 0:
        raise SolverError(f"lam={lam} is an eigenvalue", smallest_singular_value=0.0)
    return float(1.0 / sigma_min)


def _negated(damping: DampingProfile) -> DampingProfile:
    return DampingProfile(mesh=damping.mesh, values=-damping.values, kind=damping.kind)


def constant_damping_oracle(mesh: GridMesh, c: float) -> np.ndarray:
    """Roots ``i c +- sqrt(mu - c^2)`` of every discrete rectangle mode."""
    nx, ny = mesh.rectangle_counts
    mu_x = (2.0 / mesh.hx * np.sin(np.arange(1, nx) * np.pi * mesh.hx / (2 * mesh.spec.Lx))) ** 2
    mu_y = (2.0 / mesh.hy * np.sin(np.arange(1, ny) * np.pi * mesh.hy / (2 * mesh.spec.Ly))) ** 2
    mu = (mu_x[:, None] + mu_y[None, :]).ravel()
    root = np.sqrt(mu - c ** 2 + 0j)
    return np.concatenate([1j * c + root, 1j * c - root])
