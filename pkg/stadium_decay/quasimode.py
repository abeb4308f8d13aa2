"""
Bouncing-ball quasimodes ``e_k = phi(x) sin(k y)`` on a truncated strip.

The strip ``[-L, L] x [0, pi]`` carries Dirichlet data on all four sides;
waves travel at speed 1, so as long as the envelope support stays one unit
plus the elapsed time away from ``x = +-L`` the ends are never felt.

Residuals are measured against the discrete standing wave
``cos(n theta_k) e_k``, ``cos(theta_k) = 1 - mu_k dt^2 / 2``, where ``mu_k`` is
the discrete transverse eigenvalue; with this reference the only error left
is the propagation of the envelope, which is ``O(t / k)``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .damping import constant_damping
from .evolution import CFL_LIMIT, CauchyPair, WaveStepper
from .exceptions import HorizonError, RegimeError
from .geometry import GridMesh, build_rectangle, transverse_eigenvalue

logger = logging.getLogger(__name__)

STRIP_HEIGHT = math.pi


@dataclass(frozen=True)
class QuasimodeSpec:
    """
    Gaussian envelope truncated at ``cutoff`` widths, on the strip ``[-L, L] x [0, pi]``.

    Args:
        k: Transverse mode index
        half_length: L
        x0: Envelope center
        sigma: Envelope width
        cutoff: Truncation radius in units of sigma
        t_max: Largest time the quasimode will be propagated to, validated against the horizon
    """

    k: int
    half_length: float
    x0: float = 0.0
    sigma: float = 1.0
    cutoff: float = 6.0
    t_max: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise RegimeError(f"Quasimode index must be >= 1, got {self.k}")
        if self.sigma <= 0 or self.cutoff <= 0:
            raise RegimeError("Envelope width and cutoff must be positive")
        if self.horizon <= 0:
            raise HorizonError(
                f"Envelope support {self.support} leaves no propagation room inside [-{self.half_length}, {self.half_length}]"
            )
        if self.t_max is not None and self.t_max > self.horizon:
            raise HorizonError(f"t_max={self.t_max} exceeds the horizon {self.horizon:.6g}")

    @property
    def support(self) -> Tuple[float, float]:
        return self.x0 - self.cutoff * self.sigma, self.x0 + self.cutoff * self.sigma

    @property
    def horizon(self) -> float:
        """Largest t with ``support`` inside ``[-L + t + 1, L - t - 1]``."""
        lo, hi = self.support
        return self.half_length - 1.0 - max(abs(lo), abs(hi))

    def envelope(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.support
        phi = np.exp(-((x - self.x0) ** 2) / (2 * self.sigma ** 2))
        return np.where((x >= lo) & (x <= hi), phi, 0.0)


def build_quasimode_mesh(spec: QuasimodeSpec, h: float) -> GridMesh:
    """Mesh of the strip ``[-L, L] x [0, pi]``."""
    L = spec.half_length
    return build_rectangle(2 * L, STRIP_HEIGHT, h, x0=-L)


def build_quasimode(mesh: GridMesh, spec: QuasimodeSpec) -> np.ndarray:
    """
    ``phi(x) sin(k y)`` with ``hx sum phi(x_i)^2 = 1``, so ``||e_k||^2 = pi/2``.

    Args:
        mesh: Strip mesh from ``build_quasimode_mesh``
        spec: Quasimode parameters

    Returns:
        Real field on the interior nodes
    """
    lo, hi = spec.support
    x_left, x_right = mesh.spec.x0, mesh.spec.x0 + mesh.spec.Lx
    if lo <= x_left or hi >= x_right:
        raise HorizonError(f"Envelope support [{lo}, {hi}] is not inside the strip ({x_left}, {x_right})")
    _, ny = mesh.rectangle_counts
    if spec.k >= ny:
        raise RegimeError(f"Mode k={spec.k} is not resolved by {ny - 1} transverse nodes")
    column = spec.envelope(mesh.rectangle_x)
    scale = math.sqrt(mesh.hx * float(np.sum(column ** 2)))
    phi = spec.envelope(mesh.xs) / scale
    return phi * np.sin(spec.k * np.pi * mesh.ys / mesh.spec.Ly)


def quasimode_defect(mesh: GridMesh, spec: QuasimodeSpec, discrete: bool = True) -> float:
    """
    ``||(-Delta_h - mu_k) e_k||`` with ``mu_k`` the discrete transverse eigenvalue
    (``k^2`` when ``discrete`` is False).
    """
    field = build_quasimode(mesh, spec)
    mu = transverse_eigenvalue(mesh, spec.k) if discrete else float(spec.k ** 2)
    return mesh.norm(mesh.laplacian @ field - mu * field)


def _time_step(mesh: GridMesh, dt: Optional[float]) -> float:
    return dt if dt is not None else 0.5 * CFL_LIMIT * mesh.h


def standing_wave_residuals(
    mesh: GridMesh, u0: np.ndarray, mu: float, times: Sequence[float], dt: Optional[float] = None
) -> pd.DataFrame:
    """
    Distance of the undamped evolution of ``(u0, 0)`` from the discrete standing wave.

    Returns:
        DataFrame with the sampled times and two residuals,
        ``residual = ||u^n - cos(n theta) u0||`` and the quadrature residual
        ``sqrt(||u^n - cos(n theta) u0||^2 + ||v^n / w + sin(n theta) u0||^2)``
        with ``w = sin(theta) / dt``
    """
    dt = _time_step(mesh, dt)
    steps = [int(round(t / dt)) for t in times]
    if any(b < a for a, b in zip(steps, steps[1:])):
        raise RegimeError("Residual times must be nondecreasing")
    cos_theta = 1.0 - 0.5 * mu * dt ** 2
    if abs(cos_theta) >= 1:
        raise RegimeError(f"dt={dt} does not resolve the frequency sqrt({mu})")
    theta = math.acos(cos_theta)
    omega = math.sin(theta) / dt

    reference = np.asarray(u0, dtype=complex)
    stepper = WaveStepper(mesh, constant_damping(mesh, 0.0), CauchyPair(mesh, reference, np.zeros_like(reference)), dt)
    rows = []
    for n in steps:
        while stepper.n < n:
            stepper.step()
        u, v = stepper.collocated_state()
        position = mesh.norm(u - math.cos(n * theta) * reference)
        velocity = mesh.norm(v / omega + math.sin(n * theta) * reference)
        rows.append((n * dt, position, math.hypot(position, velocity)))
    stepper.check_finite()
    return pd.DataFrame(rows, columns=["t", "residual", "quadrature_residual"])


def _check_horizon(spec: QuasimodeSpec, times: Sequence[float]):
    late = max(times, default=0.0)
    if late > spec.horizon:
        raise HorizonError(f"t={late} exceeds the quasimode horizon {spec.horizon:.6g}")


def quasimode_residual_curve(
    mesh: GridMesh, spec: QuasimodeSpec, times: Sequence[float], dt: Optional[float] = None
) -> pd.DataFrame:
    """Tabulate ``(k, t, residual, residual_over_t_over_k, quadrature_residual)``."""
    _check_horizon(spec, times)
    frame = standing_wave_residuals(
        mesh, build_quasimode(mesh, spec), transverse_eigenvalue(mesh, spec.k), times, dt
    )
    frame.insert(0, "k", spec.k)
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["residual_over_t_over_k"] = np.where(
            frame["t"] > 0, frame["residual"] / (frame["t"] / spec.k), 0.0
        )
    logger.info("Quasimode k=%d: max residual %.4g over %d times", spec.k, frame["residual"].max(), len(frame))
    return frame[["k", "t", "residual", "residual_over_t_over_k", "quadrature_residual"]]


def quasimode_residual(mesh: GridMesh, spec: QuasimodeSpec, t: float, dt: Optional[float] = None) -> float:
    """
    ``||u(t) - cos(t w_k) e_k||`` for the undamped evolution of ``(e_k, 0)``.

    Args:
        mesh: Strip mesh
        spec: Quasimode parameters
        t: Time, at most ``spec.horizon``
        dt: Time step (half the CFL limit by default)
    """
    _check_horizon(spec, [t])
    if t == 0:
        return 0.0
    return float(quasimode_residual_curve(mesh, spec, [t], dt)["residual"].iloc[0])
