"""
Time integration of the damped wave equation ``u_tt - Delta u + 2 a u_t = 0``.

The scheme is leapfrog with the damping term centered in time,

    u^{n+1} (1 + a dt) = 2 u^n - u^{n-1} (1 - a dt) - dt^2 L u^n,   L = -Delta_h,

which is explicit node by node. Its staggered energy

    E^{n+1/2} = 1/2 h^2 (||(u^{n+1} - u^n)/dt||^2 + Re <L u^{n+1}, u^n>)

obeys ``E^{n+1/2} - E^{n-1/2} = -2 dt int a |v^n|^2`` with
``v^n = (u^{n+1} - u^{n-1}) / (2 dt)``, so it never increases and is conserved
exactly when a = 0. Under ``dt <= 0.4 h`` it is a positive quadratic form
(h the larger of the two spacings).

The Cauchy data follow the ``D_t = -i d_t`` convention: ``d_t u(0) = i u1``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .damping import DampingProfile
from .exceptions import FieldSizeError, MeshError, RegimeError, SimulationError
from .geometry import GridMesh
from .spectrum import GeneratorMatrix

logger = logging.getLogger(__name__)

CFL_LIMIT = 0.4
SAMPLE_PERIOD = 0.1
METHOD = "leapfrog-centered-damping"


@dataclass(frozen=True, eq=False)
class CauchyPair:
    """
    Initial data ``u(0) = u0``, ``D_t u(0) = u1``.

    Args:
        mesh: Mesh both fields live on
        u0: Initial position
        u1: Initial ``D_t u``; the time stepper uses ``d_t u(0) = i u1``
    """

    mesh: GridMesh
    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        self.mesh.check_field(self.u0)
        self.mesh.check_field(self.u1)

    @property
    def v0(self) -> np.ndarray:
        return 1j * np.asarray(self.u1, dtype=complex)

    def stacked(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.u0, dtype=complex), np.asarray(self.u1, dtype=complex)])

    def scaled(self, c: complex) -> "CauchyPair":
        return CauchyPair(self.mesh, c * np.asarray(self.u0), c * np.asarray(self.u1))


StateLike = Union[Tuple[np.ndarray, np.ndarray], np.ndarray]


def energy(mesh: GridMesh, state: StateLike) -> float:
    """
    ``1/2 h^2 (<L u, u> + ||v||^2)``.

    Args:
        mesh: Mesh
        state: ``(u, v)`` pair or the stacked vector of length ``2 n_interior``
    """
    if isinstance(state, tuple):
        u, v = state
    else:
        state = np.asarray(state)
        if state.shape != (2 * mesh.n_interior,):
            raise FieldSizeError(f"Stacked state of shape {state.shape} does not match mesh")
        u, v = state[: mesh.n_interior], state[mesh.n_interior :]
    u, v = mesh.check_field(u), mesh.check_field(v)
    stiffness = np.vdot(u, mesh.laplacian @ u).real
    kinetic = np.vdot(v, v).real
    return 0.5 * mesh.cell_area * float(stiffness + kinetic)


@dataclass
class EnergyTrace:
    """
    Sampled energies of one evolution.

    ``times``/``energies`` hold the staggered energy ``E^{n+1/2}`` at ``(n + 1/2) dt``;
    ``collocated_times``/``collocated_energies`` hold ``E`` evaluated at ``n dt``
    from the centered velocity.
    """

    times: np.ndarray
    energies: np.ndarray
    collocated_times: np.ndarray
    collocated_energies: np.ndarray
    dt: float
    initial_energy: float
    sample_every: int
    data_norms: Dict[int, float] = field(default_factory=dict)
    method: str = METHOD

    @property
    def T(self) -> float:
        return float(self.times[-1]) if self.times.size else 0.0

    def max_relative_increase(self) -> float:
        """Largest ``(E_{j+1} - E_j) / E_0`` over consecutive samples."""
        if self.energies.size < 2 or self.energies[0] == 0:
            return 0.0
        return float(np.max(np.diff(self.energies)) / self.energies[0])

    def staggered_drift(self) -> float:
        """``max |E^{n+1/2} - E^{1/2}| / E^{1/2}``; roundoff only when a = 0."""
        if self.energies.size == 0 or self.energies[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.energies - self.energies[0])) / self.energies[0])

    def conservation_error(self) -> float:
        """``max |E_col(t) - E(0)| / E(0)`` using the collocated energies."""
        return float(np.max(np.abs(self.collocated_energies - self.initial_energy)) / self.initial_energy)

    def to_frame(self, orders: Sequence[int] = (1, 2)) -> pd.DataFrame:
        frame = pd.DataFrame({"t": self.times, "E": self.energies, "sqrtE": np.sqrt(self.energies)})
        for k in orders:
            frame[f"functional_k{k}"] = functional_curve(self, k)
        return frame

    def metadata(self) -> Dict:
        return {
            "dt": self.dt,
            "T": self.T,
            "sample_every": self.sample_every,
            "method": self.method,
            "initial_energy": self.initial_energy,
            "data_norms": {str(k): v for k, v in self.data_norms.items()},
        }


class WaveStepper:
    """
    Leapfrog state ``(u^{n-1}, u^n)`` for one evolution.

    The fictitious level ``u^{-1}`` comes from a second-order Taylor expansion
    so that the centered velocity at n = 0 reproduces ``d_t u(0)`` exactly.
    """

    def __init__(self, mesh: GridMesh, damping: DampingProfile, data: CauchyPair, dt: float):
        if dt <= 0 or dt > CFL_LIMIT * mesh.h * (1 + 1e-12):
            raise RegimeError(f"dt={dt} violates the CFL limit dt <= {CFL_LIMIT} h = {CFL_LIMIT * mesh.h:.6g}")
        if np.shape(data.u0) != (mesh.n_interior,):
            raise FieldSizeError("Cauchy data were built on a different mesh")
        self.mesh = mesh
        self.dt = dt
        self._a = damping.values
        self._plus = 1.0 + damping.values * dt
        self._minus = 1.0 - damping.values * dt
        self._laplacian = mesh.laplacian

        u0 = np.asarray(data.u0, dtype=complex)
        v0 = data.v0
        accel = -(self._laplacian @ u0) - 2.0 * self._a * v0
        self.u = u0
        self.u_prev = u0 - dt * v0 + 0.5 * dt ** 2 * accel
        self.n = 0

    @property
    def time(self) -> float:
        return self.n * self.dt

    def peek_next(self) -> np.ndarray:
        dt = self.dt
        return (2.0 * self.u - self._minus * self.u_prev - dt ** 2 * (self._laplacian @ self.u)) / self._plus

    def step(self) -> None:
        nxt = self.peek_next()
        self.u_prev, self.u = self.u, nxt
        self.n += 1

    def staggered_energy(self) -> float:
        """``E^{n-1/2}`` from the current pair ``(u^{n-1}, u^n)``."""
        diff = (self.u - self.u_prev) / self.dt
        coupling = np.vdot(self.u_prev, self._laplacian @ self.u).real
        return 0.5 * self.mesh.cell_area * float(np.vdot(diff, diff).real + coupling)

    def collocated_state(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(u^n, (u^{n+1} - u^{n-1}) / (2 dt))``."""
        return self.u, (self.peek_next() - self.u_prev) / (2.0 * self.dt)

    def dissipation_rate(self) -> float:
        """``2 int a |v^n|^2`` at the current level."""
        _, v = self.collocated_state()
        return 2.0 * self.mesh.cell_area * float(np.sum(self._a * np.abs(v) ** 2))

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.u)):
            raise SimulationError(
                f"Non-finite field at step {self.n} (t={self.time:.6g}); check dt and damping",
                step=self.n,
                time=self.time,
            )


def sample_interval(dt: float) -> int:
    return max(1, math.ceil(SAMPLE_PERIOD / dt - 1e-9))


def evolve(
    mesh: GridMesh,
    damping: DampingProfile,
    data: CauchyPair,
    T: float,
    dt: float,
    norm_orders: Sequence[int] = (0, 1, 2),
    sample_every: Optional[int] = None,
) -> EnergyTrace:
    """
    Integrate up to time T and record the energy.

    Args:
        mesh: Mesh
        damping: Damping profile
        data: Cauchy data
        T: Final time
        dt: Time step, at most ``0.4 h``
        norm_orders: k values for which ``||data||_{D(A^k)}`` is stored on the trace
        sample_every: Steps between samples; ``ceil(0.1 / dt)`` by default

    Returns:
        EnergyTrace
    """
    stepper = WaveStepper(mesh, damping, data, dt)
    every = sample_every or sample_interval(dt)
    n_steps = max(1, int(round(T / dt)))
    initial = energy(mesh, (np.asarray(data.u0, dtype=complex), data.v0))

    times, energies, col_times, col_energies = [], [], [], []
    for n in range(n_steps):
        if n % every == 0:
            col_times.append(stepper.time)
            col_energies.append(energy(mesh, stepper.collocated_state()))
        stepper.step()
        if n % every == 0:
            stepper.check_finite()
            times.append((n + 0.5) * dt)
            energies.append(stepper.staggered_energy())
    stepper.check_finite()

    norms = {k: dAk_norm(mesh, damping, data, k) for k in norm_orders}
    trace = EnergyTrace(
        times=np.array(times),
        energies=np.array(energies),
        collocated_times=np.array(col_times),
        collocated_energies=np.array(col_energies),
        dt=dt,
        initial_energy=initial,
        sample_every=every,
        data_norms=norms,
    )
    logger.info(
        "Evolved %d steps to T=%g (dt=%g): E(0)=%.6g E(T)=%.6g",
        n_steps, n_steps * dt, dt, initial, trace.energies[-1],
    )
    return trace


def dAk_norm(mesh: GridMesh, damping: DampingProfile, data: CauchyPair, k: int) -> float:
    """
    Graph norm ``||x||_H + ||A^k x||_H`` of ``x = (u0, u1)``; the plain energy norm for k = 0.
    """
    if k < 0:
        raise RegimeError(f"k must be >= 0, got {k}")
    generator = GeneratorMatrix(mesh, damping)
    x = data.stacked()
    base = generator.h_norm(x)
    if k == 0:
        return base
    power = x
    for _ in range(k):
        power = generator.apply(power)
    return base + generator.h_norm(power)


def _functional_exponents(k: int, m: Optional[float], eps: float) -> Tuple[float, float]:
    """(time exponent, log exponent) of the decay functional."""
    if m is None:
        return k / 2.0, k / 2.0 + 1.0
    return k / (1.0 + 4.0 / m) - eps, 0.0


def functional_curve(
    trace: EnergyTrace, k: int, m: Optional[float] = None, eps: float = 0.0
) -> np.ndarray:
    """Pointwise decay functional on the trace times (NaN before t = 2 or without a norm for k)."""
    norm = trace.data_norms.get(k)
    out = np.full(trace.times.shape, np.nan)
    if not norm:
        return out
    p, q = _functional_exponents(k, m, eps)
    late = trace.times >= 2
    t = trace.times[late]
    out[late] = np.sqrt(trace.energies[late]) * t ** p / np.log(t) ** q / norm
    return out


def decay_bound_functional(
    trace: EnergyTrace,
    k: int,
    m: Optional[float] = None,
    eps: float = 0.0,
    t_max: Optional[float] = None,
) -> float:
    """
    Empirical decay constant ``sup_{t >= 2} E^{1/2} t^{k/2} / ((log t)^{k/2+1} ||data||_{D(A^k)})``.

    With ``m`` given the weight is ``t^{k/(1+4/m) - eps}`` and no log factor
    (``m = inf`` gives ``t^{k - eps}``).

    Args:
        trace: Energy trace with ``data_norms[k]``
        k: Smoothness index
        m: Vanishing order of the damping, for the improved rate
        eps: Loss in the improved exponent
        t_max: Restrict the supremum to ``t <= t_max``
    """
    if trace.T < 2:
        raise RegimeError(f"Decay functional needs samples with t >= 2, trace ends at {trace.T}")
    if k not in trace.data_norms:
        raise RegimeError(f"Trace carries no D(A^{k}) norm of the data")
    if t_max is not None and t_max < 2:
        raise RegimeError(f"Decay functional horizon t_max={t_max} is below 2")
    curve = functional_curve(trace, k, m, eps)
    if t_max is not None:
        curve = np.where(trace.times <= t_max, curve, np.nan)
    return float(np.nanmax(curve))


def _rectangle_x(mesh: GridMesh) -> np.ndarray:
    return mesh.xs - mesh.spec.x0


def bouncing_ball_data(
    mesh: GridMesh, k: int = 1, x_center: float = 0.5, width: float = 0.08
) -> CauchyPair:
    """
    Gaussian packet in x times ``sin(k pi y / Ly)``, supported on the rectangle.

    ``x_center`` is measured from the rectangle's left side.
    """
    xr = _rectangle_x(mesh)
    inside = (xr > 0) & (xr < mesh.spec.Lx)
    envelope = np.where(inside, np.exp(-((xr - x_center) ** 2) / (2 * width ** 2)), 0.0)
    u0 = envelope * np.sin(k * np.pi * mesh.ys / mesh.spec.Ly)
    return CauchyPair(mesh, u0.astype(complex), np.zeros(mesh.n_interior, dtype=complex))


def wing_bump_data(mesh: GridMesh, radius: Optional[float] = None) -> CauchyPair:
    """Smooth ``cos^2`` bump centred in the left wing."""
    spec = mesh.spec
    if not spec.has_wings:
        raise MeshError("Wing data need a domain with wings")
    radius = radius or spec.beta / 3
    cx, cy = spec.x0 - spec.beta / 2, spec.Ly / 2
    r = np.hypot(mesh.xs - cx, mesh.ys - cy)
    u0 = np.where(r < radius, np.cos(0.5 * np.pi * r / radius) ** 2, 0.0)
    return CauchyPair(mesh, u0.astype(complex), np.zeros(mesh.n_interior, dtype=complex))


def eigenfunction_data(mesh: GridMesh, n: int = 1, k: int = 1) -> CauchyPair:
    """Discrete Dirichlet eigenfunction ``sin(n pi x/Lx) sin(k pi y/Ly)`` of a rectangle, at rest."""
    if not mesh.is_rectangle:
        raise MeshError("Eigenfunction data need a rectangle mesh")
    xr = _rectangle_x(mesh)
    u0 = np.sin(n * np.pi * xr / mesh.spec.Lx) * np.sin(k * np.pi * mesh.ys / mesh.spec.Ly)
    return CauchyPair(mesh, u0.astype(complex), np.zeros(mesh.n_interior, dtype=complex))
