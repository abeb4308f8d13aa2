"""
Damping coefficients a(x, y) >= 0 sampled on a mesh.

Two structured families are built: a continuous profile vanishing on a
vertical strip of the rectangle and equal to a floor on the wings, and the
order-m boundary-layer profile vanishing exactly on ``[delta, Lx - delta]``.
All x-coordinates below are measured from the rectangle's left side.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import DampingError, RegimeError
from .geometry import GridMesh

logger = logging.getLogger(__name__)


class DampingKind(str, Enum):
    WING_CONTINUOUS = "wing_continuous"
    SMOOTH_ORDER_M = "smooth_order_m"
    CONSTANT = "constant"


@dataclass(frozen=True, eq=False)
class DampingProfile:
    """
    Sampled damping coefficient with the parameters it was built from.

    Args:
        mesh: Mesh the values live on
        values: Nonnegative value per interior node
        kind: Construction family
        m: Vanishing order (SMOOTH_ORDER_M only)
        delta: Boundary-layer width (SMOOTH_ORDER_M only)
        amplitude: Value at the rectangle's vertical sides (SMOOTH_ORDER_M) or constant value
        strip: Undamped strip (WING_CONTINUOUS only)
        floor: Value on the wings
    """

    mesh: GridMesh
    values: np.ndarray
    kind: DampingKind
    m: Optional[int] = None
    delta: Optional[float] = None
    amplitude: Optional[float] = None
    strip: Optional[Tuple[float, float]] = None
    floor: Optional[float] = None
    _cache: Dict = field(default_factory=dict, repr=False)

    @property
    def a_max(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    @property
    def wing_floor(self) -> float:
        """Minimum of a over the closure of the wings (edge columns for a bare rectangle)."""
        mask = self.mesh.wing_closure_mask
        if not mask.any():
            xs = self.mesh.xs
            mask = np.isclose(xs, xs.min()) | np.isclose(xs, xs.max())
        return float(self.values[mask].min())

    def rectangle_formula(self, xr: np.ndarray) -> np.ndarray:
        """Analytic order-m profile on the rectangle, ``xr`` measured from its left side."""
        self._require_smooth()
        Lx = self.mesh.spec.Lx
        left = np.maximum(0.0, self.delta - xr) / self.delta
        right = np.maximum(0.0, xr - (Lx - self.delta)) / self.delta
        return self.amplitude * (left ** self.m + right ** self.m)

    def rectangle_derivative(self, xr: np.ndarray, n: int) -> np.ndarray:
        """Closed-form n-th x-derivative of ``rectangle_formula``."""
        self._require_smooth()
        if n == 0:
            return self.rectangle_formula(xr)
        Lx = self.mesh.spec.Lx
        m, delta = self.m, self.delta
        if n > m:
            return np.zeros_like(np.asarray(xr, dtype=float))
        coef = self.amplitude * math.perm(m, n) / delta ** n
        left = np.maximum(0.0, delta - xr) / delta
        right = np.maximum(0.0, xr - (Lx - delta)) / delta
        left_part = np.where(xr < delta, (-1.0) ** n * left ** (m - n), 0.0)
        right_part = np.where(xr > Lx - delta, right ** (m - n), 0.0)
        return coef * (left_part + right_part)

    def one_sided_derivative_signs(self) -> Tuple[bool, bool]:
        """
        Sign condition on the m-th derivative at the two layers.

        Returns:
            (left_ok, right_ok): ``(-1)^m a^(m) >= 0`` left of delta and
            ``a^(m) >= 0`` right of ``Lx - delta``
        """
        self._require_smooth()
        Lx = self.mesh.spec.Lx
        left_x = np.linspace(0.0, self.delta, 50, endpoint=False)
        right_x = np.linspace(Lx - self.delta, Lx, 50)[1:]
        left = (-1.0) ** self.m * self.rectangle_derivative(left_x, self.m)
        right = self.rectangle_derivative(right_x, self.m)
        return bool(np.all(left >= 0)), bool(np.all(right >= 0))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.mesh.xs, "y": self.mesh.ys, "a": self.values})

    def metadata(self) -> Dict:
        return {
            "kind": self.kind.value,
            "m": self.m,
            "delta": self.delta,
            "amplitude": self.amplitude,
            "strip": list(self.strip) if self.strip is not None else None,
            "floor": self.floor,
            "a_max": self.a_max,
            "wing_floor": self.wing_floor,
        }

    def _require_smooth(self):
        if self.kind is not DampingKind.SMOOTH_ORDER_M:
            raise DampingError(f"Operation needs an order-m profile, got {self.kind.value}")


def _relative_x(mesh: GridMesh) -> np.ndarray:
    return mesh.xs - mesh.spec.x0


def _check_admissible(profile: DampingProfile) -> DampingProfile:
    if np.any(profile.values < 0):
        raise DampingError("Damping must be nonnegative")
    if not np.any(profile.values > 0):
        raise DampingError("Damping vanishes identically on the mesh")
    if profile.wing_floor <= 0:
        raise DampingError(f"Damping must be positive on the wing closure, got floor {profile.wing_floor}")
    return profile


def build_wing_damping(mesh: GridMesh, strip: Tuple[float, float], floor: float) -> DampingProfile:
    """
    Continuous damping vanishing on ``strip`` and equal to ``floor`` on the wings.

    Inside the rectangle a depends on x only: zero on the strip, rising
    linearly to ``floor`` at the vertical sides.

    Args:
        mesh: Target mesh
        strip: (x_lo, x_hi), measured from the rectangle's left side
        floor: Value on the wings, > 0

    Returns:
        DampingProfile of kind WING_CONTINUOUS
    """
    x_lo, x_hi = float(strip[0]), float(strip[1])
    Lx = mesh.spec.Lx
    if not x_lo < x_hi:
        raise DampingError(f"Empty undamped strip [{x_lo}, {x_hi}]")
    if not (0 < x_lo and x_hi < Lx):
        raise DampingError(f"Strip [{x_lo}, {x_hi}] must lie strictly inside (0, {Lx})")
    if floor <= 0:
        raise DampingError(f"Wing floor must be positive, got {floor}")

    xr = _relative_x(mesh)
    rise_left = (x_lo - xr) / x_lo
    rise_right = (xr - x_hi) / (Lx - x_hi)
    values = floor * np.clip(np.maximum(rise_left, rise_right), 0.0, 1.0)
    profile = DampingProfile(
        mesh=mesh, values=values, kind=DampingKind.WING_CONTINUOUS, strip=(x_lo, x_hi), floor=floor
    )
    logger.debug("Wing damping: strip=[%g, %g] floor=%g a_max=%g", x_lo, x_hi, floor, profile.a_max)
    return _check_admissible(profile)


def build_smooth_m_damping(
    mesh: GridMesh,
    m: int,
    delta: float,
    amplitude: float = 1.0,
    floor: Optional[float] = None,
) -> DampingProfile:
    """
    Order-m boundary-layer damping vanishing exactly on ``[delta, Lx - delta]``.

    Inside the rectangle ``a = A((delta-x)_+/delta)^m + A((x-(Lx-delta))_+/delta)^m``,
    independent of y. On the wings the edge value A is continued as a
    constant, clipped below by ``floor`` when given.
    """
    Lx = mesh.spec.Lx
    if int(m) != m or m < 4:
        raise DampingError(f"Vanishing order must be an integer m >= 4, got {m}")
    if not 0 < delta < Lx / 2:
        raise DampingError(f"delta must lie in (0, {Lx / 2}), got {delta}")
    if amplitude <= 0:
        raise DampingError(f"Amplitude must be positive, got {amplitude}")

    wing_value = amplitude if floor is None else max(amplitude, floor)
    xr = _relative_x(mesh)
    left = np.maximum(0.0, delta - xr) / delta
    right = np.maximum(0.0, xr - (Lx - delta)) / delta
    values = amplitude * (left ** m + right ** m)
    in_wing = (xr < 0) | (xr > Lx)
    values = np.where(in_wing, wing_value, values)
    profile = DampingProfile(
        mesh=mesh,
        values=values,
        kind=DampingKind.SMOOTH_ORDER_M,
        m=int(m),
        delta=float(delta),
        amplitude=float(amplitude),
        floor=wing_value,
    )
    return _check_admissible(profile)


def constant_damping(mesh: GridMesh, value: float) -> DampingProfile:
    """Uniform damping ``a = value`` (value 0 gives the undamped reference)."""
    if value < 0:
        raise DampingError(f"Constant damping must be nonnegative, got {value}")
    return DampingProfile(
        mesh=mesh,
        values=np.full(mesh.n_interior, float(value)),
        kind=DampingKind.CONSTANT,
        amplitude=float(value),
        floor=float(value),
    )


def lemma31_constant(profile: DampingProfile, n: int) -> float:
    """
    Empirical ``C_{n,m}`` in ``|a^(n)(x)| <= C a(x)^((m-n)/m)``.

    The supremum is taken over the rectangle nodes where a > 0, with a and its
    derivative evaluated from the closed-form monomial, never by differencing.
    """
    profile._require_smooth()
    m = profile.m
    if n >= m:
        raise RegimeError(f"Derivative order n={n} must be below m={m}")
    if n < 1:
        raise RegimeError(f"Derivative order must be >= 1, got {n}")

    mesh = profile.mesh
    Lx = mesh.spec.Lx
    xr = np.unique(np.round(_relative_x(mesh) / mesh.hx)) * mesh.hx
    xr = xr[(xr >= 0) & (xr <= Lx)]
    a = profile.rectangle_formula(xr)
    damped = a > 0
    if not damped.any():
        raise DampingError(f"No rectangle node resolves the damped layer of width {profile.delta}")
    ratio = np.abs(profile.rectangle_derivative(xr[damped], n)) / a[damped] ** ((m - n) / m)
    return float(ratio.max())


def x_minorant(profile: DampingProfile) -> Tuple[np.ndarray, np.ndarray]:
    """
    Discrete ``inf_y a(x, y)`` over the rectangle's interior columns.

    Returns:
        (x, a_x) on ``mesh.rectangle_x``
    """
    mesh = profile.mesh
    nx, ny = mesh.rectangle_counts
    col = np.rint((mesh.xs - mesh.spec.x0) / mesh.hx).astype(np.int64)
    in_rect = (col >= 1) & (col <= nx - 1)
    a_x = np.full(nx - 1, np.inf)
    np.minimum.at(a_x, col[in_rect] - 1, profile.values[in_rect])
    return mesh.rectangle_x, a_x
