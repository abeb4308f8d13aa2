"""
Discretizations of rectangles and partially rectangular planar domains.

A domain is a rectangle ``[x0, x0+Lx] x [0, Ly]`` to which two wings may be
attached on the vertical sides. The horizontal sides of the rectangle always
lie on the domain boundary. Nodes are kept on a uniform lattice and a node
belongs to the domain when its center passes the inclusion test (staircase
boundary). Every operator is stored with the positive sign convention, i.e.
``apply_laplacian`` returns ``-Delta_h u``.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import FieldSizeError, MeshError

logger = logging.getLogger(__name__)

# Tolerance used when h is snapped onto an exact divisor of a length
_DIVISOR_RTOL = 1e-9


class Shape(str, Enum):
    RECTANGLE = "rectangle"
    STADIUM = "stadium"
    RECTANGLE_WITH_WINGS = "rectangle_with_wings"


@dataclass(frozen=True)
class DomainSpec:
    """
    Geometric description of a partially rectangular domain.

    Args:
        shape: Kind of domain
        Lx: x-extent of the rectangle
        Ly: y-extent of the rectangle
        beta: Wing reach in x (stadium half-height when shape is STADIUM)
        x0: Left end of the rectangle
    """

    shape: Shape = Shape.RECTANGLE
    Lx: float = 1.0
    Ly: float = math.pi
    beta: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise MeshError(f"Domain dimensions must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        if self.shape is not Shape.RECTANGLE and self.beta <= 0:
            raise MeshError(f"Wing reach beta must be positive for {self.shape.value}, got {self.beta}")
        if self.shape is Shape.STADIUM and not math.isclose(self.beta, self.Ly / 2, rel_tol=1e-12):
            raise MeshError(f"A stadium needs beta = Ly/2, got beta={self.beta}, Ly={self.Ly}")

    @property
    def has_wings(self) -> bool:
        return self.shape is not Shape.RECTANGLE

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Node-center inclusion test (open in y, closed on the rectangle's vertical sides)."""
        xr = x - self.x0
        inside_y = (y > _DIVISOR_RTOL * self.Ly) & (y < self.Ly * (1 - _DIVISOR_RTOL))
        eps = _DIVISOR_RTOL * self.Lx
        inside = inside_y & (xr >= -eps) & (xr <= self.Lx + eps)
        if self.has_wings:
            # half ellipses of x-reach beta spanning the full height; circles for the stadium
            yc = (y - self.Ly / 2) / (self.Ly / 2)
            left = (xr / self.beta) ** 2 + yc ** 2 < 1.0
            right = ((xr - self.Lx) / self.beta) ** 2 + yc ** 2 < 1.0
            inside |= left | right
        return inside

    def area(self) -> float:
        rect = self.Lx * self.Ly
        if not self.has_wings:
            return rect
        return rect + math.pi * self.beta * (self.Ly / 2)

    def to_dict(self) -> Dict:
        return {
            "shape": self.shape.value,
            "Lx": self.Lx,
            "Ly": self.Ly,
            "beta": self.beta,
            "x0": self.x0,
        }


@dataclass(frozen=True, eq=False)
class GridMesh:
    """
    Masked uniform grid over a DomainSpec.

    Node ``(i, j)`` sits at ``(x[i], y[j])``. Interior nodes are numbered
    x-major (``j`` runs fastest) so that on a rectangle a field reshapes to
    ``(Nx-1, Ny-1)``. The outermost ring of the lattice is always exterior,
    which makes every 5-point neighbor lookup valid (exterior = Dirichlet ghost).
    """

    spec: DomainSpec
    hx: float
    hy: float
    x: np.ndarray
    y: np.ndarray
    interior_mask: np.ndarray
    index_map: np.ndarray

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def h_min(self) -> float:
        return min(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        """Quadrature weight of one node."""
        return self.hx * self.hy

    @cached_property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    @cached_property
    def node_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lattice indices (i, j) of interior nodes in field order."""
        ii, jj = np.nonzero(self.interior_mask)
        order = np.argsort(self.index_map[ii, jj])
        return ii[order], jj[order]

    @cached_property
    def xs(self) -> np.ndarray:
        return self.x[self.node_indices[0]]

    @cached_property
    def ys(self) -> np.ndarray:
        return self.y[self.node_indices[1]]

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Sparse ``-Delta_h`` on interior nodes with homogeneous Dirichlet ghosts."""
        ii, jj = self.node_indices
        n = self.n_interior
        rows = [np.arange(n)]
        cols = [np.arange(n)]
        vals = [np.full(n, 2.0 / self.hx ** 2 + 2.0 / self.hy ** 2)]
        for di, dj, w in ((1, 0, self.hx), (-1, 0, self.hx), (0, 1, self.hy), (0, -1, self.hy)):
            nb = self.index_map[ii + di, jj + dj]
            keep = nb >= 0
            rows.append(np.arange(n)[keep])
            cols.append(nb[keep])
            vals.append(np.full(int(keep.sum()), -1.0 / w ** 2))
        matrix = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        return matrix.tocsr()

    @property
    def is_rectangle(self) -> bool:
        return self.spec.shape is Shape.RECTANGLE

    @cached_property
    def rectangle_counts(self) -> Tuple[int, int]:
        """(Nx, Ny): number of cells across the rectangle part."""
        return int(round(self.spec.Lx / self.hx)), int(round(self.spec.Ly / self.hy))

    @cached_property
    def rectangle_x(self) -> np.ndarray:
        """Interior x-nodes of the rectangle part (Dirichlet ends excluded)."""
        nx, _ = self.rectangle_counts
        return self.spec.x0 + self.hx * np.arange(1, nx)

    @cached_property
    def wing_closure_mask(self) -> np.ndarray:
        """Interior nodes in the closure of the wings (x on or beyond the vertical sides)."""
        xr = self.xs - self.spec.x0
        tol = 1e-9 * self.hx
        return (xr <= tol) | (xr >= self.spec.Lx - tol)

    def check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != (self.n_interior,):
            raise FieldSizeError(
                f"Field of shape {u.shape} does not match mesh with {self.n_interior} interior nodes"
            )
        return u

    def sample(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        """Evaluate ``func(x, y)`` at the interior nodes."""
        values = np.asarray(func(self.xs, self.ys))
        return np.broadcast_to(values, (self.n_interior,)).copy()

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Discrete L2 inner product <u, v> = h^2 sum u conj(v)."""
        return self.cell_area * np.vdot(v, u)

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(self.cell_area) * float(np.linalg.norm(u))

    def to_grid(self, u: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Scatter a field onto the full lattice (exterior filled with ``fill``)."""
        u = self.check_field(u)
        grid = np.full(self.interior_mask.shape, fill, dtype=np.result_type(u, float))
        ii, jj = self.node_indices
        grid[ii, jj] = u
        return grid

    def summary(self) -> Dict:
        """JSON-ready mesh description."""
        return {
            "shape": self.spec.shape.value,
            "Lx": self.spec.Lx,
            "Ly": self.spec.Ly,
            "beta": self.spec.beta,
            "x0": self.spec.x0,
            "h": self.h,
            "hx": self.hx,
            "hy": self.hy,
            "n_interior": self.n_interior,
            "area_estimate": self.n_interior * self.cell_area,
            "area_exact": self.spec.area(),
        }


def _snap_spacing(length: float, h: float) -> Tuple[int, float]:
    """Largest spacing <= h dividing ``length`` exactly."""
    cells = math.ceil(length / h - _DIVISOR_RTOL)
    return cells, length / cells


def _build(spec: DomainSpec, h: float) -> GridMesh:
    nx, hx = _snap_spacing(spec.Lx, h)
    ny, hy = _snap_spacing(spec.Ly, h)
    pad = math.ceil(spec.beta / hx) + 1 if spec.has_wings else 0
    i_range = np.arange(-pad, nx + pad + 1)
    x = spec.x0 + hx * i_range
    y = hy * np.arange(0, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    mask = spec.contains(X, Y)
    # the outer ring must stay exterior for ghost lookups
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False

    index_map = np.full(mask.shape, -1, dtype=np.int64)
    index_map[mask] = np.arange(int(mask.sum()))

    mesh = GridMesh(spec=spec, hx=hx, hy=hy, x=x, y=y, interior_mask=mask, index_map=index_map)
    logger.debug(
        "Built %s mesh: hx=%.5g hy=%.5g n_interior=%d", spec.shape.value, hx, hy, mesh.n_interior
    )
    return mesh


def build_rectangle(Lx: float, Ly: float, h: float, x0: float = 0.0) -> GridMesh:
    """
    Mesh the open rectangle ``(x0, x0+Lx) x (0, Ly)`` with Dirichlet data on all sides.

    Args:
        Lx: x-extent
        Ly: y-extent
        h: Requested spacing; adjusted downward to exact divisors of Lx and Ly
        x0: Left end of the rectangle

    Returns:
        GridMesh with ``(Nx-1)(Ny-1)`` interior nodes
    """
    if Lx <= 0 or Ly <= 0:
        raise MeshError(f"Rectangle dimensions must be positive, got Lx={Lx}, Ly={Ly}")
    if h <= 0 or h > min(Lx, Ly) / 4:
        raise MeshError(f"Spacing h={h} is too coarse for a {Lx} x {Ly} rectangle")
    return _build(DomainSpec(Shape.RECTANGLE, Lx=Lx, Ly=Ly, x0=x0), h)


def build_stadium(beta: float, h: float) -> GridMesh:
    """
    Mesh the Bunimovich stadium: ``[0,1] x [0, 2 beta]`` plus two half discs of radius beta.

    The curved boundary is a staircase obtained from node-center inclusion;
    the straight top and bottom edges are Dirichlet-exact.
    """
    if beta <= 0:
        raise MeshError(f"Stadium half-height must be positive, got beta={beta}")
    if h <= 0 or h >= beta / 4:
        raise MeshError(f"Spacing h={h} is too coarse for beta={beta} (need h < beta/4)")
    return _build(DomainSpec(Shape.STADIUM, Lx=1.0, Ly=2 * beta, beta=beta), h)


def build_winged_rectangle(Lx: float, Ly: float, wing: float, h: float) -> GridMesh:
    """Rectangle with half-elliptic wings of x-reach ``wing`` on both vertical sides."""
    if h <= 0 or h >= min(Lx, Ly, wing) / 4:
        raise MeshError(f"Spacing h={h} is too coarse for Lx={Lx}, Ly={Ly}, wing={wing}")
    return _build(DomainSpec(Shape.RECTANGLE_WITH_WINGS, Lx=Lx, Ly=Ly, beta=wing), h)


def build_mesh(spec: DomainSpec, h: float) -> GridMesh:
    """Dispatch on ``spec.shape``."""
    if spec.shape is Shape.RECTANGLE:
        return build_rectangle(spec.Lx, spec.Ly, h, x0=spec.x0)
    if spec.shape is Shape.STADIUM:
        return build_stadium(spec.beta, h)
    return build_winged_rectangle(spec.Lx, spec.Ly, spec.beta, h)


def apply_laplacian(mesh: GridMesh, u: np.ndarray) -> np.ndarray:
    """Return ``-Delta_h u`` (5-point stencil, ghost values 0)."""
    u = mesh.check_field(u)
    return mesh.laplacian @ u


def rectangle_eigenvalue(mesh: GridMesh, n: int, k: int, Lx: Optional[float] = None) -> float:
    """Discrete Dirichlet eigenvalue of ``-Delta_h`` for the sine mode (n, k) of a rectangle."""
    Lx = mesh.spec.Lx if Lx is None else Lx
    mu_x = (2.0 / mesh.hx * math.sin(n * math.pi * mesh.hx / (2 * Lx))) ** 2
    return mu_x + transverse_eigenvalue(mesh, k)


def transverse_eigenvalue(mesh: GridMesh, k: int) -> float:
    """Discrete counterpart of ``(k pi / Ly)^2`` for the y-direction."""
    return (2.0 / mesh.hy * math.sin(k * math.pi * mesh.hy / (2 * mesh.spec.Ly))) ** 2
