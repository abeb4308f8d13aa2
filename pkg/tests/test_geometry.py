import math

import numpy as np
import pytest
import scipy.linalg as la

from stadium_decay.exceptions import FieldSizeError, MeshError
from stadium_decay.geometry import (
    DomainSpec,
    Shape,
    apply_laplacian,
    build_mesh,
    build_rectangle,
    build_stadium,
    rectangle_eigenvalue,
    transverse_eigenvalue,
)


def test_rectangle_counts_and_spacing(rect_mesh):
    assert rect_mesh.rectangle_counts == (10, 32)
    assert rect_mesh.hx == pytest.approx(0.1)
    assert rect_mesh.hy == pytest.approx(math.pi / 32)
    assert rect_mesh.h == pytest.approx(0.1)
    assert rect_mesh.n_interior == 9 * 31


def test_spacing_snaps_down_to_exact_divisors():
    mesh = build_rectangle(1.0, math.pi, 0.07)
    nx, ny = mesh.rectangle_counts
    assert mesh.hx <= 0.07 and mesh.hy <= 0.07
    assert nx * mesh.hx == pytest.approx(1.0)
    assert ny * mesh.hy == pytest.approx(math.pi)


def test_x_major_ordering(rect_mesh):
    nx, ny = rect_mesh.rectangle_counts
    grid = rect_mesh.xs.reshape(nx - 1, ny - 1)
    assert np.allclose(grid, grid[:, :1])
    assert np.allclose(grid[:, 0], rect_mesh.rectangle_x)


def test_laplacian_is_symmetric_positive(stadium_mesh):
    lap = stadium_mesh.laplacian
    assert abs(lap - lap.T).max() == 0
    assert np.all(lap.diagonal() > 0)


def test_rectangle_spectrum_matches_closed_form(small_rect):
    nx, ny = small_rect.rectangle_counts
    computed = la.eigvalsh(small_rect.laplacian.toarray())
    expected = sorted(rectangle_eigenvalue(small_rect, n, k) for n in range(1, nx) for k in range(1, ny))
    assert np.allclose(computed, expected, rtol=1e-10)


def test_sine_mode_is_discrete_eigenfunction(rect_mesh):
    u = rect_mesh.sample(lambda x, y: np.sin(2 * np.pi * x) * np.sin(3 * y))
    lam = rectangle_eigenvalue(rect_mesh, 2, 3)
    assert np.allclose(apply_laplacian(rect_mesh, u), lam * u, atol=1e-9 * lam)


def test_transverse_eigenvalue_tends_to_k_squared():
    mesh = build_rectangle(1.0, math.pi, 0.01)
    assert transverse_eigenvalue(mesh, 3) == pytest.approx(9.0, rel=1e-3)
    assert transverse_eigenvalue(mesh, 3) < 9.0


def test_stadium_area_and_extent(stadium_mesh):
    summary = stadium_mesh.summary()
    assert summary["area_exact"] == pytest.approx(1.0 * math.pi + math.pi * (math.pi / 2) ** 2)
    assert summary["area_estimate"] == pytest.approx(summary["area_exact"], rel=0.1)
    assert stadium_mesh.xs.min() < 0 < 1 < stadium_mesh.xs.max()
    assert stadium_mesh.xs.min() > -math.pi / 2
    assert np.all((stadium_mesh.ys > 0) & (stadium_mesh.ys < math.pi))


def test_stadium_wings_are_marked(stadium_mesh):
    mask = stadium_mesh.wing_closure_mask
    xr = stadium_mesh.xs
    assert mask.any()
    assert not mask[(xr > 0.05) & (xr < 0.95)].any()


@pytest.mark.parametrize(
    "builder",
    [
        lambda: build_rectangle(1.0, 1.0, 0.3),
        lambda: build_rectangle(-1.0, 1.0, 0.1),
        lambda: build_stadium(math.pi / 2, 0.4),
        lambda: build_stadium(0.0, 0.1),
    ],
)
def test_coarse_or_degenerate_meshes_are_rejected(builder):
    with pytest.raises(MeshError):
        builder()


def test_stadium_spec_requires_half_height():
    with pytest.raises(MeshError):
        DomainSpec(Shape.STADIUM, Lx=1.0, Ly=2.0, beta=0.5)


def test_build_mesh_dispatch():
    spec = DomainSpec(Shape.RECTANGLE_WITH_WINGS, Lx=1.0, Ly=2.0, beta=0.5)
    mesh = build_mesh(spec, 0.1)
    assert mesh.spec.has_wings
    assert mesh.n_interior > 9 * 19


def test_field_size_is_checked(rect_mesh):
    with pytest.raises(FieldSizeError):
        apply_laplacian(rect_mesh, np.zeros(rect_mesh.n_interior + 1))


def test_norm_and_inner(rect_mesh):
    ones = np.ones(rect_mesh.n_interior)
    assert rect_mesh.norm(ones) == pytest.approx(math.sqrt(rect_mesh.n_interior * rect_mesh.cell_area))
    assert rect_mesh.inner(1j * ones, ones) == pytest.approx(1j * rect_mesh.n_interior * rect_mesh.cell_area)


def test_to_grid_scatters_interior(stadium_mesh):
    grid = stadium_mesh.to_grid(np.arange(stadium_mesh.n_interior, dtype=float))
    assert np.isnan(grid[0, 0])
    assert np.nansum(grid) == pytest.approx(stadium_mesh.n_interior * (stadium_mesh.n_interior - 1) / 2)


def test_laplacian_matches_hand_assembled_three_by_three():
    mesh = build_rectangle(1.0, 1.0, 0.25)
    assert mesh.n_interior == 9
    dense = np.zeros((9, 9))
    for i in range(9):
        for j in range(9):
            gap = math.hypot(mesh.xs[i] - mesh.xs[j], mesh.ys[i] - mesh.ys[j])
            if i == j:
                dense[i, j] = 64.0
            elif gap == pytest.approx(0.25):
                dense[i, j] = -16.0
    np.testing.assert_allclose(mesh.laplacian.toarray(), dense, atol=1e-12)
    u = np.arange(1.0, 10.0)
    np.testing.assert_allclose(apply_laplacian(mesh, u), dense @ u, atol=1e-12)
