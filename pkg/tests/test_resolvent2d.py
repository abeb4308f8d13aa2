import math
import warnings

import numpy as np
import pytest

from stadium_decay import resolvent2d
from stadium_decay.damping import build_smooth_m_damping, build_wing_damping, constant_damping
from stadium_decay.exceptions import MeshError, RegimeError, ResolutionWarning, SolverError
from stadium_decay.geometry import rectangle_eigenvalue
from stadium_decay.resolvent2d import (
    HelmholtzSystem,
    apply_generator_resolvent,
    generator_resolvent_norm,
    generator_sweep,
    h10_bound_slack,
    h_norm,
    imaginary_identity_defect,
    rectangle_estimate_ratio,
    resolvent_norm,
    solve_helmholtz,
    sweep_and_fit,
)
from stadium_decay.spectrum import assemble_generator, dense_resolvent_norm


def _complex_field(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.fixture
def coarse_wing(coarse_stadium):
    return build_wing_damping(coarse_stadium, (0.15, 0.85), 1.0)


def test_solve_satisfies_equation(stadium_mesh, wing_damping, rng):
    f = _complex_field(rng, stadium_mesh.n_interior)
    system = HelmholtzSystem(stadium_mesh, wing_damping, 5.0)
    u = solve_helmholtz(stadium_mesh, wing_damping, 5.0, f, system=system)
    assert system.relative_residual(u, f) < 1e-9


def test_zero_source_gives_zero(stadium_mesh, wing_damping):
    u = solve_helmholtz(stadium_mesh, wing_damping, 5.0, np.zeros(stadium_mesh.n_interior))
    assert not np.any(u)


def test_adjoint_solve(stadium_mesh, wing_damping, rng):
    system = HelmholtzSystem(stadium_mesh, wing_damping, 4.0)
    b = _complex_field(rng, stadium_mesh.n_interior)
    w = system.solve_adjoint(b)
    assert np.allclose(system.operator.conj().T @ w, b)


def test_imaginary_identity_and_h10_bound(stadium_mesh, wing_damping, rng):
    for lam in (2.0, 5.0, 9.0):
        f = _complex_field(rng, stadium_mesh.n_interior)
        u = solve_helmholtz(stadium_mesh, wing_damping, lam, f)
        assert imaginary_identity_defect(stadium_mesh, wing_damping, lam, f, u) < 1e-10
        assert h10_bound_slack(stadium_mesh, lam, f, u) >= -1e-12


def test_resolution_warning(stadium_mesh, wing_damping):
    with pytest.warns(ResolutionWarning):
        solve_helmholtz(stadium_mesh, wing_damping, 20.0, np.ones(stadium_mesh.n_interior))


def test_resolved_frequency_does_not_warn(stadium_mesh, wing_damping):
    with warnings.catch_warnings():
        warnings.simplefilter("error", ResolutionWarning)
        solve_helmholtz(stadium_mesh, wing_damping, 5.0, np.ones(stadium_mesh.n_interior))


def test_resolvent_norm_for_constant_damping(small_rect):
    c, lam = 0.5, 3.0
    damping = constant_damping(small_rect, c)
    nx, ny = small_rect.rectangle_counts
    mu = np.array([rectangle_eigenvalue(small_rect, n, k) for n in range(1, nx) for k in range(1, ny)])
    expected = 1.0 / np.min(np.abs(mu + 2j * c * lam - lam ** 2))
    norm, iterations = resolvent_norm(small_rect, damping, lam)
    assert norm == pytest.approx(expected, rel=1e-5)
    assert iterations >= 1


def test_rectangle_estimate_ratio(rect_mesh, rng):
    damping = build_wing_damping(rect_mesh, (0.15, 0.85), 1.0)
    f = _complex_field(rng, rect_mesh.n_interior)
    g = _complex_field(rng, rect_mesh.n_interior)
    ratio = rectangle_estimate_ratio(rect_mesh, damping, 4.0, f, g)
    assert 0 < ratio < np.inf


def test_rectangle_estimate_needs_rectangle(stadium_mesh, wing_damping):
    f = np.ones(stadium_mesh.n_interior)
    with pytest.raises(MeshError):
        rectangle_estimate_ratio(stadium_mesh, wing_damping, 4.0, f, f)


def test_sweep_records_entries_and_fit(small_rect):
    damping = constant_damping(small_rect, 1.0)
    result = sweep_and_fit(small_rect, damping, [1.0, 1.5, 2.0, 2.5], window=(1.0, math.inf), jobs=2)
    frame = result.to_frame()
    assert list(frame.columns) == ["lambda", "norm", "iterations", "residual", "failed", "message"]
    assert list(frame["lambda"]) == [1.0, 1.5, 2.0, 2.5]
    assert not frame["failed"].any()
    assert math.isfinite(result.fitted_exponent)
    assert result.reference_exponent == 1.0
    summary = result.fit_summary()
    assert summary["reference_exponent"] == 1.0
    assert summary["n_points"] == 4


def test_sweep_keeps_failed_entries(small_rect, monkeypatch):
    damping = constant_damping(small_rect, 1.0)
    original = resolvent2d._resolvent_entry

    def flaky(mesh, damping, lam, tol, **kwargs):
        if lam == 2.0:
            raise SolverError("forced failure")
        return original(mesh, damping, lam, tol, **kwargs)

    monkeypatch.setattr(resolvent2d, "_resolvent_entry", flaky)
    result = sweep_and_fit(small_rect, damping, [1.0, 1.5, 2.0, 2.5, 3.0], window=(1.0, math.inf))
    assert [e.lam for e in result.failures] == [2.0]
    assert result.failures[0].message == "forced failure"
    assert result.to_frame()["message"].tolist()[2] == "forced failure"
    assert result.failure_records() == [{"sweep": "resolvent", "lambda": 2.0, "message": "forced failure"}]
    assert result.fit.n_points == 4


def test_sweep_without_enough_points_has_no_fit(small_rect):
    damping = constant_damping(small_rect, 1.0)
    result = sweep_and_fit(small_rect, damping, [1.0, 2.0], window=(1.0, math.inf))
    assert result.fit is None
    assert math.isnan(result.fitted_exponent)


@pytest.mark.parametrize("lambdas", [[0.5, 1.0, 2.0], [2.0, 1.5, 3.0]])
def test_sweep_rejects_bad_frequencies(small_rect, lambdas):
    with pytest.raises(RegimeError):
        sweep_and_fit(small_rect, constant_damping(small_rect, 1.0), lambdas)


def test_block_resolvent_inverts_lam_minus_generator(coarse_stadium, coarse_wing, rng):
    gen = assemble_generator(coarse_stadium, coarse_wing)
    x = _complex_field(rng, gen.dimension)
    for lam in (2.0, 1.0 - 0.5j):
        y = apply_generator_resolvent(HelmholtzSystem(coarse_stadium, coarse_wing, lam), x)
        assert gen.h_norm(lam * y - gen.apply(y) - x) < 1e-8 * gen.h_norm(x)


def test_block_resolvent_adjoint(coarse_stadium, coarse_wing, rng):
    gen = assemble_generator(coarse_stadium, coarse_wing)
    system = HelmholtzSystem(coarse_stadium, coarse_wing, 2.5 - 0.3j)
    x = _complex_field(rng, gen.dimension)
    y = _complex_field(rng, gen.dimension)
    lhs = gen.h_inner(apply_generator_resolvent(system, x), y)
    rhs = gen.h_inner(x, apply_generator_resolvent(system, y, adjoint=True))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_generator_norm_matches_dense_oracle(coarse_stadium, coarse_wing):
    gen = assemble_generator(coarse_stadium, coarse_wing)
    for lam in (2.5, -3.0j):
        expected = dense_resolvent_norm(gen, lam)
        assert generator_resolvent_norm(coarse_stadium, coarse_wing, lam, max_iter=2000) == pytest.approx(expected, rel=1e-3)


def test_generator_norm_in_lower_half_plane(coarse_stadium, coarse_wing):
    for im in (1.0, 2.0, 4.0):
        assert generator_resolvent_norm(coarse_stadium, coarse_wing, -1j * im, max_iter=2000) <= 1.0 / im + 1e-6


def test_h_norm_of_state(rect_mesh, rng):
    state = np.concatenate([np.zeros(rect_mesh.n_interior), np.ones(rect_mesh.n_interior)])
    assert h_norm(rect_mesh, state) == pytest.approx(rect_mesh.norm(np.ones(rect_mesh.n_interior)))


def test_generator_sweep_reference_exponents(coarse_stadium, coarse_wing):
    result = generator_sweep(coarse_stadium, coarse_wing, [1.0, 1.5, 2.0], window=(1.0, math.inf))
    assert result.reference_exponent == 2.0
    assert result.label == "generator"
    assert len(result.entries) == 3
    smooth = build_smooth_m_damping(coarse_stadium, 8, 0.3)
    assert generator_sweep(coarse_stadium, smooth, [1.0, 1.5, 2.0]).reference_exponent == pytest.approx(1.5)


def test_resolvent_norm_near_first_eigenvalue(rect_mesh):
    damping = constant_damping(rect_mesh, 1e-3)
    norm, _ = resolvent_norm(rect_mesh, damping, 0.5)
    assert norm == pytest.approx(1.0 / (math.pi ** 2 + 1 - 0.25), rel=0.02)


def test_threaded_sweep_matches_serial(small_rect):
    damping = constant_damping(small_rect, 1.0)
    lambdas = [1.0, 1.5, 2.0, 2.5, 3.0]
    serial = sweep_and_fit(small_rect, damping, lambdas, window=(1.0, math.inf), jobs=1)
    threaded = sweep_and_fit(small_rect, damping, lambdas, window=(1.0, math.inf), jobs=3)
    assert serial.to_frame().equals(threaded.to_frame())
    assert serial.fitted_exponent == threaded.fitted_exponent
