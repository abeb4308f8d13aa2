import math

import numpy as np
import pytest

from stadium_decay.damping import (
    DampingKind,
    build_smooth_m_damping,
    build_wing_damping,
    constant_damping,
    lemma31_constant,
    x_minorant,
)
from stadium_decay.exceptions import DampingError, RegimeError
from stadium_decay.geometry import build_rectangle


@pytest.fixture
def fine_rect():
    return build_rectangle(1.0, 1.0, 0.02)


def test_wing_damping_shape(wing_damping):
    mesh = wing_damping.mesh
    xr = mesh.xs
    a = wing_damping.values
    assert np.all(a[(xr >= 0.15) & (xr <= 0.85)] == 0)
    assert np.allclose(a[xr <= 0], 1.0)
    assert np.allclose(a[xr >= 1.0], 1.0)
    assert wing_damping.a_max == pytest.approx(1.0)
    assert wing_damping.wing_floor == pytest.approx(1.0)
    left = (xr > 0) & (xr < 0.15)
    assert np.allclose(a[left], (0.15 - xr[left]) / 0.15)


def test_wing_damping_is_y_independent_on_rectangle(wing_damping):
    x, a_x = x_minorant(wing_damping)
    assert np.allclose(a_x, np.clip(np.maximum((0.15 - x) / 0.15, (x - 0.85) / 0.15), 0, 1))


@pytest.mark.parametrize(
    "strip, floor",
    [((0.5, 0.4), 1.0), ((0.0, 0.8), 1.0), ((0.2, 1.0), 1.0), ((0.2, 0.8), 0.0)],
)
def test_wing_damping_rejects_bad_parameters(stadium_mesh, strip, floor):
    with pytest.raises(DampingError):
        build_wing_damping(stadium_mesh, strip, floor)


def test_smooth_damping_vanishes_in_the_middle(fine_rect):
    profile = build_smooth_m_damping(fine_rect, 4, 0.1)
    xr = fine_rect.xs
    assert np.all(profile.values[(xr >= 0.1) & (xr <= 0.9)] == 0)
    assert np.all(profile.values[xr < 0.1 - 1e-12] > 0)
    assert profile.kind is DampingKind.SMOOTH_ORDER_M


@pytest.mark.parametrize("m, delta", [(3, 0.1), (4.5, 0.1), (4, 0.0), (4, 0.5)])
def test_smooth_damping_rejects_bad_parameters(fine_rect, m, delta):
    with pytest.raises(DampingError):
        build_smooth_m_damping(fine_rect, m, delta)


@pytest.mark.parametrize("m", [4, 6, 8])
def test_first_derivative_constant_equals_order(fine_rect, m):
    profile = build_smooth_m_damping(fine_rect, m, 0.1, amplitude=0.1 ** m)
    assert lemma31_constant(profile, 1) == pytest.approx(m, rel=1e-10)


@pytest.mark.parametrize("m", [4, 6, 8])
def test_higher_derivative_constants_are_falling_factorials(fine_rect, m):
    profile = build_smooth_m_damping(fine_rect, m, 0.1, amplitude=0.1 ** m)
    for n in range(1, m):
        assert lemma31_constant(profile, n) == pytest.approx(math.perm(m, n), rel=1e-9)


def test_lemma31_constant_regime(fine_rect):
    profile = build_smooth_m_damping(fine_rect, 4, 0.1)
    with pytest.raises(RegimeError):
        lemma31_constant(profile, 4)
    with pytest.raises(RegimeError):
        lemma31_constant(profile, 0)


def test_lemma31_constant_needs_order_m_profile(wing_damping):
    with pytest.raises(DampingError):
        lemma31_constant(wing_damping, 1)


def test_analytic_derivative_matches_finite_difference(fine_rect):
    profile = build_smooth_m_damping(fine_rect, 6, 0.1, amplitude=2.0)
    x = np.array([0.03, 0.05, 0.93])
    step = 1e-6
    numeric = (profile.rectangle_formula(x + step) - profile.rectangle_formula(x - step)) / (2 * step)
    assert np.allclose(profile.rectangle_derivative(x, 1), numeric, rtol=1e-6)


def test_one_sided_derivative_signs(fine_rect):
    for m in (4, 5, 6):
        assert build_smooth_m_damping(fine_rect, m, 0.1).one_sided_derivative_signs() == (True, True)


def test_constant_damping(rect_mesh):
    profile = constant_damping(rect_mesh, 0.5)
    assert np.all(profile.values == 0.5)
    assert constant_damping(rect_mesh, 0.0).a_max == 0.0
    with pytest.raises(DampingError):
        constant_damping(rect_mesh, -1.0)


def test_metadata_round_trip_keys(wing_damping):
    meta = wing_damping.metadata()
    assert meta["kind"] == "wing_continuous"
    assert meta["strip"] == [0.15, 0.85]
    frame = wing_damping.to_frame()
    assert list(frame.columns) == ["x", "y", "a"]
    assert len(frame) == wing_damping.mesh.n_interior
