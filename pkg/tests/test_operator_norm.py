import numpy as np
import pytest

from stadium_decay.exceptions import ConvergenceError
from stadium_decay.operator_norm import power_norm, random_start


def _diagonal(d):
    d = np.asarray(d, dtype=complex)
    return (lambda x: d * x), (lambda y: np.conj(d) * y)


def test_diagonal_norm():
    apply, adjoint = _diagonal([1.0, 2.0, 5.0j, 3.0])
    result = power_norm(apply, adjoint, size=4)
    assert result.norm == pytest.approx(5.0, rel=1e-5)
    assert result.iterations > 1


def test_weighted_inner_product():
    weights = np.array([4.0, 1.0, 1.0])
    d = np.array([1.0, 3.0, 2.0])

    def inner(u, v):
        return np.vdot(v, weights * u)

    # diagonal operators are self-adjoint in any diagonal weighting
    result = power_norm(lambda x: d * x, lambda y: d * y, size=3, inner=inner)
    assert result.norm == pytest.approx(3.0, rel=1e-5)


def test_matches_dense_two_norm(rng):
    u, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    v, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    sigma = np.linspace(1.0, 4.0, 12)
    matrix = u @ np.diag(sigma) @ v.T
    result = power_norm(lambda x: matrix @ x, lambda y: matrix.conj().T @ y, size=12, tol=1e-10)
    assert result.norm == pytest.approx(4.0, rel=1e-6)


def test_zero_operator():
    result = power_norm(lambda x: 0 * x, lambda y: 0 * y, size=5)
    assert result.norm == 0.0


def test_seed_is_deterministic():
    assert np.array_equal(random_start(8, 7), random_start(8, 7))
    apply, adjoint = _diagonal([1.0, 2.0, 3.0])
    first = power_norm(apply, adjoint, size=3, seed=11)
    second = power_norm(apply, adjoint, size=3, seed=11)
    assert first.norm == second.norm
    assert first.iterations == second.iterations


def test_non_convergence_raises():
    apply, adjoint = _diagonal([1.0, 0.999])
    with pytest.raises(ConvergenceError) as info:
        power_norm(apply, adjoint, size=2, tol=1e-14, max_iter=3)
    assert info.value.iterations == 3


def test_needs_size_or_start():
    apply, adjoint = _diagonal([1.0])
    with pytest.raises(ValueError):
        power_norm(apply, adjoint)
