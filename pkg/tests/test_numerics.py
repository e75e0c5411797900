import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian_pd
from wltransceiver.numerics import (NotPositiveDefinite, backward_identity,
                                    hermitian_solve, is_hermitian,
                                    top_eigenpair)


def cubic_roots_hermitian(a):
    """Eigenvalues of a 3x3 Hermitian matrix by the trigonometric
    solution of its characteristic cubic."""
    p1 = abs(a[0, 1]) ** 2 + abs(a[0, 2]) ** 2 + abs(a[1, 2]) ** 2
    q = np.trace(a).real / 3
    p2 = sum((a[i, i].real - q) ** 2 for i in range(3)) + 2 * p1
    p = np.sqrt(p2 / 6)
    b = (a - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(b).real / 2, -1, 1)
    phi = np.arccos(r) / 3
    e1 = q + 2 * p * np.cos(phi)
    e3 = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    return np.sort([e1, 3 * q - e1 - e3, e3])


class TestHermitianSolve:

    @given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
    def test_matches_dense_solve(self, n, seed):
        rng = np.random.default_rng(seed)
        a = random_hermitian_pd(rng, n, cond=1e3)
        b = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        x = hermitian_solve(a, b)
        np.testing.assert_allclose(a @ x, b, atol=1e-10)

    def test_vector_rhs_shape(self, rng):
        a = random_hermitian_pd(rng, 4)
        b = rng.standard_normal(4) + 0j
        assert hermitian_solve(a, b).shape == (4,)

    def test_indefinite_raises(self):
        a = np.diag([1.0, -1.0]).astype(complex)
        with pytest.raises(NotPositiveDefinite):
            hermitian_solve(a, np.ones(2))

    def test_is_linalg_error(self):
        # callers catching the numpy error type still see it
        with pytest.raises(np.linalg.LinAlgError):
            hermitian_solve(np.zeros((2, 2)), np.ones(2))

    def test_empty(self):
        out = hermitian_solve(np.zeros((0, 0)), np.zeros(0))
        assert out.shape == (0,)


class TestTopEigenpair:

    @given(st.integers(0, 2 ** 32 - 1))
    def test_cubic_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = random_hermitian_pd(rng, 3, cond=50.0)
        lam, v = top_eigenpair(a)
        ref = cubic_roots_hermitian(a)
        assert lam == pytest.approx(ref[-1], rel=1e-10)
        np.testing.assert_allclose(a @ v, lam * v, atol=1e-9)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_phase_convention(self, rng):
        a = random_hermitian_pd(rng, 5)
        lam, v = top_eigenpair(a)
        i = np.argmax(np.abs(v))
        assert abs(v[i].imag) < 1e-14 and v[i].real > 0
        # the convention fixes the vector up to rounding for any input phase
        u = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
        b = (u[:, None] * a) * u.conj()[None, :]
        _, w = top_eigenpair(b)
        np.testing.assert_allclose(np.abs(w), np.abs(v), atol=1e-12)

    def test_scalar(self):
        lam, v = top_eigenpair(np.array([[2.5]]))
        assert lam == 2.5 and v[0] == 1

    def test_zero_matrix(self):
        lam, v = top_eigenpair(np.zeros((3, 3)))
        assert lam == 0.0
        np.testing.assert_array_equal(v, [1, 0, 0])

    def test_identity_tie(self):
        # repeated eigenvalue: any unit vector is valid, ours is deterministic
        lam, v = top_eigenpair(np.eye(3) * 4.0)
        assert lam == pytest.approx(4.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)


def test_backward_identity():
    J = backward_identity(3)
    np.testing.assert_array_equal(J @ np.arange(3), [2, 1, 0])
    np.testing.assert_array_equal(J @ J, np.eye(3))
    assert backward_identity(0).shape == (0, 0)
    with pytest.raises(ValueError):
        backward_identity(-1)


def test_is_hermitian(rng):
    a = random_hermitian_pd(rng, 4)
    assert is_hermitian(a)
    a[0, 1] += 1e-3
    assert not is_hermitian(a)
    assert not is_hermitian(np.ones((2, 3)))
