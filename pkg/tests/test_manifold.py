import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyntex import manifold as mf
from dyntex.errors import DataError, ZeroColumnError

shapes = st.tuples(st.integers(2, 20), st.integers(1, 8)).filter(lambda s: s[1] <= s[0])


def test_ddiag_zeroes_off_diagonal():
    Z = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(mf.ddiag(Z), np.diag([0.0, 4.0, 8.0]))
    with pytest.raises(ValueError):
        mf.ddiag(np.ones((2, 3)))


def test_projection_with_identity_columns():
    D = np.eye(3)[:, :2]
    H = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    expected = np.array([[0.0, 2.0], [3.0, 0.0], [5.0, 6.0]])
    np.testing.assert_array_equal(mf.project_tangent(D, H), expected)


@settings(max_examples=50, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**32 - 1))
def test_projection_is_tangent_and_idempotent(shape, seed):
    rng = np.random.default_rng(seed)
    D = mf.random_oblique(*shape, rng)
    H = rng.standard_normal(shape)
    P = mf.project_tangent(D, H)
    assert np.abs(np.diag(P.T @ D)).max() <= 1e-12
    np.testing.assert_allclose(mf.project_tangent(D, P), P, atol=1e-13)
    # orthogonal projection: the residual is normal to every tangent vector
    T = mf.random_tangent(D, rng)
    assert abs(mf.inner(H - P, T)) <= 1e-10 * (1 + np.abs(H).sum() * np.abs(T).sum())


@settings(max_examples=50, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**32 - 1), t=st.floats(-5, 5))
def test_retraction_stays_on_manifold(shape, seed, t):
    rng = np.random.default_rng(seed)
    D = mf.random_oblique(*shape, rng)
    H = mf.random_tangent(D, rng)
    R = mf.retract(D, H, t)
    np.testing.assert_allclose(np.linalg.norm(R, axis=0), 1.0, atol=1e-12)


def test_retraction_first_order(rng):
    D = mf.random_oblique(10, 4, rng)
    H = mf.random_tangent(D, rng)
    t = 1e-6
    np.testing.assert_allclose((mf.retract(D, H, t) - D) / t, H, atol=1e-5)
    R0 = mf.retract(D, H, 0.0)
    np.testing.assert_array_equal(R0, D)
    assert R0 is not D


def test_zero_column_detected():
    D = np.eye(2)
    with pytest.raises(ZeroColumnError):
        mf.retract(D, np.array([[-1.0, 0.0], [0.0, 0.0]]), 1.0)


def test_membership_checks():
    D = np.eye(3)[:, :2]
    assert mf.check_oblique(D) is not None
    with pytest.raises(DataError):
        mf.check_oblique(2 * D)
    with pytest.raises(DataError):
        mf.check_oblique(np.ones((2, 3)) / np.sqrt(2))
    mf.check_oblique(np.ones((2, 3)) / np.sqrt(2), allow_overcomplete=True)
    assert mf.is_tangent(D, np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 3.0]]))
    assert not mf.is_tangent(D, np.ones((3, 2)))
