import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nntuck.tensor import (fold, frontal_slice, kl_divergence, mode_product,
                           poisson_log_likelihood, unfold)


@pytest.fixture
def t8():
    # t[i, j, k] = 4i + 2j + k
    return np.arange(8, dtype=float).reshape(2, 2, 2)


def brute_unfold(t, mode):
    """Columns are mode-n fibers, remaining indices ordered lowest-first."""
    dims = t.shape
    n = mode - 1
    others = [d for d in range(3) if d != n]
    cols = []
    for b in range(dims[others[1]]):
        for a in range(dims[others[0]]):
            idx = [None] * 3
            idx[others[0]], idx[others[1]] = a, b
            cols.append([t[tuple(idx[:n] + [x] + idx[n + 1:])] for x in range(dims[n])])
    return np.array(cols).T


small_tensors = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-10, 10))
)


def test_frontal_slice(t8):
    np.testing.assert_array_equal(frontal_slice(t8, 0), [[0, 2], [4, 6]])
    np.testing.assert_array_equal(frontal_slice(np.ones((3, 3, 4)), 2), np.ones((3, 3)))
    with pytest.raises(IndexError):
        frontal_slice(t8, 2)


def test_unfold_mode1_columns_are_column_fibers(t8):
    expected = np.array([[0, 2, 1, 3], [4, 6, 5, 7]], dtype=float)
    np.testing.assert_array_equal(brute_unfold(t8, 1), expected)
    np.testing.assert_array_equal(unfold(t8, 1), expected)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_unfold_matches_definition(mode):
    t = np.random.default_rng(mode).random((3, 4, 5))
    np.testing.assert_array_equal(unfold(t, mode), brute_unfold(t, mode))


def test_unfold_shapes():
    t = np.zeros((6, 6, 3))
    assert unfold(t, 3).shape == (3, 36)
    assert unfold(t, 1).shape == (6, 18)
    with pytest.raises(ValueError):
        unfold(t, 4)


@settings(max_examples=50, deadline=None)
@given(small_tensors, st.sampled_from([1, 2, 3]))
def test_fold_unfold_round_trip(t, mode):
    np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)


def test_fold_zeros_and_shape_errors():
    np.testing.assert_array_equal(fold(np.zeros((2, 4)), 1, (2, 2, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        fold(np.zeros((3, 3)), 1, (2, 2, 2))


def test_mode_product_examples(t8):
    np.testing.assert_array_equal(mode_product(t8, np.array([[1.0, 1.0]]), 3)[:, :, 0],
                                  [[1, 5], [9, 13]])
    for mode in (1, 2, 3):
        np.testing.assert_array_equal(mode_product(t8, np.eye(2), mode), t8)
    with pytest.raises(ValueError):
        mode_product(t8, np.ones((2, 3)), 1)


def test_mode_product_elementwise_definition():
    rng = np.random.default_rng(0)
    t, b = rng.random((3, 4, 2)), rng.random((5, 3))
    out = mode_product(t, b, 1)
    for i, j, k in np.ndindex(out.shape):
        assert out[i, j, k] == pytest.approx(sum(t[h, j, k] * b[i, h] for h in range(3)))


def test_mode_product_unfolding_identity():
    rng = np.random.default_rng(1)
    t, b = rng.random((3, 4, 5)), rng.random((2, 4))
    np.testing.assert_allclose(unfold(mode_product(t, b, 2), 2), b @ unfold(t, 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distinct_mode_products_commute(seed):
    rng = np.random.default_rng(seed)
    t, a, b = rng.random((3, 4, 5)), rng.random((2, 3)), rng.random((6, 4))
    lhs = mode_product(mode_product(t, a, 1), b, 2)
    rhs = mode_product(mode_product(t, b, 2), a, 1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_kl_examples():
    a = np.array([[[2.0]]])
    assert kl_divergence(a, np.array([[[1.0]]])) == pytest.approx(2 * math.log(2) - 1, abs=1e-12)
    assert kl_divergence(a, np.array([[[1.0]]])) == pytest.approx(0.386294, abs=1e-6)
    x = np.random.default_rng(2).random((3, 3, 2)) + 0.1
    assert kl_divergence(x, x) == 0.0
    assert kl_divergence(x, 2 * x, np.zeros_like(x)) == 0.0


def test_kl_zero_conventions_and_errors():
    # 0 log 0 = 0, and a positive count against a zero rate is clamped, not inf
    assert kl_divergence(np.zeros((1, 1, 1)), np.ones((1, 1, 1))) == 1.0
    assert math.isfinite(kl_divergence(np.ones((1, 1, 1)), np.zeros((1, 1, 1))))
    with pytest.raises(ValueError):
        kl_divergence(-np.ones((1, 1, 1)), np.ones((1, 1, 1)))
    with pytest.raises(ValueError):
        kl_divergence(np.ones((1, 1, 2)), np.ones((1, 1, 1)))


def test_log_likelihood_examples():
    assert poisson_log_likelihood(np.zeros((1, 1, 1)), np.ones((1, 1, 1))) == -1.0
    assert poisson_log_likelihood(np.full((1, 1, 1), 2.0), np.ones((1, 1, 1))) == -1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_kl_loglik_identity_and_nonnegativity(seed, masked):
    rng = np.random.default_rng(seed)
    a = rng.poisson(2.0, (4, 4, 3)).astype(float)
    ahat = rng.random((4, 4, 3)) * 3 + 0.01
    mask = (rng.random(a.shape) < 0.6).astype(float) if masked else None
    kl = kl_divergence(a, ahat, mask)
    ll = poisson_log_likelihood(a, ahat, mask)
    keep = np.ones_like(a, dtype=bool) if mask is None else mask == 1
    obs = a[keep]
    const = float(np.sum(np.where(obs > 0, obs * np.log(np.where(obs > 0, obs, 1)), 0) - obs))
    assert kl + ll == pytest.approx(const, rel=1e-10, abs=1e-10)
    assert kl >= 0
    assert kl_divergence(a + 0.5, a + 0.5, mask) == pytest.approx(0.0, abs=1e-12)
    assert kl_divergence(a + 0.5, a + 0.6, mask) > 0 or not keep.any()
