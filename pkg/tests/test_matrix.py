"""
Dense kernel tests against loop oracles.
"""

import time

import numpy as np
import pytest

from mmkg_align.core.errors import ShapeError
from mmkg_align.matrix import matmul, max_compose, minmax_scale, row_argmax, row_l2_normalize


def triple_loop_max(a, x, b_t):
    out = np.zeros((a.shape[0], b_t.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b_t.shape[0]):
            best = None
            for s in range(a.shape[1]):
                for t in range(x.shape[1]):
                    v = a[i, s] * (x[s, t] * b_t[j, t])
                    best = v if best is None else max(best, v)
            out[i, j] = 0.0 if best is None else best
    return out


def triple_loop_sum(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            out[i, j] = sum(a[i, k] * b[k, j] for k in range(a.shape[1]))
    return out


class TestMatmul:
    def test_identity(self):
        m = np.array([[2.0, 3.0], [4.0, 5.0]])
        assert np.array_equal(matmul(np.eye(2), m), m)

    def test_hand_case(self):
        assert matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]])).tolist() == [[11.0]]

    def test_matches_loop(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
        assert np.allclose(matmul(a, b), triple_loop_sum(a, b), atol=1e-9, rtol=0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestMaxCompose:
    def test_hand_case(self):
        out = max_compose(np.array([[1.0, 1.0]]), np.array([[3.0], [7.0]]), np.array([[1.0]]))
        assert out.tolist() == [[7.0]]

    def test_identity_bridges(self):
        x = np.random.default_rng(2).random((3, 3))
        assert np.array_equal(max_compose(np.eye(3), x, np.eye(3)), x)

    def test_nonnegative_matches_loop_exactly(self):
        rng = np.random.default_rng(3)
        a, x, b_t = rng.random((4, 3)), rng.random((3, 2)), rng.random((5, 2))
        assert np.array_equal(max_compose(a, x, b_t), triple_loop_max(a, x, b_t))

    def test_signed_inputs_use_full_reduction(self):
        rng = np.random.default_rng(4)
        a, x, b_t = rng.standard_normal((4, 3)), rng.standard_normal((3, 2)), rng.standard_normal((5, 2))
        assert np.array_equal(max_compose(a, x, b_t), triple_loop_max(a, x, b_t))

    def test_binary_bridges_with_signed_cross(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            n_i, n_s, n_t, n_j = rng.integers(1, 7, size=4)
            a = (rng.random((n_i, n_s)) < 0.5).astype(float)
            b_t = (rng.random((n_j, n_t)) < 0.5).astype(float)
            x = rng.standard_normal((n_s, n_t))
            assert np.array_equal(max_compose(a, x, b_t), triple_loop_max(a, x, b_t))

    def test_membership_scale_is_fast(self):
        rng = np.random.default_rng(9)
        n = 500
        a = np.eye(n)[rng.permutation(n)]
        cross = rng.uniform(-1.0, 1.0, size=(n, n))
        start = time.perf_counter()
        out = max_compose(a, cross, np.eye(n))
        assert time.perf_counter() - start < 10
        # off-diagonal zeros of the identity bridge floor every entry at 0
        assert np.array_equal(out, np.maximum(a @ cross, 0.0))

    def test_monotone_in_inputs(self):
        rng = np.random.default_rng(5)
        a, x, b_t = rng.random((3, 3)), rng.random((3, 3)), rng.random((3, 3))
        before = max_compose(a, x, b_t)
        x[1, 2] += 0.5
        assert (max_compose(a, x, b_t) >= before).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            max_compose(np.ones((2, 3)), np.ones((2, 2)), np.ones((2, 2)))


class TestNormalizations:
    def test_row_l2(self):
        assert np.allclose(row_l2_normalize(np.array([[3.0, 4.0]])), [[0.6, 0.8]])

    def test_zero_row_preserved(self):
        assert row_l2_normalize(np.zeros((1, 2))).tolist() == [[0.0, 0.0]]

    def test_row_norms_are_zero_or_one(self):
        m = np.random.default_rng(6).standard_normal((10, 4))
        m[3] = 0.0
        norms = np.linalg.norm(row_l2_normalize(m), axis=1)
        assert np.all(np.isclose(norms, 1.0, atol=1e-12) | (norms == 0.0))

    def test_minmax_hand_case(self):
        assert np.allclose(minmax_scale(np.array([[1.0, 3.0], [2.0, 4.0]])), [[0, 2 / 3], [1 / 3, 1]])

    def test_minmax_constant(self):
        assert minmax_scale(np.full((2, 2), 5.0)).tolist() == [[0.0, 0.0], [0.0, 0.0]]

    def test_minmax_idempotent(self):
        once = minmax_scale(np.random.default_rng(7).standard_normal((6, 6)))
        assert once.min() == 0.0 and once.max() == 1.0
        assert np.allclose(minmax_scale(once), once, atol=1e-12, rtol=0)


class TestRowArgmax:
    def test_direct(self):
        assert row_argmax(np.array([[0.1, 0.9], [0.8, 0.2]])).tolist() == [1, 0]

    def test_tie_takes_smallest_index(self):
        assert row_argmax(np.array([[0.5, 0.5]])).tolist() == [0]

    def test_matches_scan(self):
        m = np.round(np.random.default_rng(8).random((20, 7)), 1)
        expected = [min(j for j in range(7) if m[i, j] == m[i].max()) for i in range(20)]
        assert row_argmax(m).tolist() == expected

    def test_zero_columns(self):
        with pytest.raises(ShapeError):
            row_argmax(np.zeros((2, 0)))
