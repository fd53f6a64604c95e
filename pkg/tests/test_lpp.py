import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from qpush.lpp import (
    CylinderEnvironment,
    cylinder_lpp,
    cylinder_samples,
    diagonal_decomposition_bound,
    lower_tail_threshold,
    rsk_shape,
    sample_cylinder,
    sample_square,
    square_lpp,
    square_lpp_samples,
    truncation_depth,
    uniform_lower_tail_check,
)
from qpush.sampling import RngStream

small = hnp.arrays(np.int64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=5), elements=st.integers(0, 4))


def _brute_square(w):
    n, m = w.shape
    best = 0
    for moves in set(itertools.permutations("D" * (n - 1) + "R" * (m - 1))):
        i = j = 0
        s = w[0, 0]
        for mv in moves:
            i, j = (i + 1, j) if mv == "D" else (i, j + 1)
            s += w[i, j]
        best = max(best, s)
    return best


def _corner_paths(n):
    out = []
    for moves in set(itertools.permutations("D" * (n - 1) + "R" * (n - 1))):
        i = j = 0
        cells = [(0, 0)]
        for mv in moves:
            i, j = (i + 1, j) if mv == "D" else (i, j + 1)
            cells.append((i, j))
        out.append(frozenset(cells))
    return out


def _lifted_lpp(env: CylinderEnvironment) -> int:
    """Point-to-region LPP by a plain DP on the explicitly lifted grid."""
    K, N, T = env.K, env.N, env.T
    H, W = (K + 1) * N, (K + 1) * T
    g = np.zeros((H, W), dtype=np.int64)
    for x in range(H):
        for y in range(W):
            k = x // N + y // T
            if k <= K:
                g[x, y] = env.copies[k, x % N, y % T]
    dp = np.zeros_like(g)
    for x in range(H):
        for y in range(W):
            prev = max(dp[x - 1, y] if x else 0, dp[x, y - 1] if y else 0)
            dp[x, y] = prev + g[x, y]
    return int(dp.max())


def _env(copies, q=0.5, u=0.5):
    copies = np.asarray(copies, dtype=np.int64)
    return CylinderEnvironment(copies.shape[1], copies.shape[2], copies, u, q, 0.0)


class TestSquare:
    def test_examples(self):
        assert square_lpp([[5]]) == 5
        assert square_lpp(np.zeros((4, 4), dtype=int)) == 0
        assert square_lpp([[1, 2], [3, 4]]) == 8

    @given(w=small)
    @settings(max_examples=60, deadline=None)
    def test_against_path_enumeration(self, w):
        assert square_lpp(w) == _brute_square(w)

    def test_sample_square(self):
        env = sample_square(200, 0.4, RngStream(1))
        assert env.weights.mean() == pytest.approx(0.4 / 0.6, rel=0.02)
        assert sample_square(3, 0.0, RngStream(1)).weights.sum() == 0
        assert np.array_equal(sample_square(5, 0.4, RngStream(2)).weights, sample_square(5, 0.4, RngStream(2)).weights)

    def test_fused_batch_matches_plain(self):
        vals = square_lpp_samples(6, 0.5, 20, seed=3)
        unif = RngStream(3, 0).uniform((20, 6, 6))
        w = np.floor(np.log(unif) / np.log(0.5)).astype(np.int64)
        assert vals.tolist() == [square_lpp(x) for x in w]


class TestRSK:
    def test_zero_matrix(self):
        assert rsk_shape(np.zeros((3, 3), dtype=int)) == ()

    def test_first_row_is_lpp(self):
        rng = RngStream(5)
        for _ in range(2000):
            n, m = rng.generator.integers(1, 6, size=2)
            w = rng.generator.integers(0, 3, size=(n, m))
            shape = rsk_shape(w)
            assert (shape[0] if shape else 0) == square_lpp(w)
            assert sum(shape) == w.sum()

    def test_two_rows_are_two_path_maximum(self):
        paths = _corner_paths(3)
        rng = RngStream(6)
        for _ in range(300):
            w = rng.generator.integers(0, 3, size=(3, 3))
            best = max(sum(w[c] for c in a | b) for a, b in itertools.combinations_with_replacement(paths, 2))
            shape = rsk_shape(w) + (0, 0)
            assert shape[0] + shape[1] == best

    @given(w=small)
    @settings(max_examples=40, deadline=None)
    def test_shape_is_partition(self, w):
        s = rsk_shape(w)
        assert all(a >= b for a, b in zip(s, s[1:]))


class TestCylinder:
    def test_truncation_depth(self):
        K = truncation_depth(4, 4, 0.5, 0.5, 1e-9)
        assert 16 * 0.25 * 0.5 ** (K + 1) / 0.5 < 1e-9
        assert 16 * 0.25 * 0.5**K / 0.5 >= 1e-9
        assert truncation_depth(4, 4, 0.5, 0.9) > truncation_depth(4, 4, 0.5, 0.5)
        with pytest.raises(ValueError):
            truncation_depth(4, 4, 0.5, 0.5, 0.0)

    def test_u_zero_is_empty(self):
        env = sample_cylinder(3, 3, 0.0, 0.5, 1e-9, RngStream(1))
        assert env.copies.sum() == 0 and cylinder_lpp(env) == 0
        assert diagonal_decomposition_bound(env) == (0, 0)

    def test_first_copy_rate(self):
        u, q = 0.6, 0.5
        env_rng = RngStream(7)
        copies = np.stack([sample_cylinder(10, 10, u, q, 1e-9, env_rng.spawn(i)).copies[1] for i in range(10000)])
        assert np.count_nonzero(copies) / copies.size == pytest.approx(u * u * q, rel=0.01)

    def test_single_nonzero_cell(self):
        copies = np.zeros((3, 2, 2), dtype=np.int64)
        copies[1, 1, 0] = 7
        assert cylinder_lpp(_env(copies)) == 7

    def test_one_by_one_threads_every_copy(self):
        copies = np.array([3, 0, 2, 5, 1]).reshape(5, 1, 1)
        assert cylinder_lpp(_env(copies)) == 11
        assert diagonal_decomposition_bound(_env(copies)) == (3 + 2 + 1, 11)

    @given(seed=st.integers(0, 2**32), N=st.integers(1, 4), T=st.integers(1, 4))
    @settings(max_examples=40, deadline=None)
    def test_against_lifted_grid(self, seed, N, T):
        env = sample_cylinder(N, T, 0.8, 0.6, 1e-6, RngStream(seed))
        assert cylinder_lpp(env) == _lifted_lpp(env)

    def test_decomposition_lower_bound(self):
        L, low = cylinder_samples(8, 8, 0.5, 0.6, 10**5, seed=11, with_lower=True)
        assert np.all(low <= L)

    def test_batched_matches_single(self):
        L = cylinder_samples(3, 4, 0.5, 0.5, 5, seed=2, chunk=5)
        K = truncation_depth(3, 4, 0.5, 0.5, 1e-9)
        unif = RngStream(2, 0).uniform((5, K + 1, 3, 4))
        z = 0.25 * 0.5 ** np.arange(K + 1)
        batch = np.floor(np.log(unif) / np.log(z).reshape(K + 1, 1, 1)).astype(np.int64)
        assert L.tolist() == [_lifted_lpp(_env(b)) for b in batch]


class TestLowerTail:
    def test_threshold(self):
        # the centre 2 sqrt(q) / (1 - sqrt(q)) N equals 2N at q = 1/4
        assert lower_tail_threshold(8, 0.25, 0.0) == pytest.approx(16.0)
        assert lower_tail_threshold(8, 0.25, 1.0) == pytest.approx(16.0 - 0.25 ** (1 / 6) / 0.75 * 2)

    def test_small_run(self):
        rep = uniform_lower_tail_check(32, 0.5, [0.0, 0.5, 1.0, 2.0], 4000, seed=1)
        assert 0 < rep.estimates[0] < 1
        assert rep.monotone
        assert rep.positive_constant
