from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpush import meixner as mx
from qpush.moment_bounds import (
    crude_upper_tail,
    exact_nu_density,
    factorial_asymptotics,
    lemma_checks,
    lower_lemma,
    polynomial_moment_bounds,
    tail_lower_bound,
    upper_lemma,
)


class TestExactNu:
    def test_single_particle(self):
        q = Fraction(1, 3)
        assert exact_nu_density(q, 1, 4) == [(1 - q) * q**x for x in range(5)]

    @pytest.mark.parametrize("q,N", [(Fraction(1, 2), 6), (Fraction(1, 4), 10), (Fraction(3, 4), 4)])
    def test_matches_float(self, q, N):
        exact = exact_nu_density(q, N, 40)
        nu = mx.nu_measure(mx.build_basis(float(q), N), N)
        assert np.allclose([float(v) for v in exact], nu.densities[:41], rtol=1e-12, atol=1e-300)

    def test_moments_from_exact_density(self):
        q, N = Fraction(1, 2), 3
        dens = exact_nu_density(q, N, 400)
        approx = sum(x * (x - 1) * d for x, d in enumerate(dens))
        assert float(approx) == pytest.approx(float(mx.factorial_moment(q, 2, N)), rel=1e-12)


class TestLemmas:
    def test_upper_example(self):
        row = upper_lemma(Fraction(1, 2), 10, 3, 6)
        assert row.holds and row.lhs <= row.rhs

    def test_upper_needs_large_radius(self):
        with pytest.raises(ValueError):
            upper_lemma(Fraction(1, 2), 10, 3, 5)

    def test_lower_needs_positive_radius(self):
        with pytest.raises(ValueError):
            lower_lemma(Fraction(1, 2), 10, 3, 0)

    @given(q=st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]), N=st.integers(1, 12),
           k=st.integers(1, 5), R=st.floats(0.5, 60.0))
    @settings(max_examples=40, deadline=None)
    def test_lower_holds_for_any_radius(self, q, N, k, R):
        assert lower_lemma(q, N, k, R).holds

    @given(q=st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]), N=st.integers(1, 12),
           k=st.integers(1, 5), extra=st.floats(0.0, 40.0))
    @settings(max_examples=40, deadline=None)
    def test_upper_holds_beyond_2k(self, q, N, k, extra):
        assert upper_lemma(q, N, k, 2 * k + extra).holds

    def test_grid(self):
        rows = lemma_checks(["1/2"], [8], [1, 2, 3])
        assert rows and all(r.holds for r in rows)


class TestEnvelopes:
    def test_factorial_band(self):
        rep = factorial_asymptotics([0.25, 0.5, 0.75], [50, 100])
        lo, hi = rep.envelope
        assert 0.1 <= lo and hi <= 10
        assert rep.drift < 0.2
        assert all(k >= 5 and k <= int(N ** (2 / 3) + 1e-9) for _, N, k, *_ in rep.rows)

    def test_polynomial_constants(self):
        rep = polynomial_moment_bounds([0.25, 0.75], [50, 100])
        lo, hi = rep.envelope
        assert 0 < lo <= hi < np.inf
        assert rep.stability < 2

    def test_k_range_respects_q(self):
        rep = factorial_asymptotics([0.02], [100], k_min=1)
        assert all(0.02 >= r[2] ** -2 for r in rep.rows)

    def test_tail_lower(self):
        rep = tail_lower_bound(60, [0.25, 0.5], [0.05, 0.1, 0.2, 0.4])
        assert rep.fitted_c > 0
        assert all(r[3] <= 1 for r in rep.rows)

    def test_tail_lower_skips_small_q(self):
        rep = tail_lower_bound(30, [0.001], [0.05, 0.4])
        assert [r[1] for r in rep.rows] == [0.05]

    def test_crude_tail(self):
        rep = crude_upper_tail([0.3, 0.7], [20, 60])
        assert rep.fitted_L > 0
        assert all(0 < r[3] < 1 for r in rep.rows)
