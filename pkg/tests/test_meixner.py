import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from qpush import meixner as mx
from qpush.lpp import square_lpp_samples
from qpush.qspecial import DomainError, PrecisionContext
from qpush.stats import wilson_interval

EXACT = PrecisionContext("exact")


@pytest.fixture(scope="module")
def basis_half():
    return mx.build_basis(0.5, 40)


class TestBasis:
    def test_m0_is_one(self, basis_half):
        psi = mx.recurrence_functions(basis_half, [0, 3, 7], 0, weighted=False)
        assert np.allclose(psi[0], 1.0)

    def test_exact_orthonormality(self):
        b = mx.build_basis(Fraction(1, 2), 6, EXACT)
        assert mx.exact_inner_product(b, 0, 1) == 0
        assert mx.exact_inner_product(b, 1, 1) == 1
        assert mx.exact_orthogonality(b)

    @pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
    def test_recurrence_matches_closed_form(self, q):
        b = mx.build_basis(q, 30)
        for n in range(31):
            bn, an = mx.closed_form_recurrence(q, n)
            assert b.b[n] == pytest.approx(bn, rel=1e-10)
            if n:
                assert b.a[n] == pytest.approx(an, rel=1e-10)

    def test_exact_recurrence_is_closed_form(self):
        q = Fraction(1, 3)
        b = mx.build_basis(q, 8, EXACT)
        for n in range(9):
            bn, an = mx.closed_form_recurrence(q, n)
            assert b.exact_b[n] == bn
            if n:
                assert b.exact_a[n] == an

    @pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
    def test_two_routes_agree(self, q):
        b = mx.build_basis(q, 30)
        xs = np.arange(0, min(b.support_max, 200))
        rec = mx.recurrence_functions(b, xs, 30)
        assert np.max(np.abs(rec - mx.weighted_functions(b, xs, 30))) < 1e-10

    def test_residual_and_kappa(self, basis_half):
        assert basis_half.residual < 1e-12
        assert np.all(basis_half.kappa > 0)

    def test_precision_guard(self, basis_half):
        bad = basis_half.vectors * 1.001
        with pytest.raises(mx.PrecisionInsufficient):
            mx._finish(0.5, basis_half.D, basis_half.b, basis_half.a, basis_half.support_max, "float", bad)

    def test_domain(self):
        with pytest.raises(DomainError):
            mx.build_basis(1.0, 3)
        with pytest.raises(DomainError):
            mx.recurrence_functions(mx.build_basis(0.5, 3), [0], 4)

    def test_geo_moments(self):
        m = mx.geo_moments(Fraction(1, 2), 4)
        assert m == [1, 1, 3, 13]


class TestKernel:
    def test_symmetric(self, basis_half):
        assert mx.kernel(basis_half, 7, 2, 9) == pytest.approx(mx.kernel(basis_half, 7, 9, 2), rel=1e-12)

    @pytest.mark.parametrize("x", [0, 3, 11, 25])
    def test_diagonal(self, basis_half, x):
        assert mx.kernel(basis_half, 9, x, x) == pytest.approx(mx.kernel_diagonal_sum(basis_half, 9, x), rel=1e-10)

    def test_off_diagonal_sum(self, basis_half):
        m = mx.recurrence_functions(basis_half, [4, 10], 5, weighted=False)
        assert mx.kernel(basis_half, 6, 4, 10) == pytest.approx(float(m[:, 0] @ m[:, 1]), rel=1e-10)

    def test_single_particle(self, basis_half):
        assert mx.kernel(basis_half, 1, 3, 8) == pytest.approx(1.0)
        assert mx.kernel(basis_half, 1, 3, 3) == pytest.approx(1.0)


class TestGram:
    def test_whole_space_is_identity(self, basis_half):
        assert np.max(np.abs(mx.gram_matrix_Kt(basis_half, 12, 0) - np.eye(12))) < 1e-10

    @given(N=st.integers(1, 20), t=st.integers(0, 60))
    @settings(max_examples=50, deadline=None)
    def test_spectrum(self, basis_half, N, t):
        g = mx.gram_matrix_Kt(basis_half, N, t)
        assert np.allclose(g, g.T)
        ev = np.linalg.eigvalsh(g)
        assert ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10

    def test_single_entry(self, basis_half):
        assert mx.gram_matrix_Kt(basis_half, 1, 2)[0, 0] == pytest.approx(0.25, rel=1e-12)

    def test_gap_single_particle(self, basis_half):
        assert mx.gap_probability(basis_half, 1, 2) == pytest.approx(0.75, rel=1e-12)

    def test_gap_monotone(self, basis_half):
        cdf = mx.top_particle_cdf(basis_half, 8, 200)
        assert np.all(np.diff(cdf) >= -1e-14)
        assert cdf[0] == 0.0 and cdf[-1] == pytest.approx(1.0, abs=1e-9)

    def test_gap_matches_lpp(self):
        N, q, n = 5, 0.3, 40000
        lam1 = square_lpp_samples(N, q, n, seed=17) + N - 1
        b = mx.build_basis(q, N + 5)
        ts = range(4, 21)
        conf = 1 - 1e-3 / len(ts)
        for t in ts:
            lo, hi = wilson_interval(int(np.count_nonzero(lam1 <= t - 1)), n, conf)
            assert lo - 1e-12 <= mx.gap_probability(b, N, t) <= hi + 1e-12

    def test_widom_single_particle(self, basis_half):
        det, bound = mx.widom_bound(basis_half, 1, 3)
        assert det == pytest.approx(1 - 0.125)
        assert bound == pytest.approx(math.exp(-0.125))

    def test_widom_grid(self):
        for q in (0.2, 0.5, 0.8):
            b = mx.build_basis(q, 21)
            for N in range(1, 21):
                for t in range(0, 4 * N + 1):
                    det, bound = mx.widom_bound(b, N, t)
                    assert det <= bound + 1e-12


class TestNu:
    def test_mass_and_sign(self, basis_half):
        nu = mx.nu_measure(basis_half, 10)
        assert np.all(nu.densities >= 0)
        assert abs(math.fsum(nu.densities) + nu.tail_bound - 1) < 1e-9

    def test_single_particle_is_geometric(self, basis_half):
        nu = mx.nu_measure(basis_half, 1)
        x = np.arange(30)
        assert np.allclose(nu.densities[:30], 0.5 * 0.5**x, rtol=1e-12)

    def test_routes_agree(self, basis_half):
        a = mx.nu_measure(basis_half, 12)
        b = mx.nu_measure(basis_half, 12, route="cd")
        assert np.allclose(a.densities, b.densities, atol=1e-14)

    def test_unknown_route(self, basis_half):
        with pytest.raises(ValueError):
            mx.nu_measure(basis_half, 3, route="magic")

    def test_trace_single_particle(self, basis_half):
        nu = mx.nu_measure(basis_half, 1)
        assert nu.tail(4) == pytest.approx(0.5**4, rel=1e-12)
        assert mx.trace_identity_check(basis_half, 1, 4) < 1e-12

    def test_trace_at_zero(self, basis_half):
        assert float(np.trace(mx.gram_matrix_Kt(basis_half, 9, 0))) == pytest.approx(9)
        assert mx.nu_measure(basis_half, 9).tail(0) * 9 == pytest.approx(9)

    def test_trace_grid(self):
        for q in (0.3, 0.7):
            b = mx.build_basis(q, 20)
            for N in (1, 5, 12, 20):
                nu = mx.nu_measure(b, N, route="cd")
                for t in range(0, 4 * N + 1, 3):
                    assert mx.trace_identity_check(b, N, t, nu=nu) < 1e-9


class TestMoments:
    def test_k_zero(self):
        assert mx.factorial_moment(Fraction(1, 2), 0, 7) == 1
        assert mx.polynomial_moment_exact(Fraction(1, 2), 7, 0) == 1

    def test_dual_formulas(self):
        for q in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
            for N in range(1, 16):
                for k in range(11):
                    assert mx.factorial_moment(q, k, N) == mx.factorial_moment_double_sum(q, k, N)

    def test_against_nu(self):
        for q in (0.25, 0.5, 0.75):
            b = mx.build_basis(q, 13)
            for N in (1, 4, 12):
                nu = mx.nu_measure(b, N)
                for k in range(7):
                    exact = float(mx.factorial_moment(Fraction(q), k, N))
                    assert mx.factorial_moment_from_nu(nu, k) == pytest.approx(exact, rel=1e-8)

    def test_polynomial_first_equals_factorial_first(self):
        q = Fraction(2, 5)
        assert mx.polynomial_moment_exact(q, 6, 1) == mx.factorial_moment(q, 1, 6)

    def test_single_particle_geometric_moments(self):
        q = Fraction(1, 3)
        geo = mx.geo_moments(q, 6)
        for k in range(6):
            assert mx.polynomial_moment_exact(q, 1, k) == geo[k]
        x = np.arange(400)
        pmf = sps.geom.pmf(x + 1, 1 - 1 / 3)
        assert float(geo[4]) == pytest.approx(float(np.sum(x**4 * pmf)), rel=1e-12)

    def test_float_route(self, basis_half):
        assert mx.polynomial_moment(basis_half, 8, 3) == pytest.approx(
            float(mx.polynomial_moment_exact(Fraction(1, 2), 8, 3)), rel=1e-9)

    def test_float_cap(self):
        assert mx.factorial_moment(0.5, 3, 4, PrecisionContext()) == pytest.approx(
            float(mx.factorial_moment(Fraction(1, 2), 3, 4)))
        with pytest.raises(DomainError):
            mx.factorial_moment(0.5, 41, 4, PrecisionContext())

    def test_stirling(self):
        assert mx.stirling2_row(4) == [0, 1, 7, 6, 1]

    def test_partial_moment_splits(self, basis_half):
        nu = mx.nu_measure(basis_half, 6)
        total = mx.polynomial_moment(basis_half, 6, 2, nu=nu)
        assert mx.partial_moment(nu, 2, 10) + mx.partial_moment(nu, 2, 9, above=False) == pytest.approx(total)
