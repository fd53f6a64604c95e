import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpush.qspecial import DomainError, PrecisionContext, q_pochhammer
from qpush.sampling import (
    QDBBParams,
    RngStream,
    SupportViolation,
    geo_pmf,
    geo_sample,
    geo_tail,
    push_pmf,
    qdbb_pmf,
    qdbb_pmf_vector,
    qdbb_sample,
    qgeo_pmf,
    qgeo_sample,
    qgeo_table,
)
from qpush.stats import chi2_gof

EXACT = PrecisionContext("exact")
EXT = PrecisionContext("extended", 128)


class TestRngStream:
    def test_same_pair_same_draws(self):
        a = RngStream(7, 3).uniform(100)
        b = RngStream(7, 3).uniform(100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        assert not np.array_equal(RngStream(7, 3).uniform(100), RngStream(7, 4).uniform(100))

    def test_spawn_is_a_fresh_stream(self):
        assert np.array_equal(RngStream(7, 0).spawn(5).uniform(10), RngStream(7, 5).uniform(10))

    def test_uniform_never_zero(self):
        u = RngStream(1).uniform(10**5)
        assert u.min() > 0 and u.max() <= 1

    @pytest.mark.parametrize("seed,sid", [(-1, 0), (0, -1), (1 << 64, 0)])
    def test_rejects_out_of_range(self, seed, sid):
        with pytest.raises(ValueError):
            RngStream(seed, sid)

    def test_streams_look_independent(self):
        a = RngStream(11, 0).uniform(20000)
        b = RngStream(11, 1).uniform(20000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


class TestGeo:
    def test_zero_parameter(self):
        assert geo_sample(0.0, RngStream(1)) == 0
        assert geo_sample(0.0, RngStream(1), 5).tolist() == [0] * 5

    def test_rejects_one(self):
        with pytest.raises(DomainError):
            geo_pmf(0, 1.0)

    def test_empirical_mean(self):
        x = geo_sample(0.5, RngStream(2), 10**6)
        assert x.mean() == pytest.approx(1.0, abs=0.01)

    @given(z=st.fractions(min_value=0, max_value=Fraction(39, 40), max_denominator=40), k=st.integers(0, 30))
    @settings(max_examples=80, deadline=None)
    def test_tail_is_partial_sum_exact(self, z, k):
        assert 1 - sum(geo_pmf(j, z) for j in range(k)) == geo_tail(k, z)

    def test_sampler_fits_pmf(self):
        x = geo_sample(0.3, RngStream(3), 10**5)
        pmf = np.array([geo_pmf(k, 0.3) for k in range(30)])
        assert chi2_gof(x, pmf).p_value > 1e-4


class TestQGeo:
    def test_zero_mass_point(self):
        assert qgeo_pmf(0, 0.3, 0.5) == pytest.approx(float(q_pochhammer(0.3, 0.5)), rel=1e-14)

    def test_first_mass_against_rational(self):
        # (3/10; 1/2)_inf with a rigorous 128-bit evaluation, pmf(1) = xi (xi;q)_inf / (1 - q)
        poch = q_pochhammer(0.3, 0.5, math.inf, EXT)
        expect = float(EXT.mp.mpf("0.3") * poch / (1 - EXT.mp.mpf("0.5")))
        assert qgeo_pmf(1, 0.3, 0.5) == pytest.approx(expect, rel=1e-13)

    def test_extended_matches_float(self):
        for s in range(6):
            assert float(qgeo_pmf(s, 0.4, 0.7, EXT)) == pytest.approx(qgeo_pmf(s, 0.4, 0.7), rel=1e-12)

    def test_table_is_normalized_and_certified(self):
        t = qgeo_table(0.25, 0.5)
        assert abs(t.pmf.sum() - 1) < 1e-12
        assert t.tail_bound < 1e-17

    def test_xi_zero_is_point_mass(self):
        assert qgeo_sample(0.0, 0.5, RngStream(1)) == 0
        assert qgeo_pmf(0, 0.0, 0.5) == 1.0

    def test_xi_one_rejected_for_sampling(self):
        with pytest.raises(DomainError):
            qgeo_table(1.0, 0.5)

    def test_chi_square(self):
        x = qgeo_sample(0.2, 0.5, RngStream(4), 10**6)
        pmf = np.array([qgeo_pmf(s, 0.2, 0.5) for s in range(25)])
        assert chi2_gof(x, pmf).p_value > 1e-4

    def test_reproducible(self):
        assert np.array_equal(qgeo_sample(0.3, 0.4, RngStream(9, 2), 50), qgeo_sample(0.3, 0.4, RngStream(9, 2), 50))

    @given(xi=st.floats(0.01, 0.9), q=st.floats(0.05, 0.95))
    @settings(max_examples=50, deadline=None)
    def test_table_sums_to_one(self, xi, q):
        t = qgeo_table(xi, q)
        assert abs(math.fsum(t.pmf) - 1) < 1e-10
        assert t.pmf[3] == pytest.approx(qgeo_pmf(3, xi, q), rel=1e-12) if t.pmf.size > 3 else True


class TestQDBB:
    def test_m_zero(self):
        p = QDBBParams.push(0.5, 2, 0)
        assert qdbb_pmf(0, p) == 1.0
        assert qdbb_sample(p, RngStream(1)) == 0

    def test_sums_to_one(self):
        assert abs(qdbb_pmf_vector(QDBBParams.push(0.5, 2, 3)).sum() - 1) < 1e-10

    def test_exact_support_small_case(self):
        # gap 1, m 3: the unused part m - s is at most the gap
        p = QDBBParams.push(Fraction(1, 2), 1, 3)
        vals = [qdbb_pmf(s, p, EXACT) for s in range(4)]
        assert sum(vals) == 1
        assert vals[0] == vals[1] == 0
        assert all(v > 0 for v in vals[2:])

    @given(q=st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10), max_denominator=20),
           holes=st.integers(0, 6), m=st.integers(0, 8))
    @settings(max_examples=80, deadline=None)
    def test_float_matches_exact(self, q, holes, m):
        p_exact = QDBBParams.push(q, holes, m)
        p_float = QDBBParams.push(float(q), holes, m)
        for s in range(m + 1):
            e = qdbb_pmf(s, p_exact, EXACT)
            assert e >= 0
            assert qdbb_pmf(s, p_float) == pytest.approx(float(e), rel=1e-9, abs=1e-13)

    @given(q=st.floats(0.05, 0.95), holes=st.integers(0, 40), m=st.integers(0, 40))
    @settings(max_examples=80, deadline=None)
    def test_closed_form_push_law(self, q, holes, m):
        ref = qdbb_pmf_vector(QDBBParams.push(q, holes, m))
        assert np.allclose(push_pmf(q, holes, m), ref, atol=1e-9)

    def test_support_zeros_are_exact_in_float(self):
        p = QDBBParams.push(0.4375, 2, 9)
        assert all(qdbb_pmf(s, p) == 0.0 for s in range(7))

    def test_negative_mass_is_reported(self):
        # xi outside the admissible set {q^h}: some masses come out negative
        p = QDBBParams(0.5, -1, 0.3, 0.0, 4)
        with pytest.raises(SupportViolation):
            qdbb_pmf_vector(p)

    def test_rejects_bad_parameters(self):
        with pytest.raises(DomainError):
            QDBBParams(1.5, -1, 0.5, 0, 2)
        with pytest.raises(ValueError):
            QDBBParams(0.5, 2, 0.5, 0, 2)

    def test_chi_square(self):
        p = QDBBParams.push(0.5, 2, 4)
        x = qdbb_sample(p, RngStream(5), 10**6)
        assert chi2_gof(x, qdbb_pmf_vector(p)).p_value > 1e-4

    def test_reproducible(self):
        p = QDBBParams.push(0.5, 2, 4)
        assert np.array_equal(qdbb_sample(p, RngStream(3, 1), 100), qdbb_sample(p, RngStream(3, 1), 100))
