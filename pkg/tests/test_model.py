import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from pcqm.errors import DomainError, NumericError
from pcqm.model import (
    CsrModel,
    NbdModel,
    asymptotic_bias_pair,
    csr_cdf,
    csr_logpdf,
    csr_moment,
    csr_pdf,
    csr_sf,
    csr_truncated_moment_lower,
    csr_truncated_moment_upper,
    delta1,
    nbd_cdf,
    nbd_moment,
    nbd_pdf,
    nbd_sf,
    nbd_truncated_moment_lower,
    nbd_truncated_moment_upper,
)

from .oracles import half_line_integral, interval_integral


ELLS = (1, 2, 3)
QS = (1, 4)
LAMS = (0.005, 0.05, 1.0)
KS = (0.75, 2.0, 10.0)


def _scale(m):
    return 1.0 / math.sqrt(m.a)


class TestCsr:
    def test_pdf_reduces_to_rayleigh(self):
        m = CsrModel(4 / math.pi, 4, 1)
        assert csr_pdf(m, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-15)

    def test_pdf_scalar_formula(self):
        m = CsrModel(0.05, 4, 2)
        a = math.pi * 0.05 / 4
        r = 5.0
        ref = 2 * a * r * (a * r * r) * math.exp(-a * r * r)
        assert csr_pdf(m, r) == pytest.approx(ref, rel=1e-14)

    def test_pdf_vectorised(self):
        m = CsrModel(0.05)
        r = np.array([0.5, 1.0, 4.0])
        assert np.allclose(csr_pdf(m, r), np.exp(csr_logpdf(m, r)))

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_pdf_domain(self, r):
        with pytest.raises(DomainError):
            csr_pdf(CsrModel(0.05), r)

    def test_cdf_values(self):
        m = CsrModel(0.05, 4, 1)
        assert csr_cdf(m, 10.0) == pytest.approx(1 - math.exp(-math.pi * 0.05 * 100 / 4), rel=1e-14)
        assert csr_sf(m, 10.0) == pytest.approx(0.0197, abs=5e-5)
        assert csr_sf(CsrModel(0.005, 4, 1), 10.0) == pytest.approx(0.675, abs=1e-3)
        assert csr_cdf(m, 0.0) == 0.0

    def test_moment_values(self):
        m = CsrModel(0.05, 4, 1)
        assert csr_moment(m, 2) == pytest.approx(4 / (math.pi * 0.05), rel=1e-14)
        assert csr_moment(m, 0) == 1.0
        m2 = CsrModel(0.05, 4, 2)
        ref = math.sqrt(4 / (0.05 * math.pi)) * math.gamma(2.5)
        assert csr_moment(m2, 1) == pytest.approx(ref, rel=1e-14)
        with pytest.raises(DomainError):
            csr_moment(m, -2)

    def test_truncated_upper_memoryless(self):
        m = CsrModel(0.05, 4, 1)
        C = 7.0
        assert csr_truncated_moment_upper(m, 2, C) == pytest.approx(C * C + 4 / (math.pi * 0.05), rel=1e-13)
        assert csr_truncated_moment_upper(m, 0, C) == pytest.approx(1.0, rel=1e-15)

    def test_truncated_upper_quadrature(self):
        m = CsrModel(0.05, 4, 2)
        C = 10.0
        num = half_line_integral(lambda r: r ** -1 * csr_pdf(m, r), C, 10 * _scale(m))
        assert csr_truncated_moment_upper(m, -1, C) == pytest.approx(num / csr_sf(m, C), rel=1e-9)

    def test_truncated_upper_underflow(self):
        with pytest.raises(NumericError, match="1e-300"):
            csr_truncated_moment_upper(CsrModel(1.0, 1, 1), 1, 100.0)

    def test_truncated_lower(self):
        m = CsrModel(0.05, 4, 1)
        C = 10.0
        num = interval_integral(lambda r: r * csr_pdf(m, r), 0, C)
        assert csr_truncated_moment_lower(m, 1, C) == pytest.approx(num / csr_cdf(m, C), rel=1e-9)
        assert csr_truncated_moment_lower(m, 0, C) == pytest.approx(1.0, rel=1e-14)
        assert csr_truncated_moment_lower(m, 1, math.inf) == csr_moment(m, 1)

    def test_model_validation(self):
        with pytest.raises(DomainError):
            CsrModel(0.0)
        with pytest.raises(DomainError):
            CsrModel(1.0, 0)
        with pytest.raises(DomainError):
            CsrModel(1.0, 4, 0)
        with pytest.raises(DomainError):
            NbdModel(1.0, 0.0)


class TestNbd:
    def test_pdf_reduction(self):
        m = NbdModel(4 / math.pi, 1.0, 4, 1)
        assert nbd_pdf(m, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_cdf_reduction(self):
        m = NbdModel(4 / math.pi, 1.0, 4, 1)
        assert nbd_cdf(m, 1.0) == pytest.approx(0.5, rel=1e-14)
        assert nbd_cdf(m, 0.0) == 0.0

    def test_cdf_quadrature(self):
        m = NbdModel(0.05, 2.0, 4, 2)
        num = interval_integral(lambda r: nbd_pdf(m, r), 0, 10.0)
        assert nbd_cdf(m, 10.0) == pytest.approx(num, rel=1e-10)
        assert nbd_cdf(m, 10.0) + nbd_sf(m, 10.0) == pytest.approx(1.0, rel=1e-14)

    def test_second_moment_closed_form(self):
        m = NbdModel(1.0, 2.0, 4, 1)
        assert nbd_moment(m, 2) == pytest.approx(8 / math.pi, rel=1e-14)
        assert nbd_moment(m, 0) == 1.0

    def test_moment_quadrature(self):
        m = NbdModel(0.05, 3.0, 4, 2)
        num = half_line_integral(lambda r: nbd_pdf(m, r) / r, 0.0, _scale(m))
        assert nbd_moment(m, -1) == pytest.approx(num, rel=1e-9)

    @pytest.mark.parametrize("u", [-2.0, 1.5 * 2])
    def test_moment_domain(self, u):
        with pytest.raises(DomainError):
            nbd_moment(NbdModel(0.05, 1.5, 4, 1), u)

    def test_truncated_upper(self):
        m = NbdModel(0.05, 2.0, 4, 1)
        C = 10.0
        num = half_line_integral(lambda r: r * nbd_pdf(m, r), C, 10 * _scale(m))
        assert nbd_truncated_moment_upper(m, 1, C) == pytest.approx(num / nbd_sf(m, C), rel=1e-9)
        assert nbd_truncated_moment_upper(m, 1, 0.0) == pytest.approx(nbd_moment(m, 1), rel=1e-15)
        assert nbd_truncated_moment_upper(m, 0, C) == pytest.approx(1.0, rel=1e-14)

    def test_truncated_lower(self):
        m = NbdModel(0.05, 2.0, 4, 2)
        C = 10.0
        num = interval_integral(lambda r: r * r * nbd_pdf(m, r), 0, C)
        assert nbd_truncated_moment_lower(m, 2, C) == pytest.approx(num / nbd_cdf(m, C), rel=1e-9)

    def test_huge_k_finite(self):
        m = NbdModel(0.05, 1e12, 4, 3)
        assert math.isfinite(nbd_pdf(m, 5.0))
        assert nbd_pdf(m, 5.0) == pytest.approx(csr_pdf(m.as_csr(), 5.0), rel=1e-9)


def test_cdf_derivative_matches_pdf():
    for m, pdf, cdf in ((CsrModel(0.05, 4, 2), csr_pdf, csr_cdf),
                        (NbdModel(0.05, 2.0, 4, 2), nbd_pdf, nbd_cdf)):
        for r in (2.0, 5.0, 10.0, 20.0):
            h = 1e-5 * r
            deriv = (cdf(m, r + h) - cdf(m, r - h)) / (2 * h)
            assert deriv == pytest.approx(pdf(m, r), rel=1e-6)


class TestDiagnostics:
    def test_delta1_zero_order(self):
        assert delta1(2, 0.0, 0.05, 4, 10.0) == 0.0

    @pytest.mark.parametrize("ell,u", [(1, 2.0), (2, 1.0), (2, -1.0), (3, 1.0)])
    def test_delta1_is_first_order_slope(self, ell, u):
        lam, q, C = 0.05, 4, 10.0
        e_csr = csr_truncated_moment_upper(CsrModel(lam, q, ell), u, C)

        def slope(k):
            return k * (nbd_truncated_moment_upper(NbdModel(lam, k, q, ell), u, C) - e_csr)

        # Richardson: 2 g(2k) - g(k) removes the O(1/k) term of the slope
        extrapolated = 2 * slope(2e3) - slope(1e3)
        assert extrapolated == pytest.approx(delta1(ell, u, lam, q, C), rel=1e-4)

    @pytest.mark.parametrize("ell,u", [(1, 2.0), (2, 1.0), (2, -1.0)])
    def test_expansion_orders(self, ell, u):
        lam, q, C = 0.05, 4, 10.0
        e_csr = csr_truncated_moment_upper(CsrModel(lam, q, ell), u, C)
        d1 = delta1(ell, u, lam, q, C)

        def gap(k):
            return nbd_truncated_moment_upper(NbdModel(lam, k, q, ell), u, C) - e_csr

        # the gap to CSR is O(1/k): halves when k doubles
        assert gap(1e3) / gap(2e3) == pytest.approx(2.0, rel=0.01)
        # what is left after the first-order term is O(1/k^2): quarters
        assert (gap(1e3) - d1 / 1e3) / (gap(2e3) - d1 / 2e3) == pytest.approx(4.0, rel=0.01)

    def test_delta1_frozen(self):
        # oracle: Richardson-extrapolated slope over k in {1e3, 2e3}
        assert delta1(1, 2.0, 0.05, 4, 10.0) == pytest.approx(125.4648, rel=1e-5)

    def test_bias_pair_example(self):
        b_mu, b_e = asymptotic_bias_pair(NbdModel(0.05, 2.0, 4, 1), 2.0, 10.0)
        assert abs(b_e) < abs(b_mu)
        assert b_mu == pytest.approx(-15.927, abs=5e-3)
        assert b_e == pytest.approx(-13.200, abs=5e-3)

    def test_bias_pair_limits(self):
        m = NbdModel(0.05, 2.0, 4, 1)
        assert asymptotic_bias_pair(m, 2.0, math.inf) == (0.0, 0.0)
        assert asymptotic_bias_pair(m, 0.0, 10.0) == (0.0, 0.0)
        b_mu, b_e = asymptotic_bias_pair(NbdModel(0.05, 1e9, 4, 1), 2.0, 10.0)
        assert abs(b_mu) < 1e-5 and abs(b_e) < 1e-5

    def test_bias_pair_domain(self):
        with pytest.raises(DomainError, match="k>1"):
            asymptotic_bias_pair(NbdModel(0.05, 0.9, 4, 1), 1.0, 10.0)


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ELLS), st.sampled_from(QS), st.sampled_from(LAMS), st.sampled_from(KS),
       st.floats(0.2, 3.0), st.floats(-0.9, 1.2))
def test_splicing_identity(ell, q, lam, k, c_rel, u):
    csr = CsrModel(lam, q, ell)
    nbd = NbdModel(lam, k, q, ell)
    C = c_rel / math.sqrt(csr.a)
    for m, cdf, lo, hi, mom in (
            (csr, csr_cdf, csr_truncated_moment_lower, csr_truncated_moment_upper, csr_moment),
            (nbd, nbd_cdf, nbd_truncated_moment_lower, nbd_truncated_moment_upper, nbd_moment)):
        p = cdf(m, C)
        spliced = p * lo(m, u, C) + (1 - p) * hi(m, u, C)
        assert spliced == pytest.approx(mom(m, u), rel=1e-8)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(ELLS), st.sampled_from(QS), st.floats(1e-3, 10.0), st.floats(0.01, 50.0))
def test_csr_cdf_is_regularized_gamma(ell, q, lam, r):
    m = CsrModel(lam, q, ell)
    assert csr_cdf(m, r) == pytest.approx(special.gammainc(ell, m.a * r * r), rel=1e-11, abs=1e-300)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(ELLS), st.floats(0.3, 20.0), st.floats(0.01, 5.0))
def test_nbd_cdf_monotone_and_bounded(ell, k, x):
    m = NbdModel(0.05, k, 4, ell)
    r = x / math.sqrt(m.a)
    c1, c2 = nbd_cdf(m, r), nbd_cdf(m, 1.1 * r)
    assert 0.0 <= c1 <= c2 <= 1.0
