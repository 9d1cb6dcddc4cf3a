import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advest.params import (
    DomainError,
    FiscalParams,
    PreferenceParams,
    UnsupportedParameterError,
    after_tax_income,
    bequest_utility,
    crra_utility,
    derive_bequest_transform,
    estate_after_tax,
    recover_theta,
)

# high-precision values computed with mpmath (40 digits)
U_10K_NU38 = -2.253419087429265e-12
PHI_ZERO_ESTATE = -1.595420713899920e-10  # theta=70.8, k=10,000, nu=3.8
THETA_REFERENCE_MC = 70.78186784808884
FLOOR_REFERENCE_MC = 3267.9738562091503


class TestCrra:
    def test_unit_consumption(self):
        assert crra_utility(1.0, 3.8) == pytest.approx(1 / (1 - 3.8), rel=1e-15)

    def test_nu_two(self):
        assert crra_utility(2.0, 2.0) == pytest.approx(-0.5, rel=1e-15)

    def test_high_precision(self):
        assert crra_utility(10_000.0, 3.8) == pytest.approx(U_10K_NU38, rel=1e-12)

    def test_vectorized_increasing_concave(self):
        c = np.linspace(100, 50_000, 200)
        u = crra_utility(c, 3.8)
        assert np.all(np.diff(u) > 0)
        assert np.all(np.diff(u, 2) < 0)

    @pytest.mark.parametrize("c", [0.0, -1.0])
    def test_nonpositive_consumption(self, c):
        with pytest.raises(DomainError):
            crra_utility(c, 2.0)

    def test_log_case_rejected(self):
        with pytest.raises(UnsupportedParameterError):
            crra_utility(1.0, 1.0)


class TestBequestUtility:
    def test_no_motive(self):
        p = PreferenceParams(nu=3.8, mpc=1.0, k_curv=10_000)
        assert bequest_utility(0.0, p) == 0.0

    def test_direct_evaluation(self):
        p = PreferenceParams(nu=3.8, mpc=0.25, k_curv=10_000)
        expected = p.theta_intensity * 10_000.0 ** (1 - 3.8) / (1 - 3.8)
        assert bequest_utility(0.0, p) == pytest.approx(expected, rel=1e-14)
        # theta of the reference Monte Carlo truth is 70.78, close to the rounded 70.8
        assert expected == pytest.approx(PHI_ZERO_ESTATE * THETA_REFERENCE_MC / 70.8, rel=1e-10)

    def test_monotone(self):
        p = PreferenceParams(nu=3.8, mpc=0.25, k_curv=10_000)
        assert bequest_utility(20_000.0, p) > bequest_utility(10_000.0, p)

    def test_negative_estate(self):
        p = PreferenceParams(nu=3.8, mpc=0.25, k_curv=10_000)
        with pytest.raises(DomainError):
            bequest_utility(-1.0, p)


class TestTransform:
    def test_reference_monte_carlo_truth(self):
        theta, floor = derive_bequest_transform(3.8, 0.25, 10_000, 0.971, 0.02)
        assert theta == pytest.approx(THETA_REFERENCE_MC, rel=1e-12)
        assert floor == pytest.approx(FLOOR_REFERENCE_MC, rel=1e-12)
        # the published $3,266 is within 0.1%
        assert abs(floor - 3266) / 3266 < 1e-3

    def test_mpc_one_is_no_bequest(self):
        theta, floor = derive_bequest_transform(5.0, 1.0, 1234.0)
        assert theta == 0.0 and math.isinf(floor)

    @pytest.mark.parametrize("mpc", [0.0, -0.1, 1.01])
    def test_bad_mpc(self, mpc):
        with pytest.raises(DomainError):
            derive_bequest_transform(3.8, mpc, 10_000)

    def test_invariants_hold(self):
        p = PreferenceParams(nu=4.2, mpc=0.31, k_curv=7_500, beta=0.96, r=0.03)
        z = (p.beta * p.theta_intensity * (1 + p.r)) ** (1 / p.nu)
        assert (1 + p.r) / (1 + p.r + z) == pytest.approx(p.mpc, rel=1e-10)
        assert p.k_curv / z == pytest.approx(p.asset_floor, rel=1e-10)

    @settings(max_examples=1000, deadline=None)
    @given(
        nu=st.floats(1.5, 8.0),
        mpc=st.floats(0.01, 0.99),
        k=st.floats(1_000.0, 100_000.0),
    )
    def test_round_trip(self, nu, mpc, k):
        theta, floor = derive_bequest_transform(nu, mpc, k)
        nu2, mpc2, k2 = recover_theta(nu, theta, floor)
        assert nu2 == nu
        assert mpc2 == pytest.approx(mpc, rel=1e-8)
        assert k2 == pytest.approx(k, rel=1e-8)

    def test_floor_monotonicity_on_grid(self):
        beta, r, nu = 0.971, 0.02, 3.8
        thetas = np.geomspace(1.0, 1e6, 40)
        ks = np.linspace(1_000, 100_000, 40)

        def floor(theta, k):
            return k / (beta * theta * (1 + r)) ** (1 / nu)

        # the floor implied by (theta, k) through the forward map
        for k in ks[::8]:
            f = [floor(t, k) for t in thetas]
            assert np.all(np.diff(f) < 0)
        for t in thetas[::8]:
            mpc = recover_theta(nu, t, 1.0, beta, r)[1]
            f = [PreferenceParams(nu, mpc, k, beta, r).asset_floor for k in ks]
            assert np.all(np.diff(f) > 0)


class TestTaxes:
    def test_zero_income(self):
        assert after_tax_income(0.0, ((0.0, 0.3), (10_000.0, 0.5))) == 0.0

    def test_flat(self):
        assert after_tax_income(10_000.0, ((0.0, 0.2),)) == pytest.approx(8_000.0)

    def test_two_brackets(self):
        assert after_tax_income(10_000.0, ((0.0, 0.1), (5_000.0, 0.3))) == pytest.approx(8_000.0)

    def test_estate(self):
        assert estate_after_tax(60_000.0, 0.1, 60_000.0) == 60_000.0
        assert estate_after_tax(0.0, 0.4, 600_000.0) == 0.0
        assert estate_after_tax(100_000.0, 0.1, 60_000.0) == pytest.approx(96_000.0)

    @settings(max_examples=300, deadline=None)
    @given(
        a=st.floats(0, 1e6), b=st.floats(0, 1e6),
        r1=st.floats(0, 0.99), r2=st.floats(0, 0.99), thr=st.floats(1.0, 5e5),
    )
    def test_lipschitz_and_monotone(self, a, b, r1, r2, thr):
        lo, hi = min(a, b), max(a, b)
        tau = ((0.0, r1), (thr, r2))
        ya, yb = after_tax_income(lo, tau), after_tax_income(hi, tau)
        assert yb >= ya - 1e-9
        assert yb - ya <= hi - lo + 1e-9
        assert ya <= lo + 1e-9
        ea, eb = estate_after_tax(lo, r1, thr), estate_after_tax(hi, r1, thr)
        assert eb >= ea - 1e-9
        assert eb - ea <= hi - lo + 1e-9
        assert ea <= lo + 1e-9

    def test_schedule_validation(self):
        with pytest.raises(DomainError):
            FiscalParams(tau=((0.0, 0.1), (0.0, 0.2)))
        with pytest.raises(DomainError):
            FiscalParams(tau=((0.0, 1.0),))
        with pytest.raises(DomainError):
            FiscalParams(c_floor=0.0)

    def test_default_fiscal(self):
        f = FiscalParams()
        assert f.c_floor == 4_500.0
        assert after_tax_income(12_345.0, f.tau) == 12_345.0
