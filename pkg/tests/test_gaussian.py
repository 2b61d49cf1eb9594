"""Kernel tests: normal primitives, bivariate tails, and the inversion.

Expected values tagged with a comment were computed from an independent
oracle (mpmath at 30 digits, the quadrant closed form, or 2-D adaptive
quadrature of the defining double integral) and frozen here.
"""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from binfactor.gaussian import (
    RHO_CLAMP,
    bvn_boundary_value,
    bvn_upper_tail,
    bvn_upper_tail_drho,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    tetrachoric_invert,
)

mp.mp.dps = 30


def ell_by_double_quadrature(c1, c2, rho):
    """Independent oracle: adaptive 2-D quadrature of the defining integral."""

    def f(y, x):
        return math.exp(-(x * x + y * y - 2.0 * rho * x * y) / (2.0 * (1.0 - rho * rho)))

    val, _ = integrate.dblquad(
        f, c1, np.inf, lambda _: c2, np.inf, epsabs=1e-13, epsrel=1e-13
    )
    return val / (2.0 * math.pi * math.sqrt(1.0 - rho * rho))


class TestStdNormalPdf:
    def test_at_zero(self):
        assert std_normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-16)

    def test_at_one(self):
        # mpmath: npdf(1)
        assert std_normal_pdf(1.0) == pytest.approx(0.24197072451914335, abs=1e-16)

    def test_even(self):
        x = np.linspace(0.0, 6.0, 61)
        np.testing.assert_array_equal(std_normal_pdf(x), std_normal_pdf(-x))

    def test_positive(self):
        assert np.all(std_normal_pdf(np.linspace(-30, 30, 101)) > 0.0)


class TestStdNormalCdf:
    def test_at_zero(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_upper_975(self):
        assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-14)

    def test_symmetry_identity(self):
        x = np.linspace(-8.0, 8.0, 401)
        np.testing.assert_allclose(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, atol=1e-15)

    def test_against_high_precision_oracle(self):
        for x in np.linspace(-8.0, 8.0, 81):
            exact = float(mp.ncdf(mp.mpf(float(x))))
            assert abs(float(std_normal_cdf(float(x))) - exact) <= 1e-14

    def test_strictly_increasing(self):
        x = np.linspace(-8.0, 8.0, 401)
        assert np.all(np.diff(std_normal_cdf(x)) > 0.0)


class TestStdNormalQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_upper_975(self):
        # mpmath: sqrt(2) * erfinv(0.95)
        assert std_normal_quantile(0.975) == pytest.approx(1.9599639845400542, abs=1e-12)

    def test_round_trip(self):
        x = np.linspace(-5.0, 5.0, 101)
        back = std_normal_quantile(std_normal_cdf(x))
        np.testing.assert_allclose(back, x, atol=1e-10)

    def test_cdf_residual(self):
        p = np.linspace(1e-10, 1.0 - 1e-10, 501)
        np.testing.assert_allclose(std_normal_cdf(std_normal_quantile(p)), p, atol=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.7])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            std_normal_quantile(bad)


class TestBvnUpperTail:
    def test_independent_origin(self):
        assert bvn_upper_tail(0.0, 0.0, 0.0) == 0.25

    def test_quadrant_value_half(self):
        # quadrant closed form: 1/4 + arcsin(0.5) / (2 pi) = 1/3
        assert bvn_upper_tail(0.0, 0.0, 0.5) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_quadrant_closed_form_grid(self):
        for rho in np.concatenate([[-0.99], np.arange(-0.9, 0.91, 0.1), [0.99]]):
            exact = 0.25 + math.asin(rho) / (2.0 * math.pi)
            assert bvn_upper_tail(0.0, 0.0, float(rho)) == pytest.approx(exact, abs=1e-12)

    def test_zero_correlation_factorizes(self):
        for c1 in (-2.0, -0.3, 0.0, 1.1, 2.5):
            for c2 in (-1.7, 0.0, 0.6, 2.0):
                exact = float(std_normal_cdf(-c1)) * float(std_normal_cdf(-c2))
                assert bvn_upper_tail(c1, c2, 0.0) == exact

    def test_against_double_quadrature(self):
        for c1, c2, rho in [
            (0.3, -0.7, 0.85),
            (-1.2, 0.4, -0.6),
            (1.5, 1.0, 0.3),
            (-0.5, -0.5, -0.9),
            (2.0, -1.0, 0.95),
            (0.0, 1.0, -0.35),
        ]:
            oracle = ell_by_double_quadrature(c1, c2, rho)
            assert bvn_upper_tail(c1, c2, rho) == pytest.approx(oracle, abs=1e-9)

    def test_symmetric_exactly(self):
        for c1, c2, rho in [(0.3, -1.2, 0.77), (1.5, -0.5, -0.9), (2.0, 0.1, 0.5)]:
            assert bvn_upper_tail(c1, c2, rho) == bvn_upper_tail(c2, c1, rho)

    def test_probability_bounds(self):
        for c1 in (-2.0, 0.0, 1.5):
            for c2 in (-1.0, 0.5, 2.5):
                cap = min(float(std_normal_cdf(-c1)), float(std_normal_cdf(-c2)))
                for rho in (-0.999, -0.5, 0.0, 0.5, 0.999):
                    val = bvn_upper_tail(c1, c2, rho)
                    assert 0.0 <= val <= cap + 1e-15

    def test_monotone_in_rho(self):
        # Strict increase is representable in float64 only while the local
        # increment exceeds one ulp of the value; separated thresholds go
        # flat beyond |rho| ~ 0.97, so those pairs use the narrower grid.
        for c1, c2, hi in ((-1.0, 0.5, 0.95), (0.0, 0.0, 0.999), (1.2, -0.4, 0.95)):
            grid = np.linspace(-hi, hi, 399)
            vals = [bvn_upper_tail(c1, c2, float(r)) for r in grid]
            assert np.all(np.diff(vals) > 0.0)

    def test_weakly_monotone_to_the_edges(self):
        grid = np.linspace(-0.9999, 0.9999, 401)
        for c1, c2 in ((-1.0, 0.5), (1.2, -0.4)):
            vals = [bvn_upper_tail(c1, c2, float(r)) for r in grid]
            assert np.all(np.diff(vals) >= 0.0)

    def test_boundary_consistency(self):
        # The limit is approached at rate sqrt(1 - rho^2) when thresholds
        # coincide (~1.4e-3 at rho = 0.999999), so the 1e-6 agreement is
        # checked at rho = +-(1 - 1e-12) where every case has converged.
        rho_near = 1.0 - 1e-12
        for c1 in (-1.2, 0.0, 0.8):
            for c2 in (-0.9, 0.0, 1.4):
                for sign in (1, -1):
                    limit = bvn_boundary_value(c1, c2, sign)
                    near = bvn_upper_tail(c1, c2, sign * rho_near)
                    assert near == pytest.approx(limit, abs=1e-6)

    def test_boundary_consistency_separated_thresholds(self):
        for c1, c2 in ((-1.2, 0.0), (0.8, -0.9), (0.0, 1.4)):
            for sign in (1, -1):
                limit = bvn_boundary_value(c1, c2, sign)
                near = bvn_upper_tail(c1, c2, sign * 0.999999)
                assert near == pytest.approx(limit, abs=1e-6)

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_domain_rho(self, rho):
        with pytest.raises(ValueError):
            bvn_upper_tail(0.0, 0.0, rho)

    def test_domain_nonfinite_threshold(self):
        with pytest.raises(ValueError):
            bvn_upper_tail(math.inf, 0.0, 0.3)


class TestBvnUpperTailDrho:
    def test_origin(self):
        assert bvn_upper_tail_drho(0.0, 0.0, 0.0) == pytest.approx(
            0.15915494309189534, abs=1e-16
        )

    def test_one_zero(self):
        # pdf(1) * pdf(0)
        assert bvn_upper_tail_drho(1.0, 0.0, 0.0) == pytest.approx(
            0.09653235263005391, abs=1e-15
        )

    def test_strictly_positive(self):
        for c1 in (-2.0, 0.0, 2.0):
            for c2 in (-1.0, 1.0):
                for rho in (-0.95, 0.0, 0.95):
                    assert bvn_upper_tail_drho(c1, c2, rho) > 0.0

    def test_matches_finite_difference(self):
        # The finite difference carries rounding noise ~ ulp(ell)/(2h), so
        # 1e-5 relative agreement is only measurable where the derivative
        # clears ~1e-5; below that the comparison tests float rounding,
        # not the formula.
        step = 1e-5
        for c1 in (-1.5, -0.5, 0.0, 1.0):
            for c2 in (-1.0, 0.0, 0.5, 1.5):
                for rho in (-0.9, -0.5, 0.0, 0.4, 0.8):
                    exact = bvn_upper_tail_drho(c1, c2, rho)
                    if exact <= 1e-5:
                        continue
                    fd = (
                        bvn_upper_tail(c1, c2, rho + step)
                        - bvn_upper_tail(c1, c2, rho - step)
                    ) / (2.0 * step)
                    assert fd == pytest.approx(exact, rel=1e-5)

    def test_domain(self):
        with pytest.raises(ValueError):
            bvn_upper_tail_drho(0.0, 0.0, 1.0)


class TestBvnBoundaryValue:
    def test_plus_one_origin(self):
        assert bvn_boundary_value(0.0, 0.0, 1) == 0.5

    def test_minus_one_origin(self):
        assert bvn_boundary_value(0.0, 0.0, -1) == 0.0

    def test_plus_one_asymmetric(self):
        # 1 - Phi(0.5)
        assert bvn_boundary_value(0.5, -0.2, 1) == pytest.approx(
            0.3085375387259869, abs=1e-15
        )

    def test_minus_one_positive_sum(self):
        assert bvn_boundary_value(0.5, 0.2, -1) == 0.0

    def test_minus_one_negative_sum(self):
        exact = 1.0 - float(std_normal_cdf(-1.0)) - float(std_normal_cdf(0.3))
        assert bvn_boundary_value(-1.0, 0.3, -1) == pytest.approx(exact, abs=1e-15)

    def test_bad_sign(self):
        with pytest.raises(ValueError):
            bvn_boundary_value(0.0, 0.0, 0)


class TestTetrachoricInvert:
    def test_independence(self):
        res = tetrachoric_invert(0.0, 0.0, 0.25)
        assert abs(res.rho_hat) <= 1e-10
        assert not res.clamped

    def test_third(self):
        # inverse of the quadrant closed form at rho = 0.5
        res = tetrachoric_invert(0.0, 0.0, 1.0 / 3.0)
        assert res.rho_hat == pytest.approx(0.5, abs=1e-9)

    def test_round_trip_grid(self):
        for c1 in (-1.0, 0.0, 1.0):
            for c2 in (-1.0, 0.0, 1.0):
                for rho in np.arange(-0.9, 0.91, 0.1):
                    p = bvn_upper_tail(c1, c2, float(rho))
                    res = tetrachoric_invert(c1, c2, p)
                    assert abs(res.rho_hat - rho) <= 1e-8
                    assert not res.clamped

    def test_clamp_high(self):
        hi = bvn_boundary_value(0.4, -0.3, 1)
        res = tetrachoric_invert(0.4, -0.3, hi)
        assert res.clamped
        assert res.rho_hat == 1.0 - RHO_CLAMP

    def test_clamp_low(self):
        lo = bvn_boundary_value(-0.4, 0.1, -1)
        res = tetrachoric_invert(-0.4, 0.1, lo)
        assert res.clamped
        assert res.rho_hat == -(1.0 - RHO_CLAMP)

    def test_clamp_extremes(self):
        assert tetrachoric_invert(0.0, 0.0, 1.0).clamped
        assert tetrachoric_invert(0.0, 0.0, 0.0).clamped

    def test_residual_at_solution(self):
        res = tetrachoric_invert(0.7, -0.4, 0.2)
        assert abs(res.ell_at_rho - 0.2) <= 1e-9
        assert res.iterations >= 1
        assert not res.clamped

    def test_monotone_in_target(self):
        lo = bvn_boundary_value(0.3, 0.3, -1)
        hi = bvn_boundary_value(0.3, 0.3, 1)
        targets = np.linspace(lo + 1e-6, hi - 1e-6, 40)
        roots = [tetrachoric_invert(0.3, 0.3, float(t)).rho_hat for t in targets]
        assert np.all(np.diff(roots) >= 0.0)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, math.nan])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            tetrachoric_invert(0.0, 0.0, bad)
