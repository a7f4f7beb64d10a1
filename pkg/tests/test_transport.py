import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cloudmarch.transport import (
    TAYLOR_EPS,
    MediumParams,
    analytic_factor,
    hg_phase,
    lighting_term,
    luminance,
    scattering_step_analytic,
    scattering_step_naive,
    transmittance_factor,
)

SUN_UP = (0.0, 1.0, 0.0)


def medium(sun=(0, 0, 0), ambient=(0, 0, 0), **kw):
    return MediumParams(kw.get("absorption", 1.0), kw.get("hg_g", 0.0), SUN_UP, sun, ambient)


class TestTransmittance:
    def test_half(self):
        assert transmittance_factor(1.0, 1.0, math.log(2)) == pytest.approx(0.5, abs=1e-15)

    def test_vacuum(self):
        assert transmittance_factor(0.0, 1.0, 5.0) == 1.0

    def test_direct_exponential(self):
        # 2 * 0.3 * 1.7 = 1.02
        assert transmittance_factor(2.0, 0.3, 1.7) == pytest.approx(math.exp(-1.02), rel=1e-14)
        assert transmittance_factor(2.0, 0.3, 1.7) == pytest.approx(0.360595, abs=1e-6)

    @pytest.mark.parametrize("args", [(-1, 1, 1), (1, 0, 1), (1, -2, 1), (1, 1, -0.1)])
    def test_rejects_bad_inputs(self, args):
        with pytest.raises(ValueError):
            transmittance_factor(*args)

    def test_strictly_decreasing(self):
        base = transmittance_factor(0.5, 0.7, 1.3)
        assert transmittance_factor(0.6, 0.7, 1.3) < base
        assert transmittance_factor(0.5, 0.8, 1.3) < base
        assert transmittance_factor(0.5, 0.7, 1.4) < base


class TestPhase:
    def test_isotropic(self):
        assert hg_phase(0.0, 0.37) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
        assert hg_phase(0.0, 0.37) == pytest.approx(0.0795775, abs=1e-7)

    def test_forward_peak(self):
        # (1 - 0.25) / (4 pi (1 + 0.25 - 1)^1.5) = 0.75 / (4 pi 0.125)
        assert hg_phase(0.5, 1.0) == pytest.approx(0.75 / (4 * math.pi * 0.125), rel=1e-14)
        assert hg_phase(0.5, 1.0) == pytest.approx(0.477465, abs=1e-6)

    def test_reciprocity(self):
        assert hg_phase(-0.5, -1.0) == pytest.approx(hg_phase(0.5, 1.0), rel=1e-15)

    @pytest.mark.parametrize("g", [-0.9, -0.5, 0.0, 0.5, 0.9])
    def test_normalized_over_sphere(self, g):
        val, _ = integrate.quad(lambda mu: hg_phase(g, mu), -1.0, 1.0, epsabs=1e-12, limit=200)
        assert 2 * math.pi * val == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("g", [1.0, -1.0, 1.5])
    def test_rejects_degenerate_g(self, g):
        with pytest.raises(ValueError):
            hg_phase(g, 0.0)


class TestLighting:
    def test_shadowed_is_ambient(self):
        m = medium(sun=(5, 5, 5), ambient=(0.1, 0.1, 0.2))
        np.testing.assert_allclose(lighting_term(0.0, 0.3, m), (0.1, 0.1, 0.2))

    def test_cancellation(self):
        s = 4 * math.pi
        m = medium(sun=(s, s, s))
        np.testing.assert_allclose(lighting_term(1.0, 1 / (4 * math.pi), m), (1, 1, 1), rtol=1e-14)

    def test_componentwise(self):
        m = medium(sun=(2, 2, 2), ambient=(0.1, 0, 0))
        np.testing.assert_allclose(lighting_term(0.5, 0.477465, m),
                                   (0.577465, 0.477465, 0.477465), rtol=1e-12)

    def test_vectorized(self):
        m = medium(sun=(1, 2, 3), ambient=(0.5, 0.5, 0.5))
        out = lighting_term(np.array([0.0, 1.0]), np.array([0.2, 0.2]), m)
        assert out.shape == (2, 3)
        np.testing.assert_allclose(out[1], (0.7, 0.9, 1.1))


class TestNaiveStep:
    def test_vacuum_step(self):
        c = scattering_step_naive(1.0, (1, 1, 1), 0.0, 1.0, 1.0)
        np.testing.assert_array_equal(c.delta_scattering, 0.0)
        assert c.transmittance_factor == 1.0

    def test_direct_arithmetic(self):
        c = scattering_step_naive(0.5, (1, 1, 1), 1.0, 1.0, 0.1)
        np.testing.assert_allclose(c.delta_scattering, (0.05, 0.05, 0.05), rtol=1e-14)
        assert c.transmittance_factor == pytest.approx(math.exp(-0.1), rel=1e-14)
        assert c.transmittance_factor == pytest.approx(0.904837, abs=1e-6)

    def test_linear_in_distance(self):
        full = scattering_step_naive(0.7, (1, 2, 3), 0.4, 1.5, 2.0).delta_scattering
        half = scattering_step_naive(0.7, (1, 2, 3), 0.4, 1.5, 1.0).delta_scattering
        np.testing.assert_allclose(half, full / 2, rtol=1e-15)


class TestAnalyticStep:
    def test_thin_limit(self):
        c = scattering_step_analytic(1.0, (1, 1, 1), 1e-12, 1.0, 2.0)
        np.testing.assert_allclose(c.delta_scattering, (2, 2, 2), atol=1e-9)

    def test_half_absorbed(self):
        c = scattering_step_analytic(1.0, (1, 1, 1), 1.0, 1.0, math.log(2))
        np.testing.assert_allclose(c.delta_scattering, (0.5, 0.5, 0.5), rtol=1e-14)
        assert c.transmittance_factor == pytest.approx(0.5, rel=1e-14)

    def test_no_remaining_transmittance(self):
        c = scattering_step_analytic(0.0, (3, 2, 1), 0.8, 2.0, 1.1)
        np.testing.assert_array_equal(c.delta_scattering, 0.0)

    def test_zero_density_exact(self):
        assert analytic_factor(0.0, 1.0, 3.0) == 3.0

    def test_matches_quadrature(self):
        # Independent check: integrate exp(-rho alpha x) over [0, D] numerically.
        for rho, a, d in [(0.3, 2.0, 1.5), (5.0, 0.7, 0.2), (1e-3, 0.5, 0.1)]:
            val, _ = integrate.quad(lambda x: math.exp(-rho * a * x), 0.0, d, epsabs=1e-14)
            assert analytic_factor(rho, a, d) == pytest.approx(val, rel=1e-10)

    def test_taylor_guard_continuity(self):
        d = 1.0
        below = np.nextafter(TAYLOR_EPS, 0.0)
        above = np.nextafter(TAYLOR_EPS, 1.0)
        lo = analytic_factor(below, 1.0, d)
        hi = analytic_factor(above, 1.0, d)
        assert abs(hi - lo) / lo < 1e-10

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_factor_bounds_fuzz(self, seed):
        rng = np.random.default_rng(seed)
        n = 2000
        rho = rng.exponential(2.0, n) * rng.integers(0, 2, n)
        alpha = rng.uniform(1e-3, 10.0, n)
        dist = rng.exponential(3.0, n)
        f = analytic_factor(rho, alpha, dist)
        assert np.all(f >= 0.0)
        assert np.all(f <= dist * (1 + 1e-15))


def _substep_totals(step, k, rho, alpha, dist, L=(1.0, 1.0, 1.0)):
    T = 1.0
    total = np.zeros(3)
    for _ in range(k):
        c = step(T, L, rho, alpha, dist / k)
        total += c.delta_scattering
        T *= float(c.transmittance_factor)
    return total, T


class TestSubdivision:
    @pytest.mark.parametrize("k", [2, 4, 8, 128])
    @pytest.mark.parametrize("rho,alpha,dist", [(1.0, 1.0, 1.0), (0.4, 2.5, 3.0), (3.0, 0.2, 0.7)])
    def test_analytic_is_subdivision_invariant(self, k, rho, alpha, dist):
        one, T1 = _substep_totals(scattering_step_analytic, 1, rho, alpha, dist)
        many, Tk = _substep_totals(scattering_step_analytic, k, rho, alpha, dist)
        np.testing.assert_allclose(many, one, rtol=1e-12)
        assert Tk == pytest.approx(T1, rel=1e-12)

    def test_naive_depends_on_step_length(self):
        one, _ = _substep_totals(scattering_step_naive, 1, 1.0, 1.0, 1.0)
        many, _ = _substep_totals(scattering_step_naive, 128, 1.0, 1.0, 1.0)
        assert abs(one[0] - many[0]) / many[0] > 0.01

    def test_naive_converges_to_analytic(self):
        # The two step rules share a fine limit when density is 1 (source rho*L == L).
        fine, _ = _substep_totals(scattering_step_naive, 10_000, 1.0, 1.0, 1.0)
        exact, _ = _substep_totals(scattering_step_analytic, 1, 1.0, 1.0, 1.0)
        assert abs(fine[0] - exact[0]) / exact[0] < 1e-3

    def test_density_weighted_source_converges_for_any_density(self):
        # With the source rho*L fed to the analytic rule, the limits agree for every rho.
        rho, alpha, dist = 2.5, 0.4, 1.0
        fine, _ = _substep_totals(scattering_step_naive, 10_000, rho, alpha, dist)
        exact, _ = _substep_totals(scattering_step_analytic, 1, rho, alpha, dist, L=(rho,) * 3)
        assert abs(fine[0] - exact[0]) / exact[0] < 1e-3


def test_luminance_weights():
    assert luminance((1.0, 1.0, 1.0)) == pytest.approx(1.0, abs=1e-15)
    assert luminance((0.5, 0.0, 0.0)) == pytest.approx(0.1063, abs=1e-15)


def test_medium_validation():
    with pytest.raises(ValueError):
        MediumParams(0.0, 0.0, SUN_UP, (1, 1, 1), (0, 0, 0))
    with pytest.raises(ValueError):
        MediumParams(1.0, 1.5, SUN_UP, (1, 1, 1), (0, 0, 0))
    with pytest.raises(ValueError):
        MediumParams(1.0, 0.0, (0, 2, 0), (1, 1, 1), (0, 0, 0))
    with pytest.raises(ValueError):
        MediumParams(1.0, 0.0, SUN_UP, (-1, 1, 1), (0, 0, 0))
