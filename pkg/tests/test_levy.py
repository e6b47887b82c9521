import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gstlab.levy import (DensityProfile, LevyModel, brownian_model,
                         check_jump_paring, classify_profile, density_eval,
                         jump_tail_mass, levy_density, radial_levy_density,
                         relativistic_model, stable_model, symbol_eval)

# frozen oracle values (high-precision quadrature / bisection, see the
# oracle helpers below)
GENERIC_SYMBOL_L1_XI1 = 2.018250286296362      # d=1, alpha=0.5, gamma=2.5, xi=1
PARING_WORST_L1_G3 = 7.503156                  # r_grid {1,2,4,8,16}
PARING_WORST_L3 = 9.229156


def quadrature_symbol_oracle(alpha, gamma, xi):
    """Independent high-resolution oracle for the d=1 jump symbol: mpmath
    adaptive quadrature plus an oscillatory tail integral."""
    mp.mp.dps = 30
    a = mp.mpf(alpha)
    g = mp.mpf(gamma)
    near = mp.quad(lambda r: (1 - mp.cos(xi * r)) * r ** (-1 - a), [0, 1])
    tail = mp.quad(lambda r: r ** (-g), [1, mp.inf])
    osc = mp.quadosc(lambda r: mp.cos(xi * r) * r ** (-g), [1, mp.inf],
                     period=2 * mp.pi / xi)
    return float(2 * (near + tail - osc))


def paring_convolution_oracle(profile, r):
    """Independent convolution oracle: scipy quadrature over the three
    admissible segments written directly (no shared code path)."""
    f = lambda s: float(density_eval(profile, s))
    left, _ = integrate.quad(lambda y: f(r + y) * f(y), 0.5, np.inf, limit=400)
    right = left
    mid = 0.0
    if r > 1.0:
        mid, _ = integrate.quad(lambda y: f(r - y) * f(y), 0.5, r - 0.5,
                                points=[1.0, r - 1.0] if r > 1.5 else None,
                                limit=400)
    return 2 * left + mid if r > 1.0 else left + right


class TestSymbol:
    def test_zero_frequency(self):
        models = [
            brownian_model(1.0),
            stable_model(1, 1.0),
            relativistic_model(1, 1.0, mass=2.0),
            stable_model(2, 0.5, sigma2=1.0),
        ]
        for m in models:
            assert symbol_eval(m, 0.0) == 0.0

    def test_stable_closed_form(self):
        m = stable_model(1, 1.0)
        assert symbol_eval(m, 2.0) == pytest.approx(2.0, abs=1e-14)
        m2 = stable_model(2, 0.7)
        assert symbol_eval(m2, np.array([3.0, 4.0])) == pytest.approx(5.0**0.7)

    def test_diffusion_normalization(self):
        # sigma2 = 1 reproduces the Brownian generator Laplacian/2
        m = brownian_model(1.0)
        assert symbol_eval(m, 2.0) == pytest.approx(2.0)

    def test_generic_matches_quadrature_oracle(self):
        prof = DensityProfile(d=1, alpha=0.5, mu=0.0, beta=0.0, gamma=2.5)
        m = LevyModel(symbol_form="generic-from-density", density_profile=prof)
        oracle = quadrature_symbol_oracle(0.5, 2.5, 1.0)
        assert oracle == pytest.approx(GENERIC_SYMBOL_L1_XI1, rel=1e-9)
        assert symbol_eval(m, 1.0) == pytest.approx(oracle, rel=1e-6)

    def test_generic_even_and_nonnegative(self):
        prof = DensityProfile(d=1, alpha=0.8, mu=0.5, beta=0.5, gamma=1.0)
        m = LevyModel(symbol_form="generic-from-density", density_profile=prof)
        for xi in (0.3, 1.7, 6.0):
            v = symbol_eval(m, xi)
            assert v > 0
            assert symbol_eval(m, -xi) == pytest.approx(v, rel=1e-12)

    def test_generic_2d_radial(self):
        prof = DensityProfile(d=2, alpha=0.5, mu=1.0, beta=0.5, gamma=1.0)
        m = LevyModel(symbol_form="generic-from-density", density_profile=prof)
        v1 = symbol_eval(m, np.array([1.0, 0.0]))
        v2 = symbol_eval(m, np.array([0.0, 1.0]))
        assert v1 > 0
        assert v1 == pytest.approx(v2, rel=1e-8)

    def test_relativistic_small_mass_limit(self):
        xi = 1.3
        v = symbol_eval(relativistic_model(1, 1.0, mass=1e-8), xi)
        assert v == pytest.approx(xi, rel=1e-3)

    def test_symbol_nonnegative_on_grid(self):
        grid = np.linspace(-40, 40, 101)
        for m in (stable_model(1, 0.5), relativistic_model(1, 1.2, 1.0),
                  brownian_model(0.3)):
            vals = np.asarray(symbol_eval(m, grid))
            assert np.all(vals >= 0)
            assert np.allclose(vals, vals[::-1], rtol=1e-13)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            symbol_eval(stable_model(1, 1.0), np.inf)


class TestDensityProfile:
    def test_examples(self):
        assert density_eval(DensityProfile(d=1, alpha=0.5), 0.5) == \
            pytest.approx(0.5 ** -1.5)
        assert density_eval(DensityProfile(d=1, alpha=0.5, gamma=2.5), 2.0) == \
            pytest.approx(2.0 ** -2.5)
        assert density_eval(DensityProfile(d=1, alpha=0.5, mu=1.0, beta=1.0,
                                           gamma=2.0), 3.0) == \
            pytest.approx(math.exp(-3.0) / 9.0)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            density_eval(DensityProfile(d=1, alpha=0.5), 0.0)

    @given(alpha=st.floats(0.1, 1.9), mu=st.floats(0.0, 3.0),
           beta=st.floats(0.1, 1.0), gamma=st.floats(1.1, 5.0))
    @settings(max_examples=40, deadline=None)
    def test_nonincreasing(self, alpha, mu, beta, gamma):
        prof = DensityProfile(d=1, alpha=alpha, mu=mu, beta=beta, gamma=gamma)
        r = np.geomspace(1e-3, 50.0, 200)
        vals = density_eval(prof, r)
        assert np.all(np.diff(vals) <= 1e-12 * vals[:-1])

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            DensityProfile(d=1, alpha=2.0)
        with pytest.raises(ValueError):
            DensityProfile(d=0, alpha=1.0)
        with pytest.raises(ValueError):
            DensityProfile(d=1, alpha=1.0, mu=-1.0)


class TestClassification:
    @pytest.mark.parametrize("kw,expected", [
        (dict(d=1, alpha=0.5, mu=0.0, gamma=3.0), "L1"),
        (dict(d=1, alpha=0.5, mu=1.0, beta=0.5, gamma=0.0), "L2"),
        (dict(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=0.5), "UNSUPPORTED"),
        (dict(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=1.5), "L3"),
        (dict(d=1, alpha=0.5, mu=0.0, gamma=1.0), "UNSUPPORTED"),
        (dict(d=2, alpha=1.0, mu=0.0, gamma=3.0), "L1"),
        (dict(d=1, alpha=0.5, mu=1.0, beta=2.0, gamma=3.0), "UNSUPPORTED"),
    ])
    def test_examples(self, kw, expected):
        assert classify_profile(DensityProfile(**kw)) == expected

    @given(alpha=st.floats(0.1, 1.9), mu=st.floats(0.0, 2.0),
           beta=st.floats(0.0, 1.5), gamma=st.floats(0.0, 4.0))
    @settings(max_examples=60, deadline=None)
    def test_pure_and_roundtrips(self, alpha, mu, beta, gamma):
        prof = DensityProfile(d=1, alpha=alpha, mu=mu, beta=beta, gamma=gamma)
        again = DensityProfile.from_config(prof.to_config())
        assert again == prof
        assert classify_profile(again) == classify_profile(prof)


class TestLevyDensity:
    def test_stable_constant_cauchy(self):
        # the d=1 Cauchy process has nu(z) = 1 / (pi z^2)
        m = stable_model(1, 1.0)
        assert levy_density(m, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-12)
        assert levy_density(m, 2.0) == pytest.approx(1.0 / (4 * math.pi), rel=1e-12)

    def test_relativistic_matches_stable_at_origin(self):
        m = relativistic_model(1, 1.0, mass=1.0)
        s = stable_model(1, 1.0)
        r = 1e-4
        assert radial_levy_density(m, r) == pytest.approx(
            radial_levy_density(s, r), rel=1e-3)

    def test_relativistic_exponential_tail(self):
        mass = 2.0
        m = relativistic_model(1, 1.0, mass=mass)
        r = np.array([8.0, 10.0, 12.0])
        # strip the power prefactor r^-(d+alpha+1)/2 before fitting the rate
        logs = np.log(radial_levy_density(m, r)) + 1.5 * np.log(r)
        slope = np.polyfit(r, logs, 1)[0]
        assert slope == pytest.approx(-mass, rel=0.02)

    def test_diffusion_has_no_jumps(self):
        assert levy_density(brownian_model(1.0), 1.0) == 0.0

    def test_tail_mass_vs_quadrature(self):
        m = stable_model(1, 0.7)
        val, _ = integrate.quad(lambda s: radial_levy_density(m, s), 0.5, np.inf)
        assert jump_tail_mass(m, 0.5) == pytest.approx(2 * val, rel=1e-8)
        prof = DensityProfile(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=2.0)
        g = LevyModel(symbol_form="generic-from-density", density_profile=prof)
        v1, _ = integrate.quad(lambda s: float(density_eval(prof, s)), 0.25, 1.0)
        v2, _ = integrate.quad(lambda s: float(density_eval(prof, s)), 1.0, np.inf)
        assert jump_tail_mass(g, 0.25) == pytest.approx(2 * (v1 + v2), rel=1e-6)


class TestJumpParing:
    def test_l1_passes_and_matches_oracle(self):
        prof = DensityProfile(d=1, alpha=0.5, gamma=3.0)
        rep = check_jump_paring(prof, [1, 2, 4, 8, 16])
        assert rep.passed
        assert rep.worst_ratio == pytest.approx(PARING_WORST_L1_G3, rel=1e-5)
        for r, ratio in zip(rep.r_grid, rep.ratios):
            oracle = paring_convolution_oracle(prof, r) / density_eval(prof, r)
            assert ratio == pytest.approx(oracle, rel=1e-5)

    def test_l3_passes(self):
        prof = DensityProfile(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=2.0)
        rep = check_jump_paring(prof, [1, 2, 4, 8, 16])
        assert rep.passed
        assert rep.worst_ratio == pytest.approx(PARING_WORST_L3, rel=1e-5)

    def test_super_exponential_fails(self):
        prof = DensityProfile(d=1, alpha=0.5, mu=1.0, beta=2.0, gamma=0.0)
        rep = check_jump_paring(prof, [1, 2, 4])
        assert not rep.passed
        # the ratio blows up with the radius
        assert rep.ratios[2] > 100 * rep.ratios[1] > rep.ratios[0]

    def test_requires_unit_radius(self):
        with pytest.raises(ValueError):
            check_jump_paring(DensityProfile(d=1, alpha=0.5, gamma=3.0), [0.5])


class TestModelValidation:
    def test_symbol_form_guard(self):
        with pytest.raises(ValueError):
            LevyModel(symbol_form="weird")

    def test_diffusion_guards(self):
        with pytest.raises(ValueError):
            LevyModel(symbol_form="diffusion", diffusion_coeff=0.0)
        with pytest.raises(ValueError):
            LevyModel(symbol_form="stable", density_profile=None)

    def test_serialization_roundtrip(self):
        m = stable_model(1, 1.0, sigma2=0.5)
        again = LevyModel.from_config(m.to_config())
        assert again == m
        cfg = m.to_config()
        assert set(cfg) == {"family", "d", "alpha", "mu", "beta", "gamma", "sigma2"}


class TestJumpParing2d:
    def test_l1_profile_passes(self):
        prof = DensityProfile(d=2, alpha=0.5, gamma=4.0)
        rep = check_jump_paring(prof, [1.0, 2.0])
        assert rep.passed
        # frozen diagnostic values (double quadrature)
        assert rep.ratios[0] == pytest.approx(5.4525, rel=1e-2)
        assert rep.ratios[1] == pytest.approx(22.563, rel=1e-2)
