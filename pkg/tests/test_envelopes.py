import math

import numpy as np
import pytest
from scipy import integrate

from gstlab.envelopes import (EscapeCase, InconclusiveError, KappaFunction,
                              ProfileFunction, RegVarFunction,
                              UncataloguedCaseError, bisect_escape_constant,
                              classify_log_integral, conjugate_slowly_varying,
                              empirical_limsup, escape_constant,
                              integral_test_general, integral_test_profile,
                              tail_bound_check)
from gstlab.gst import StationarySurvival, fit_tail_model
from gstlab.levy import DensityProfile, density_eval
from gstlab.potentials import Potential, harmonic_potential
from gstlab.simulate import RngSpec, sample_stationary


class TestProfileFunction:
    def test_sqrt_log_values(self):
        tau = ProfileFunction.sqrt_log()
        assert tau(math.e) == pytest.approx(1.0)
        assert tau(math.exp(4.0)) == pytest.approx(2.0)

    def test_log_argument_consistency(self):
        tau = ProfileFunction.power_with_logs(7.0, [1.5])
        for r in (5.0, 50.0, 5e6):
            assert math.exp(tau.log_tau_u(math.log(r))) == pytest.approx(
                tau(r), rel=1e-12)

    def test_rejects_decreasing(self):
        with pytest.raises(ValueError):
            ProfileFunction(family="custom", func=lambda r: 1.0 / r, t_min=3.0)

    def test_power_log_monotone_past_t_min(self):
        tau = ProfileFunction.power_with_logs(5.0, [0.5])
        r = np.geomspace(tau.t_min, 1e9, 64)
        vals = tau(r)
        assert np.all(np.diff(vals) > 0)


class TestRegularVariation:
    def test_ratio_convergence(self):
        rv = RegVarFunction(index=1.5, slowly_varying=lambda r: math.log(r))
        ratios = rv.variation_ratios()
        # logarithmic slow variation converges slowly: check the trend
        for scale, arr in ratios.items():
            errs = np.abs(arr - 1.0)
            assert np.all(np.diff(errs) < 0)
            assert errs[-1] < 0.5 * errs[0]
        plain = RegVarFunction(index=2.0)
        for scale, arr in plain.variation_ratios().items():
            assert np.allclose(arr, 1.0, atol=1e-12)

    def test_conjugate_of_constant(self):
        res = conjugate_slowly_varying(lambda r: 1.0, 2.0)
        assert res.closed_form
        assert float(res.L_star(123.0)) == pytest.approx(1.0)

    def test_conjugate_of_log_numeric_inverse(self):
        # L = log with lambda = 1: conjugate behaves like 1/log, so that
        # R(R*(r)) / r -> 1 for R(r) = r log r
        with pytest.warns(RuntimeWarning):
            res = conjugate_slowly_varying(lambda r: math.log(r), 1.0)
        for r in np.geomspace(1e6, 1e12, 4):
            s = r * float(res.L_star(r))
            assert s * math.log(s) / r == pytest.approx(1.0, rel=0.02)
        # and it tracks 1/log r to leading order
        r = 1e10
        assert float(res.L_star(r)) * math.log(r) == pytest.approx(1.0, rel=0.2)


class TestClassifier:
    @pytest.mark.parametrize("name,logf,want", [
        ("power-2", lambda u: -2.0 * u, "finite"),
        ("power-1", lambda u: -u, "divergent"),
        ("power-0.8", lambda u: -0.8 * u, "divergent"),
        ("log-1.5", lambda u: -u - 1.5 * np.log(u), "finite"),
        ("log-1.0", lambda u: -u - np.log(u), "divergent"),
        ("log-0.5", lambda u: -u - 0.5 * np.log(u), "divergent"),
        ("near-critical-finite", lambda u: -1.02 * u, "finite"),
        ("dip-then-grow", lambda u: -0.999 * u - 3.0 * np.log(u), "divergent"),
        ("exponential", lambda u: -np.exp(np.minimum(u, 700.0)), "finite"),
        ("vanishing", lambda u: np.where(u > 3.0, -np.inf, 0.0), "finite"),
    ])
    def test_known_integrals(self, name, logf, want):
        cls = classify_log_integral(logf)
        assert cls.verdict == want, (name, cls.detail)

    def test_constant_profile_divergent(self):
        # constant tau keeps the inner mass constant: I = infinity
        cls = classify_log_integral(lambda u: np.full_like(u, -1.3))
        assert cls.verdict == "divergent"


@pytest.fixture(scope="module")
def survival(ou_solution):
    return StationarySurvival(ou_solution,
                              fit_tail_model(ou_solution, exp_power=2.0))


class TestGeneralIntegralTest:
    def test_gaussian_dichotomy(self, survival):
        # tau = sqrt((1 +- eps) log r) <=> scaling c = sqrt(1 +- eps)
        tau = ProfileFunction.sqrt_log()
        assert integral_test_general(survival, tau,
                                     math.sqrt(1.2)).verdict == "finite"
        assert integral_test_general(survival, tau,
                                     math.sqrt(0.8)).verdict == "divergent"

    def test_monotone_in_c(self, survival):
        tau = ProfileFunction.sqrt_log()
        verdicts = [integral_test_general(survival, tau, c).verdict
                    for c in (0.8, 1.3, 2.6, 5.0)]
        seen_finite = False
        for v in verdicts:
            if v == "finite":
                seen_finite = True
            assert not (seen_finite and v == "divergent")

    def test_bisected_constant(self, survival):
        c_star = bisect_escape_constant(
            lambda c: integral_test_general(survival,
                                            ProfileFunction.sqrt_log(), c).verdict)
        assert c_star == pytest.approx(1.0, rel=0.05)

    def test_rejects_bad_c(self, survival):
        with pytest.raises(ValueError):
            integral_test_general(survival, ProfileFunction.sqrt_log(), -1.0)


class TestProfileIntegralTest:
    def test_dichotomy(self):
        prof = DensityProfile(d=1, alpha=1.0, gamma=2.0)
        pot = Potential(family="polynomial", params={"degree": 1})
        kappa = KappaFunction.constant(1.0)
        for delta, want in ((1.5, "finite"), (1.0, "divergent"),
                            (0.5, "divergent")):
            denom = 2.0 * (prof.gamma + 2.0) - 1.0
            tau = ProfileFunction.power_with_logs(denom, [delta])
            for c in (0.5, 1.0, 2.0):
                rep = integral_test_profile(prof, pot, kappa, tau, c=c)
                assert rep.upper.verdict == want
                assert rep.lower.verdict == want

    def test_upper_bounded_by_lower(self):
        # g_up <= g_low makes the upper-envelope integrand the smaller one
        prof = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=0.5, gamma=1.0)
        pot = Potential(family="exp_poly_log",
                        params={"exp_rate": 0.5, "exp_power": 0.5,
                                "poly_power": 0.0, "log_power": 0.0})
        tau = ProfileFunction.log_pow(2.0)
        rep = integral_test_profile(prof, pot, KappaFunction.power(0.5), tau,
                                    c=0.05)
        n = min(rep.upper.n_windows, rep.lower.n_windows)
        if n:
            assert np.all(rep.upper.window_log_masses[:n]
                          <= rep.lower.window_log_masses[:n] + 1e-9)

    @pytest.mark.parametrize("case,target", [
        ("potential-dominant", 1.0),
        ("balanced", 1.0 / 9.0),
        ("intensity-dominant", 0.25),
    ])
    def test_bisected_constants(self, case, target):
        prof = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=0.5, gamma=1.0)
        if case == "potential-dominant":
            pot = Potential(family="exp_poly_log",
                            params={"exp_rate": 0.5, "exp_power": 1.0,
                                    "poly_power": 0.0, "log_power": 0.0})
            kappa, tau = KappaFunction.power(1.0), ProfileFunction.log_pow(1.0)
        elif case == "balanced":
            pot = Potential(family="exp_poly_log",
                            params={"exp_rate": 0.5, "exp_power": 0.5,
                                    "poly_power": 0.0, "log_power": 0.0})
            kappa, tau = KappaFunction.power(0.5), ProfileFunction.log_pow(2.0)
        else:
            pot = Potential(family="polynomial", params={"degree": 1})
            kappa, tau = KappaFunction.power(0.5), ProfileFunction.log_pow(2.0)

        def classify(c):
            rep = integral_test_profile(prof, pot, kappa, tau, c=c)
            return rep.upper.verdict if rep.upper.verdict == rep.lower.verdict \
                else "inconclusive"

        assert bisect_escape_constant(classify) == pytest.approx(target, rel=0.05)

    def test_decaying_intensity_constant(self):
        prof = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=0.5, gamma=1.0)
        tau = ProfileFunction.log_pow(2.0)
        kappa = KappaFunction.power(0.5)

        def classify(c):
            rep = integral_test_profile(prof, None, kappa, tau, c=c,
                                        case="decaying")
            return rep.nu_test.verdict

        assert bisect_escape_constant(classify) == pytest.approx(0.25, rel=0.05)

    def test_decaying_rate_test(self):
        prof = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=1.0, gamma=2.0)
        tau = ProfileFunction.log_pow(1.0)
        kappa = KappaFunction.power(1.0)
        lam0, theta, eps = -0.25, 1.0, 0.39   # sqrt(|lam0| + eps) = 0.8

        def classify(c):
            rep = integral_test_profile(prof, None, kappa, tau, c=c,
                                        case="decaying", lambda0=lam0,
                                        theta=theta, eps=eps)
            return rep.rate_test.verdict

        # integrand r^(-2 c theta sqrt(.)): critical c = 1/(2 theta sqrt(.))
        target = 1.0 / (2.0 * theta * math.sqrt(abs(lam0) + eps))
        assert bisect_escape_constant(classify) == pytest.approx(target, rel=0.05)

    def test_inconclusive_endpoints_raise(self):
        with pytest.raises(InconclusiveError):
            bisect_escape_constant(lambda c: "finite")


class TestEscapeCatalog:
    def test_spec_examples(self):
        p2 = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=0.5, gamma=1.0)
        ec = escape_constant(EscapeCase(kind="confining", profile=p2,
                                        exp_rate=0.7, exp_power=1.2))
        assert ec.constant == pytest.approx((2 * 0.7) ** (-1 / 1.2))
        ec = escape_constant(EscapeCase(kind="confining", profile=p2,
                                        exp_rate=0.7, exp_power=0.5))
        assert ec.constant == pytest.approx((2 * (1.0 + 0.7)) ** (-2.0))
        ec = escape_constant(EscapeCase(kind="confining", profile=p2))
        assert ec.constant == pytest.approx((2 * 1.0) ** (-2.0))

    def test_ou_and_well(self):
        ec = escape_constant(EscapeCase(kind="gst_bm_ou", gamma_ou=4.0))
        assert ec.constant == pytest.approx(0.5)
        assert ec.tau(math.exp(4.0)) == pytest.approx(2.0)
        ec = escape_constant(EscapeCase(kind="gst_bm_well", lambda0=-0.5))
        assert ec.constant == pytest.approx(1.0 / (2.0 * math.sqrt(1.0)))

    def test_dichotomy_profiles(self):
        p1 = DensityProfile(d=1, alpha=1.0, gamma=2.0)
        ec = escape_constant(EscapeCase(kind="confining", profile=p1,
                                        poly_power=2.0, delta=1.5))
        assert ec.dichotomy and ec.constant == 0.0
        # tau = (n (log n)^delta)^(1/(2(gamma+rho) - d)) with the exponent 7
        n = math.exp(9.0)
        assert ec.tau(n) == pytest.approx((n * 9.0**1.5) ** (1 / 7.0), rel=1e-9)
        ec = escape_constant(EscapeCase(kind="confining", profile=p1,
                                        poly_power=2.0, delta=0.5))
        assert ec.dichotomy and math.isinf(ec.constant)

    def test_decaying_catalog(self):
        l2 = DensityProfile(d=1, alpha=1.0, mu=2.0, beta=0.5, gamma=0.0)
        ec = escape_constant(EscapeCase(kind="decaying", profile=l2))
        assert ec.constant == pytest.approx(4.0 ** -2.0)
        l3 = DensityProfile(d=1, alpha=1.0, mu=2.0, beta=1.0, gamma=1.5)
        ec = escape_constant(EscapeCase(kind="decaying", profile=l3,
                                        low_lying=True))
        assert ec.constant == pytest.approx(0.25)
        ec = escape_constant(EscapeCase(kind="decaying", profile=l3,
                                        low_lying=False, lambda0=-0.04,
                                        theta=2.0))
        assert ec.is_lower_bound
        assert ec.constant == pytest.approx(1.0 / (2 * 2.0 * 0.2))
        l1 = DensityProfile(d=1, alpha=1.0, gamma=2.0)
        ec = escape_constant(EscapeCase(kind="decaying", profile=l1, delta=2.0))
        assert ec.dichotomy and ec.constant == 0.0

    def test_uncatalogued_rejected(self):
        bad = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=2.0, gamma=0.0)
        with pytest.raises(UncataloguedCaseError):
            escape_constant(EscapeCase(kind="confining", profile=bad))
        with pytest.raises(UncataloguedCaseError):
            escape_constant(EscapeCase(kind="gst_bm_ou", gamma_ou=0.0))
        with pytest.raises(UncataloguedCaseError):
            escape_constant(EscapeCase(kind="nonsense"))


class TestTailBoundCheck:
    @pytest.mark.parametrize("name,profile,kappa", [
        ("L1", DensityProfile(d=1, alpha=0.5, gamma=3.0),
         KappaFunction.constant(1.0)),
        ("L2", DensityProfile(d=1, alpha=0.5, mu=1.0, beta=0.5, gamma=0.0),
         KappaFunction.power(0.5)),
        ("L3", DensityProfile(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=2.0),
         KappaFunction.power(1.0)),
    ])
    def test_intensity_squares(self, name, profile, kappa):
        h = lambda r: float(density_eval(profile, r)) ** 2
        rep = tail_bound_check(h, kappa, d=1, r_range=(2.0, 50.0))
        assert rep.preconditions_ok
        assert rep.L_holds and rep.U_holds
        assert rep.conclusion_ok

    def test_exponential_exact_case(self):
        rep = tail_bound_check(lambda r: math.exp(-r), KappaFunction.power(1.0),
                               d=1, r_range=(2.0, 30.0))
        assert rep.conclusion_ok
        # the exact tail integral equals e^-r: inside both brackets
        t = integrate.quad(lambda s: math.exp(-s), 5.0, np.inf)[0]
        assert t == pytest.approx(math.exp(-5.0), rel=1e-10)

    def test_pure_power_is_tight(self):
        # h = r^-2 gamma with constant kappa: both bounds are equalities
        rep = tail_bound_check(lambda r: r ** -6.0, KappaFunction.constant(1.0),
                               d=1, r_range=(2.0, 50.0))
        assert rep.conclusion_ok
        assert rep.B1 == pytest.approx(5.0, rel=1e-4)
        assert rep.B2 == pytest.approx(5.0, rel=1e-4)

    def test_precondition_failure_flagged(self):
        rep = tail_bound_check(lambda r: 1.0 / r, KappaFunction.constant(1.0),
                               d=1, r_range=(2.0, 50.0))
        assert not rep.preconditions_ok
        assert not (rep.L_holds or rep.U_holds)


class TestEmpiricalLimsup:
    def test_ou_constant(self, ou_solution):
        draws = np.abs(sample_stationary(ou_solution, 10**6, RngSpec(0)))
        est = empirical_limsup(draws, ProfileFunction.sqrt_log())
        assert 0.85 <= est.c_hat <= 1.15
        assert est.band[0] < est.c_hat < est.band[1]

    def test_determinism(self, ou_solution):
        draws = np.abs(sample_stationary(ou_solution, 10**5, RngSpec(0)))
        tau = ProfileFunction.sqrt_log()
        a = empirical_limsup(draws, tau)
        b = empirical_limsup(draws, tau)
        assert np.array_equal(a.running_max, b.running_max)
        assert np.array_equal(a.exceedance_counts, b.exceedance_counts)

    def test_scaled_profile_stabilizes_exceedances(self, ou_solution):
        draws = np.abs(sample_stationary(ou_solution, 10**5, RngSpec(0)))
        tau = ProfileFunction.sqrt_log()
        big = ProfileFunction(family="custom",
                              func=lambda r: 10.0 * np.sqrt(np.log(r)))
        est = empirical_limsup(draws, tau, c_grid=[0.5])
        est_big = empirical_limsup(draws, big, c_grid=[0.5])
        assert est_big.exceedance_counts[0] == 0
        assert est.exceedance_counts[0] > 1000

    def test_needs_enough_samples(self, ou_solution):
        with pytest.raises(ValueError):
            empirical_limsup(np.ones(100), ProfileFunction.sqrt_log())
