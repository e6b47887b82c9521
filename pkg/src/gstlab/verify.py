"""End-to-end acceptance checks with pinned seeds and tolerances.

Each check is a self-contained experiment at desk scale; `run_suite` executes
a named subset and reports one pass/fail line per criterion.  The pytest
acceptance module and the CLI ``verify`` subcommand both drive this code.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .envelopes import (EscapeCase, KappaFunction, ProfileFunction,
                        bisect_escape_constant, empirical_limsup,
                        escape_constant, integral_test_general,
                        integral_test_profile, tail_bound_check)
from .gst import (NotApplicableError, Phi0Interpolant, StationarySurvival,
                  compare_ground_states, fit_tail_model, gst_fields,
                  intrinsic_kernel, sandwich_check, stationary_density)
from .levy import DensityProfile, brownian_model, density_eval, stable_model
from .potentials import Potential, finite_well, harmonic_potential, ou_potential
from .simulate import (RngSpec, ks_critical, ks_distance, ks_distance_atoms,
                       sample_stationary, simulate_chain_ensemble,
                       simulate_sde_ensemble, stationary_cdf)
from .spectral import Grid, fk_kernel, solve_ground_state, well_eigenvalue

SEED = 0


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    runtime: float
    measured: dict = field(default_factory=dict)
    notes: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.criterion:>2} {self.name} " \
               f"({self.runtime:.1f}s) {self.notes}"


_SOLUTIONS: dict = {}


def _solution(tag: str):
    if tag in _SOLUTIONS:
        return _SOLUTIONS[tag]
    if tag == "ou1":
        sol = solve_ground_state(brownian_model(1.0), ou_potential(1.0),
                                 Grid(d=1, half_width=12.0, n=1024), n_modes=24)
    elif tag == "ou1-small":
        sol = solve_ground_state(brownian_model(1.0), ou_potential(1.0),
                                 Grid(d=1, half_width=12.0, n=512), n_modes=24)
    elif tag == "ou4":
        sol = solve_ground_state(brownian_model(1.0), ou_potential(4.0),
                                 Grid(d=1, half_width=12.0, n=512), n_modes=16)
    elif tag == "well":
        sol = solve_ground_state(brownian_model(1.0), finite_well(1.0, 1.0),
                                 Grid(d=1, half_width=24.0, n=2048), n_modes=4)
    elif tag == "stable-small":
        sol = solve_ground_state(stable_model(1, 1.0), harmonic_potential(1.0),
                                 Grid(d=1, half_width=60.0, n=1024), n_modes=24,
                                 auto_expand=False)
    elif tag == "stable-big":
        sol = solve_ground_state(stable_model(1, 1.0), harmonic_potential(1.0),
                                 Grid(d=1, half_width=400.0, n=16384), n_modes=8,
                                 auto_expand=False)
    else:
        raise KeyError(tag)
    _SOLUTIONS[tag] = sol
    return sol


def _check(criterion, name, fn) -> CheckResult:
    t0 = time.time()
    try:
        passed, measured, notes = fn()
    except Exception as exc:               # a crash is a failed criterion
        return CheckResult(criterion, name, False, time.time() - t0,
                           notes=f"error: {exc}")
    return CheckResult(criterion, name, passed, time.time() - t0,
                       measured=measured, notes=notes)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def check_ou_closed_form() -> CheckResult:
    def fn():
        sol = _solution("ou1")
        x = sol.grid.axis_nodes()
        phi_true = math.pi ** -0.25 * np.exp(-x**2 / 2.0)
        dphi = float(np.max(np.abs(sol.normalized_phi0() - phi_true)))
        dl0 = abs(sol.lambda0)
        dgap = abs(sol.spectral_gap - 1.0)
        ok = dphi <= 1e-6 and dl0 <= 1e-8 and dgap <= 1e-4
        return ok, {"max_phi_err": dphi, "lambda0": sol.lambda0,
                    "gap_err": dgap}, \
            f"|dphi|={dphi:.1e} |l0|={dl0:.1e} |gap-1|={dgap:.1e}"
    return _check(1, "OU closed form", fn)


def check_ou_envelope() -> CheckResult:
    def fn():
        tau = ProfileFunction.sqrt_log()
        rels = {}
        for gamma, tag in ((1.0, "ou1-small"), (4.0, "ou4")):
            sol = _solution(tag)
            draws = np.abs(sample_stationary(sol, 10**6, RngSpec(SEED)))
            est = empirical_limsup(draws, tau)
            rels[gamma] = est.c_hat * math.sqrt(gamma)
        ok = all(0.85 <= r <= 1.15 for r in rels.values())
        return ok, {"relative_c_hat": rels}, \
            " ".join(f"gamma={g}: {r:.3f}" for g, r in rels.items())
    return _check(2, "OU envelope constant", fn)


def check_finite_well() -> CheckResult:
    def fn():
        lam_t = well_eigenvalue(1.0, 1.0)
        sol = _solution("well")
        dlam = abs(sol.lambda0 - lam_t)
        fields = gst_fields(sol, brownian_model(1.0))
        pts = np.linspace(2.0, 6.0, 17)
        target = -math.sqrt(2.0 * abs(lam_t))
        ddrift = float(np.max(np.abs(fields.drift(pts) - target)))
        ok = dlam <= 1e-3 and ddrift <= 1e-3
        return ok, {"lambda_transcendental": lam_t, "lambda_grid": sol.lambda0,
                    "drift_err": ddrift}, \
            f"|dlam|={dlam:.1e} |ddrift|={ddrift:.1e}"
    return _check(3, "finite well eigenvalue and drift", fn)


def check_sandwich() -> CheckResult:
    def fn():
        sol = _solution("stable-big")
        rep = sandwich_check(sol, stable_model(1, 1.0), harmonic_potential(1.0))
        slope_ok = abs(rep.slope + 4.0) <= 0.3
        spread = max(rep.spread_up(), rep.spread_low())
        ok = slope_ok and spread <= 10.0
        return ok, {"slope": rep.slope, "spread_up": rep.spread_up(),
                    "spread_low": rep.spread_low()}, \
            f"slope={rep.slope:.3f} spread={spread:.2f}"
    return _check(4, "ground-state sandwich (stable + x^2)", fn)


def check_dichotomy() -> CheckResult:
    def fn():
        prof = DensityProfile(d=1, alpha=1.0, mu=0.0, beta=0.0, gamma=2.0)
        pot = Potential(family="polynomial", params={"degree": 1})
        kappa = KappaFunction.constant(1.0)
        verdicts = {}
        ok = True
        for delta, want in ((1.5, "finite"), (0.5, "divergent")):
            case = EscapeCase(kind="confining", profile=prof, poly_power=2.0,
                              delta=delta)
            cat = escape_constant(case)
            want_const = 0.0 if delta > 1 else math.inf
            ok &= cat.dichotomy and cat.constant == want_const
            for c in (0.5, 1.0, 2.0):
                rep = integral_test_profile(prof, pot, kappa, cat.tau, c=c)
                verdicts[(delta, c)] = (rep.upper.verdict, rep.lower.verdict)
                ok &= rep.upper.verdict == want and rep.lower.verdict == want
        return ok, {"verdicts": {str(k): v for k, v in verdicts.items()}}, \
            f"{len(verdicts)} classifications, no inconclusive" if ok else "mismatch"
    return _check(5, "integral-test dichotomy (L1 + polynomial)", fn)


def check_escape_constants() -> CheckResult:
    def fn():
        p2 = DensityProfile(d=1, alpha=1.0, mu=1.0, beta=0.5, gamma=1.0)
        cases = [
            ("exp-potential-dominant",
             Potential(family="exp_poly_log",
                       params={"exp_rate": 0.5, "exp_power": 1.0,
                               "poly_power": 0.0, "log_power": 0.0}),
             KappaFunction.power(1.0), ProfileFunction.log_pow(1.0),
             (2 * 0.5) ** -1.0),
            ("exp-balanced",
             Potential(family="exp_poly_log",
                       params={"exp_rate": 0.5, "exp_power": 0.5,
                               "poly_power": 0.0, "log_power": 0.0}),
             KappaFunction.power(0.5), ProfileFunction.log_pow(2.0),
             (2 * (1.0 + 0.5)) ** -2.0),
            ("intensity-dominant",
             Potential(family="polynomial", params={"degree": 1}),
             KappaFunction.power(0.5), ProfileFunction.log_pow(2.0),
             (2 * 1.0) ** -2.0),
        ]
        rels = {}
        ok = True
        for name, pot, kappa, tau, target in cases:
            def classify(c, pot=pot, kappa=kappa, tau=tau):
                rep = integral_test_profile(p2, pot, kappa, tau, c=c)
                if rep.upper.verdict != rep.lower.verdict:
                    return "inconclusive"
                return rep.upper.verdict
            c_star = bisect_escape_constant(classify)
            rels[name] = abs(c_star - target) / target
            ok &= rels[name] <= 0.05
        return ok, {"relative_errors": rels}, \
            " ".join(f"{k}:{v:.3f}" for k, v in rels.items())
    return _check(6, "closed-form escape constants", fn)


def check_tail_bounds() -> CheckResult:
    def fn():
        cases = [
            ("L1", DensityProfile(d=1, alpha=0.5, gamma=3.0),
             KappaFunction.constant(1.0)),
            ("L2", DensityProfile(d=1, alpha=0.5, mu=1.0, beta=0.5, gamma=0.0),
             KappaFunction.power(0.5)),
            ("L3", DensityProfile(d=1, alpha=0.5, mu=1.0, beta=1.0, gamma=2.0),
             KappaFunction.power(1.0)),
        ]
        results = {}
        ok = True
        for name, prof, kappa in cases:
            h = lambda r, p=prof: float(density_eval(p, r)) ** 2
            rep = tail_bound_check(h, kappa, d=1, r_range=(2.0, 50.0))
            results[name] = {"L": rep.L_holds, "U": rep.U_holds,
                             "conclusion": rep.conclusion_ok}
            ok &= rep.L_holds and rep.U_holds and rep.conclusion_ok
        return ok, results, " ".join(
            f"{k}:{'ok' if v['conclusion'] else 'bad'}" for k, v in results.items())
    return _check(7, "tail-bound conditions and conclusions (L1-L3)", fn)


def check_markov_stationarity() -> CheckResult:
    def fn():
        notes = []
        ok = True
        measured = {}
        for tag, model in (("ou1-small", brownian_model(1.0)),
                           ("stable-small", stable_model(1, 1.0))):
            sol = _solution(tag)
            kern = intrinsic_kernel(sol, t=1.0, m_modes=20)
            measured[f"{tag}_defect"] = kern.normalization_defect
            ok &= kern.normalization_defect < 1e-6
            # Chapman-Kolmogorov: u~(2t) vs the composition of u~(t)
            kern2 = intrinsic_kernel(sol, t=2.0, m_modes=20)
            p = kern.matrix * kern.stationary_weights[None, :]
            ck = float(np.max(np.abs(p @ kern.matrix - kern2.matrix)))
            measured[f"{tag}_ck_defect"] = ck
            ok &= ck < 1e-5
            # chain occupation vs phi0^2 (atoms)
            states = simulate_chain_ensemble(kern, n_steps=40, n_paths=1500,
                                             rng=RngSpec(SEED, stream=11))
            samp = states[:, 10::3].ravel()
            d_chain = ks_distance_atoms(samp, kern.grid_nodes,
                                        kern.stationary_weights)
            measured[f"{tag}_chain_ks"] = d_chain
            ok &= d_chain < ks_critical(samp.size)
            # SDE occupation vs phi0^2
            fields = gst_fields(sol, model)
            out = simulate_sde_ensemble(sol, model, fields, n_paths=300,
                                        dt=0.01, T=80.0, rng=RngSpec(SEED, stream=12))
            occ = out["states"][:, 20::3].ravel()
            d_sde = ks_distance(occ, stationary_cdf(sol))
            measured[f"{tag}_sde_ks"] = d_sde
            ok &= d_sde < ks_critical(occ.size)
            notes.append(f"{tag}: defect={kern.normalization_defect:.1e} ck={ck:.1e} "
                         f"chainKS={d_chain:.4f} sdeKS={d_sde:.4f}")
        return ok, measured, "; ".join(notes)
    return _check(8, "Markov / stationarity property suite", fn)


def check_scaling_invariance() -> CheckResult:
    def fn():
        sol = _solution("ou1-small")
        model = brownian_model(1.0)
        scaled_modes = sol.modes.copy()
        scaled_modes[:, 0] *= 7.3
        scaled = replace(sol, phi0=sol.phi0 * 7.3, modes=scaled_modes)
        worst = 0.0
        k1, k2 = intrinsic_kernel(sol, 1.0), intrinsic_kernel(scaled, 1.0)
        worst = max(worst, _rel(k1.matrix, k2.matrix))
        worst = max(worst, _rel(k1.stationary_weights, k2.stationary_weights))
        d1, d2 = stationary_density(sol), stationary_density(scaled)
        worst = max(worst, _rel(d1.values, d2.values))
        f1, f2 = gst_fields(sol, model), gst_fields(scaled, model)
        xs = np.linspace(-6, 6, 101)
        worst = max(worst, _rel(f1.drift(xs), f2.drift(xs), absolute=True))
        zs = np.linspace(-2, 2, 41)
        worst = max(worst, _rel(f1.bias(xs[:, None], zs[None, :]),
                                f2.bias(xs[:, None], zs[None, :])))
        ok = worst <= 1e-12
        return ok, {"worst_relative_change": worst}, f"worst rel change {worst:.2e}"
    return _check(9, "scaling invariance of the transform", fn)


def _rel(a, b, absolute: bool = False) -> float:
    """Sup-norm relative deviation (entries are compared against the object's
    scale, so cancellation-level entries do not masquerade as large errors)."""
    a, b = np.asarray(a), np.asarray(b)
    scale = 1.0 if absolute else max(float(np.max(np.abs(a))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def check_comparison_principle() -> CheckResult:
    def fn():
        heavy = _solution("stable-small")   # polynomial tails
        light = _solution("ou1-small")      # Gaussian tails
        rep_ok = compare_ground_states(heavy, light, c0=0.5)
        rep_bad = compare_ground_states(light, heavy, c0=0.5)
        ok = rep_ok.condition_holds and not rep_bad.condition_holds
        return ok, {"holds": rep_ok.condition_holds,
                    "reversed_holds": rep_bad.condition_holds}, \
            f"poly/gauss holds={rep_ok.condition_holds}, " \
            f"reversed={rep_bad.condition_holds}"
    return _check(10, "comparison principle precondition", fn)


ALL_CHECKS = {
    1: check_ou_closed_form,
    2: check_ou_envelope,
    3: check_finite_well,
    4: check_sandwich,
    5: check_dichotomy,
    6: check_escape_constants,
    7: check_tail_bounds,
    8: check_markov_stationarity,
    9: check_scaling_invariance,
    10: check_comparison_principle,
}

SUITES = {
    "ou": (1, 2),
    "well": (3,),
    "sandwich": (4,),
    "integral": (5, 6, 7),
    "markov": (8,),
    "invariance": (9,),
    "comparison": (10,),
    "all": tuple(range(1, 11)),
}


def run_suite(tag: str, verbose: bool = True) -> list:
    if tag not in SUITES:
        raise KeyError(f"unknown suite {tag!r}; choose from {sorted(SUITES)}")
    results = []
    for crit in SUITES[tag]:
        res = ALL_CHECKS[crit]()
        results.append(res)
        if verbose:
            print(res.line(), flush=True)
    return results
