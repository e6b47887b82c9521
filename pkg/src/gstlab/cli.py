"""Command-line driver: solve -> simulate -> envelope pipelines plus the
acceptance suite, with reproducible seeded outputs.

Subcommands:
    solve     spectral ground-state solve, persisted as an .npz artifact
    simulate  sample a path (chain or jump SDE) or stationary draws
    envelope  integral tests, escape constants and the empirical limsup
    report    envelope run plus all figures for the solution and samples
    verify    run a named acceptance suite; exit code 0 iff all checks pass
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import report as rpt
from .config import ConfigError, ExperimentConfig
from .envelopes import (EscapeCase, InconclusiveError, UncataloguedCaseError,
                        bisect_escape_constant, empirical_limsup,
                        escape_constant, integral_test_general)
from .gst import (NotApplicableError, StationarySurvival, default_tail_power,
                  fit_tail_model, gst_fields, intrinsic_kernel, sandwich_check)
from .simulate import (RngSpec, farm_sde_paths, sample_stationary,
                       simulate_chain, simulate_chain_ensemble, simulate_sde)
from .spectral import save_solution, solve_ground_state
from .verify import SUITES, run_suite


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (InconclusiveError, NotApplicableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gstlab",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for path farms")

    p_solve = sub.add_parser("solve", help="spectral ground-state solve")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="sample a path of the process")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_env = sub.add_parser("envelope", help="long-time envelope report")
    common(p_env)
    p_env.set_defaults(func=cmd_envelope)

    p_reportc = sub.add_parser("report", help="envelope report with figures")
    common(p_reportc)
    p_reportc.set_defaults(func=cmd_report)

    p_ver = sub.add_parser("verify", help="run an acceptance suite")
    p_ver.add_argument("suite", help=f"one of {sorted(SUITES)}")
    p_ver.add_argument("--out", default=None, help="write the verdict matrix here")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def _setup(args, command: str):
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.data["seed"] = int(args.seed)
    if args.threads is not None:
        cfg.data["threads"] = int(args.threads)
    out = Path(args.out) if args.out else Path("runs") / f"{command}-{cfg.hash()}"
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _solve(cfg: ExperimentConfig):
    model = cfg.build_model()
    potential = cfg.build_potential()
    grid = cfg.build_grid()
    s = cfg.data["solver"]
    sol = solve_ground_state(model, potential, grid, n_modes=int(s["n_modes"]),
                             auto_expand=bool(s["auto_expand"]),
                             boundary_target=float(s["boundary_target"]),
                             max_n=int(s["max_n"]))
    return model, potential, sol


def cmd_solve(args) -> int:
    cfg, out = _setup(args, "solve")
    model, potential, sol = _solve(cfg)
    digest = save_solution(sol, out / "solution.npz")
    outputs = {"solution.npz": digest}
    outputs["residual_report.json"] = rpt.write_json(out / "residual_report.json", {
        "lambda0": sol.lambda0, "lambda1": sol.lambda1,
        "spectral_gap": sol.spectral_gap, "residual": sol.residual,
        "boundary_ratio": sol.boundary_ratio, "model_hash": sol.model_hash,
        "grid": {"d": sol.grid.d, "half_width": sol.grid.half_width,
                 "n": sol.grid.n},
        "config_hash": cfg.hash(),
    })
    rpt.write_manifest(out, "solve", cfg.hash(), cfg.data, cfg.seed, outputs)
    print(f"lambda0 = {sol.lambda0:.10g}   gap = {sol.spectral_gap:.10g}   "
          f"residual = {sol.residual:.2e}")
    print(f"artifact: {out / 'solution.npz'}  (hash {digest[:12]})")
    return 0


def cmd_simulate(args) -> int:
    cfg, out = _setup(args, "simulate")
    model, potential, sol = _solve(cfg)
    sam = cfg.data["sampler"]
    rng = cfg.rng()
    outputs = {}
    if sam["kind"] == "stationary":
        draws = sample_stationary(sol, int(sam["n_samples"]), rng)
        rows = ((float(i + 1), float(v)) for i, v in enumerate(np.ravel(draws)))
        outputs["samples.csv"] = rpt.write_csv(out / "samples.csv",
                                               ["n", "x"], rows)
    elif sam["kind"] == "chain":
        kern = intrinsic_kernel(sol, t=float(sam["t_step"]))
        path = simulate_chain(kern, float(sam["x0"]), int(sam["n_steps"]), rng)
        rows = ((float(t), float(x), 0) for t, x in zip(path.times, path.states))
        outputs["path.csv"] = rpt.write_csv(out / "path.csv",
                                            ["time", "x", "n_jumps"], rows)
    elif sam["kind"] == "sde":
        fields = gst_fields(sol, model, eps_jump=sam.get("eps_jump"))
        n_paths = int(sam.get("n_paths", 1))
        if n_paths > 1:
            states = farm_sde_paths(sol, model, fields, n_paths,
                                    float(sam["dt"]), float(sam["horizon"]),
                                    rng, threads=cfg.threads)
            times = np.arange(states.shape[1], dtype=float)
            rows = ((int(p), float(times[i]), float(states[p, i]))
                    for p in range(n_paths) for i in range(states.shape[1]))
            outputs["paths.csv"] = rpt.write_csv(out / "paths.csv",
                                                 ["path", "time", "x"], rows)
        else:
            path = simulate_sde(sol, model, fields, float(sam["x0"]),
                                float(sam["dt"]), float(sam["horizon"]), rng,
                                record_dt=float(sam["dt"]),
                                record_jumps=bool(sam["record_jumps"]))
            jumps = path.jump_log
            counts = np.zeros(len(path.times), dtype=int)
            if jumps:
                acc_t = jumps["t"][jumps["accepted"]]
                counts[1:] = np.histogram(acc_t, bins=path.times)[0]
            rows = ((float(t), float(x), int(c))
                    for t, x, c in zip(path.times, path.states, counts))
            outputs["path.csv"] = rpt.write_csv(out / "path.csv",
                                                ["time", "x", "n_jumps"], rows)
            outputs["diagnostics.json"] = rpt.write_json(out / "diagnostics.json",
                                                         path.diagnostics)
    else:
        raise ConfigError(f"sampler.kind: unknown kind {sam['kind']!r}")
    rpt.write_manifest(out, "simulate", cfg.hash(), cfg.data, cfg.seed, outputs)
    print(f"wrote {', '.join(outputs)} to {out}")
    return 0


def _skeleton_samples(cfg: ExperimentConfig, sol, model):
    """|X_n| samples at integer times for the envelope study.

    The limsup dichotomy depends only on the marginal series, so envelope
    runs configured with the sde sampler fall back to the iid stationary
    surrogate (same marginals, no Euler bias).
    """
    sam = cfg.data["sampler"]
    n_max = int(cfg.data["envelope"]["n_max"])
    rng = cfg.rng(stream=3)
    if sam["kind"] in ("stationary", "sde"):
        return np.abs(sample_stationary(sol, n_max, rng))
    if sam["kind"] == "chain":
        kern = intrinsic_kernel(sol, t=1.0)
        n_paths = max(1, int(sam["n_paths"]))
        steps = int(np.ceil(n_max / n_paths))
        states = simulate_chain_ensemble(kern, steps, n_paths, rng)
        return np.abs(states[:, 1:]).ravel()[:n_max]
    raise ConfigError(f"envelope studies support sampler kinds stationary, "
                      f"chain or sde, not {sam['kind']!r}")


def cmd_envelope(args) -> int:
    return _envelope(args, figures=False)


def cmd_report(args) -> int:
    return _envelope(args, figures=True)


def _envelope(args, figures: bool) -> int:
    cfg, out = _setup(args, "report" if figures else "envelope")
    model, potential, sol = _solve(cfg)
    tau = cfg.build_profile()
    env = cfg.data["envelope"]
    outputs = {}

    values = _skeleton_samples(cfg, sol, model)
    est = empirical_limsup(values, tau, n_max=int(env["n_max"]),
                           c_grid=env["c_grid"])

    exp_power = env.get("tail_exp_power")
    if exp_power is None:
        exp_power = default_tail_power(model, potential)
    tail = fit_tail_model(sol, exp_power=exp_power)
    surv = StationarySurvival(sol, tail)
    rep = integral_test_general(surv, tau, c=1.0)
    summary = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "classification_at_c1": rep.verdict,
        "classification_detail": rep.classification.detail,
        "c_hat": est.c_hat,
        "c_hat_band": list(est.band),
        "n_max": int(env["n_max"]),
    }
    if env.get("bisect"):
        try:
            summary["c_star_bisected"] = bisect_escape_constant(
                lambda c: integral_test_general(surv, tau, c).verdict)
        except InconclusiveError as exc:
            summary["c_star_bisected"] = None
            summary["bisect_error"] = str(exc)
    cat = _catalog_constant(cfg, model, potential, sol)
    if cat is not None:
        summary["catalog_case"] = cat.case_id
        summary["catalog_constant"] = cat.constant
        summary["catalog_is_lower_bound"] = cat.is_lower_bound

    idx = rpt.subsample_indices(len(est.n))
    outputs["trace.csv"] = rpt.write_csv(
        out / "trace.csv", ["n", "ratio", "running_max"],
        ((int(est.n[i]), float(est.ratio[i]), float(est.running_max[i]))
         for i in idx))
    outputs["exceedance.csv"] = rpt.write_csv(
        out / "exceedance.csv", ["c", "count", "last_n"],
        ((float(c), int(k), int(l)) for c, k, l in
         zip(est.exceedance_c, est.exceedance_counts, est.exceedance_last)))
    outputs["summary.json"] = rpt.write_json(out / "summary.json", summary)

    if figures:
        const = summary.get("catalog_constant")
        rpt.fig_envelope_trace(est, const, out / "envelope_trace.png")
        rpt.fig_exceedances(est, out / "exceedances.png")
        rpt.fig_ground_state(sol, out / "ground_state.png")
        samp = sample_stationary(sol, 20000, cfg.rng(stream=9))
        rpt.fig_density_vs_samples(sol, samp, out / "stationary_density.png")
        outputs.update({k: "figure" for k in
                        ("envelope_trace.png", "exceedances.png",
                         "ground_state.png", "stationary_density.png")})
        if model.has_jumps:
            try:
                sw = sandwich_check(sol, model, potential)
                rpt.fig_sandwich(sw, out / "sandwich.png")
                outputs["sandwich.png"] = "figure"
                outputs["sandwich.csv"] = rpt.write_csv(
                    out / "sandwich.csv",
                    ["r", "ratio_up", "ratio_low"],
                    ((float(r), float(u), float(l)) for r, u, l in
                     zip(sw.radii, sw.ratio_up, sw.ratio_low)))
            except NotApplicableError:
                pass
    rpt.write_manifest(out, "report" if figures else "envelope", cfg.hash(),
                       cfg.data, cfg.seed, outputs)
    print(f"classification (c=1): {summary['classification_at_c1']}   "
          f"c_hat = {est.c_hat:.4g}")
    if "catalog_constant" in summary:
        print(f"catalog constant: {summary['catalog_constant']} "
              f"({summary['catalog_case']})")
    print(f"wrote {', '.join(sorted(outputs))} to {out}")
    return 0


def _catalog_constant(cfg, model, potential, sol):
    """Closed-form escape constant when the configuration matches a
    catalogued regime; None otherwise."""
    try:
        if not model.has_jumps:
            pot = cfg.data["potential"]
            if pot["family"] == "polynomial" and int(pot["degree"]) == 1:
                gamma = float(np.sqrt(2.0 * float(pot["coeff"])))
                return escape_constant(EscapeCase(kind="gst_bm_ou", gamma_ou=gamma))
            if pot["family"] == "well":
                return escape_constant(EscapeCase(kind="gst_bm_well",
                                                  lambda0=sol.lambda0))
            return None
        prof = model.density_profile
        if potential.kind == "confining":
            p = potential.params
            if potential.family == "exp_poly_log":
                case = EscapeCase(kind="confining", profile=prof,
                                  exp_rate=p["exp_rate"], exp_power=p["exp_power"],
                                  poly_power=p["poly_power"], log_power=p["log_power"])
            elif potential.family == "polynomial":
                case = EscapeCase(kind="confining", profile=prof,
                                  poly_power=2.0 * int(p["degree"]))
            else:
                return None
            return escape_constant(case)
        return escape_constant(EscapeCase(kind="decaying", profile=prof,
                                          lambda0=sol.lambda0))
    except (UncataloguedCaseError, KeyError, ValueError):
        return None


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        print(f"usage error: unknown suite {args.suite!r}; "
              f"choose from {sorted(SUITES)}", file=sys.stderr)
        return 2
    results = run_suite(args.suite)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rpt.write_json(out / "verify.json", {
            "suite": args.suite,
            "results": [{"criterion": r.criterion, "name": r.name,
                         "passed": r.passed, "runtime_s": r.runtime,
                         "measured": r.measured, "notes": r.notes}
                        for r in results],
        })
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if n_pass == len(results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
