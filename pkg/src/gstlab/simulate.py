"""Samplers for the transformed process.

Three routes to the same stationary law:
  * iid draws from the grid density phi0^2 (inverse CDF),
  * the exact discrete-time kernel chain (transition density u~(t,x,.) phi0^2),
  * an Euler scheme for the jump SDE with drift sigma^2 grad log phi0 and
    jumps proposed from nu and thinned by the ratio phi0(x+z)/phi0(x).

All samplers are driven by an RngSpec and are bit-reproducible.  Ensemble
variants run paths in lockstep with vectorized steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gst import GstFields, IntrinsicKernel, Phi0Interpolant, Window, stationary_density
from .levy import LevyModel, jump_tail_mass, radial_levy_density
from .spectral import SpectralSolution


@dataclass(frozen=True)
class RngSpec:
    """Deterministic RNG handle: (seed, stream) fixes every draw."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,)))

    def path_generator(self, path_index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed,
                                   spawn_key=(self.stream, path_index)))


@dataclass
class GstPath:
    """A sampled path with jump log and health counters."""

    times: np.ndarray
    states: np.ndarray
    jump_log: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# stationary sampling
# ---------------------------------------------------------------------------

def sample_stationary(sol: SpectralSolution, n: int, rng: RngSpec) -> np.ndarray:
    """iid draws from the normalized grid density phi0^2.

    Cell-uniform inverse CDF in d = 1; in d = 2 the first coordinate is drawn
    from its marginal and the second from the conditional row, both by
    inverse CDF.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    gen = rng.generator()
    dens = stationary_density(sol)
    h = sol.grid.spacing
    if sol.grid.d == 1:
        nodes = dens.grid_nodes
        idx, frac = _inverse_cdf(dens.node_masses, gen.random(n))
        return nodes[idx] + (frac - 0.5) * h
    m = dens.node_masses.reshape(sol.grid.n, sol.grid.n)
    row_mass = m.sum(axis=1)
    ridx, rfrac = _inverse_cdf(row_mass, gen.random(n))
    out = np.empty((n, 2))
    ax = sol.grid.axis_nodes()
    out[:, 0] = ax[ridx] + (rfrac - 0.5) * h
    cond_cum = np.cumsum(m, axis=1) / row_mass[:, None]
    u2 = gen.random(n)
    rows = cond_cum[ridx]
    cidx = np.minimum((rows < u2[:, None]).sum(axis=1), sol.grid.n - 1)
    left = np.where(cidx > 0, rows[np.arange(n), np.maximum(cidx - 1, 0)], 0.0)
    width = rows[np.arange(n), cidx] - left
    cfrac = np.where(width > 0, (u2 - left) / np.where(width > 0, width, 1.0), 0.5)
    out[:, 1] = ax[cidx] + (cfrac - 0.5) * h
    return out


def _inverse_cdf(masses: np.ndarray, u: np.ndarray):
    cum = np.cumsum(masses)
    cum = cum / cum[-1]
    idx = np.searchsorted(cum, u, side="right")
    idx = np.minimum(idx, len(masses) - 1)
    left = np.where(idx > 0, cum[idx - 1], 0.0)
    width = cum[idx] - left
    frac = np.where(width > 0, (u - left) / np.where(width > 0, width, 1.0), 0.5)
    return idx, frac


def stationary_cdf(sol: SpectralSolution):
    """Piecewise-linear CDF matching sample_stationary's law (d = 1)."""
    dens = stationary_density(sol)
    h = sol.grid.spacing
    edges = np.concatenate([dens.grid_nodes - h / 2, [dens.grid_nodes[-1] + h / 2]])
    cum = np.concatenate([[0.0], np.cumsum(dens.node_masses)])
    cum = cum / cum[-1]

    def cdf(x):
        return np.interp(x, edges, cum)

    return cdf


# ---------------------------------------------------------------------------
# kernel chain
# ---------------------------------------------------------------------------

def simulate_chain(kernel: IntrinsicKernel, x0: float, n_steps: int,
                   rng: RngSpec) -> GstPath:
    """Discrete-time chain with transition density u~(t, x, .) phi0^2(.)."""
    states = simulate_chain_ensemble(kernel, n_steps, n_paths=1, rng=rng,
                                     x0=np.array([x0]))[0]
    times = kernel.t * np.arange(n_steps + 1)
    return GstPath(times=times, states=states,
                   diagnostics={"sampler": "chain", "t_step": kernel.t})


def simulate_chain_ensemble(kernel: IntrinsicKernel, n_steps: int, n_paths: int,
                            rng: RngSpec, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Paths from the kernel chain, shape (n_paths, n_steps + 1).

    x0 = None starts every path from an independent stationary draw, making
    the chain exactly stationary.
    """
    nodes = np.asarray(kernel.grid_nodes)
    if nodes.ndim != 1:
        raise NotImplementedError("kernel chains are implemented on 1-d grids")
    gen = rng.generator()
    row_cum = np.cumsum(kernel.transition_probabilities, axis=1)
    if x0 is None:
        idx = _sample_indices(kernel.stationary_weights, gen.random(n_paths))
    else:
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,))
        idx = np.abs(nodes[None, :] - x0[:, None]).argmin(axis=1)
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = nodes[idx]
    for k in range(1, n_steps + 1):
        u = gen.random(n_paths)
        idx = (row_cum[idx] < u[:, None]).sum(axis=1)
        np.clip(idx, 0, len(nodes) - 1, out=idx)
        out[:, k] = nodes[idx]
    return out


def _sample_indices(masses: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(masses)
    cum /= cum[-1]
    return np.minimum(np.searchsorted(cum, u, side="right"), len(masses) - 1)


# ---------------------------------------------------------------------------
# jump proposals
# ---------------------------------------------------------------------------

class JumpProposalSampler:
    """Inverse-CDF sampler for |z| >= eps under nu, plus the position envelope.

    Proposals arrive at rate ``base_rate`` * B(x) where B(x) is a
    piecewise-constant majorant of sup_z phi0(x+z)/phi0(x) = phi0_max/phi0(x);
    thinning by bias/B then leaves intensity nu(z) bias(x, z) exactly (up to
    the cap ``b_cap``, violations of which are counted).
    """

    def __init__(self, model: LevyModel, eps: float, interp: Phi0Interpolant,
                 window: Window, b_cap: float = 1e6, safety: float = 1.1,
                 n_bins: int = 256):
        if not model.has_jumps:
            raise ValueError("model has no jumps")
        if model.d != 1:
            raise NotImplementedError("jump SDE sampling is implemented in d = 1")
        self.model = model
        self.eps = float(eps)
        self.base_rate = jump_tail_mass(model, self.eps)
        p = model.density_profile
        if model.symbol_form in ("stable", "sum-of-stable-and-diffusion"):
            self._alpha = p.alpha
            self._table = None
        else:
            self._alpha = None
            self._table = self._survival_table()
        # envelope bins over the certified window
        edges = np.linspace(-window.r_hi, window.r_hi, n_bins + 1)
        log_phi_max = float(np.max(interp.log_phi))
        log_b = log_phi_max + math.log(safety) - np.minimum(
            interp.log_phi0(edges[:-1]), interp.log_phi0(edges[1:]))
        self.bin_edges = edges
        self.bin_b = np.minimum(np.exp(log_b), b_cap)
        self.b_cap = b_cap

    def _survival_table(self, n: int = 400) -> tuple:
        r_hi = self.eps
        while jump_tail_mass(self.model, r_hi) > 1e-12 * self.base_rate:
            r_hi *= 2.0
            if r_hi > 1e12:
                break
        radii = np.geomspace(self.eps, r_hi, n)
        surv = np.array([jump_tail_mass(self.model, r) for r in radii]) / self.base_rate
        return radii, surv

    def envelope(self, x: np.ndarray) -> np.ndarray:
        i = np.clip(np.searchsorted(self.bin_edges, x, side="right") - 1,
                    0, len(self.bin_b) - 1)
        return self.bin_b[i]

    def sample_jumps(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """n proposal displacements z (d = 1: signed radii)."""
        u = gen.random(n)
        if self._alpha is not None:
            radii = self.eps * u ** (-1.0 / self._alpha)
        else:
            grid, surv = self._table
            radii = np.interp(u, surv[::-1], grid[::-1])
        signs = np.where(gen.random(n) < 0.5, -1.0, 1.0)
        return signs * radii


# ---------------------------------------------------------------------------
# Euler jump-SDE
# ---------------------------------------------------------------------------

def max_stable_dt(fields: GstFields, factor: float = 16.0) -> float:
    """Largest dt with drift steps below factor * spacing over the window."""
    xs = fields.nodes
    inside = np.abs(xs) <= fields.window.r_hi
    dmax = float(np.max(np.abs(fields.drift(xs[inside]))))
    h = xs[1] - xs[0]
    return factor * h / max(dmax, 1e-300)


def simulate_sde(sol: SpectralSolution, model: LevyModel, fields: GstFields,
                 x0: float, dt: float, T: float, rng: RngSpec,
                 record_dt: Optional[float] = None, b_cap: float = 1e6,
                 record_jumps: bool = True) -> GstPath:
    """Euler path of the jump SDE on [0, T]; see simulate_sde_ensemble."""
    ens = simulate_sde_ensemble(sol, model, fields, n_paths=1, dt=dt, T=T,
                                rng=rng, x0=np.array([float(x0)]),
                                record_dt=record_dt, b_cap=b_cap,
                                record_jumps=record_jumps)
    return GstPath(times=ens["times"], states=ens["states"][0],
                   jump_log=ens["jump_log"], diagnostics=ens["diagnostics"])


def simulate_sde_ensemble(sol: SpectralSolution, model: LevyModel,
                          fields: GstFields, n_paths: int, dt: float, T: float,
                          rng: RngSpec, x0: Optional[np.ndarray] = None,
                          record_dt: Optional[float] = None, b_cap: float = 1e6,
                          record_jumps: bool = False) -> dict:
    """Lockstep Euler paths of the jump SDE.

    Per step: drift sigma^2 grad log phi0 (the compensator carried by the
    drift field is exactly the mean displacement the uncompensated thinned
    jumps supply, so it is not added again) and diffusion with the effective
    sigma (small-jump second moment folded in when sigma^2 > 0); then a
    Poisson number of proposals from nu restricted to |z| >= eps_jump,
    accepted with probability bias/envelope.  States leaving the certified
    window are clamped to its edge and counted.

    x0 = None starts from iid stationary draws.  Returns a dict with
    ``times`` (recorded skeleton, spacing record_dt, default 1 time unit),
    ``states`` (n_paths, n_times), ``jump_log`` and ``diagnostics``.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of dt")
    dt_cap = max_stable_dt(fields)
    if dt > dt_cap:
        raise ValueError(f"dt = {dt} exceeds the drift-step bound {dt_cap:.3g}")
    record_dt = 1.0 if record_dt is None else float(record_dt)
    stride = max(1, int(round(record_dt / dt)))

    gen = rng.generator()
    if x0 is None:
        x = sample_stationary(sol, n_paths, rng=RngSpec(rng.seed, rng.stream + 1))
        x = np.asarray(x, dtype=float)
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,)),
                     dtype=float)

    sampler = None
    if model.has_jumps:
        sampler = JumpProposalSampler(model, fields.eps_jump, fields.interp,
                                      fields.window, b_cap=b_cap)
    sig_eff = math.sqrt(fields.effective_sigma2 * dt)
    r_hi = fields.window.r_hi
    interp = fields.interp

    n_rec = n_steps // stride + 1
    states = np.empty((n_paths, n_rec))
    states[:, 0] = x
    times = dt * stride * np.arange(n_rec)
    clamp_count = 0
    n_prop = n_acc = 0
    violations = 0
    rebuild = 0
    jl_t, jl_z, jl_acc, jl_bias, jl_env = [], [], [], [], []

    for k in range(1, n_steps + 1):
        drift = fields.sigma2 * interp.grad_log(x)
        x = x + drift * dt
        if sig_eff > 0:
            x = x + sig_eff * gen.standard_normal(n_paths)
        if sampler is not None:
            envs = sampler.envelope(x)
            counts = gen.poisson(sampler.base_rate * envs * dt)
            n_prop += int(counts.sum())
            while np.any(counts > 0):
                active = np.nonzero(counts > 0)[0]
                z = sampler.sample_jumps(gen, len(active))
                xa = x[active]
                bias = np.exp(interp.log_phi0(xa + z) - interp.log_phi0(xa))
                env_a = sampler.envelope(xa)
                over = bias > env_a
                if np.any(over):
                    violations += int(np.count_nonzero(over))
                    rebuild += 1
                    sampler.bin_b = np.minimum(sampler.bin_b * 4.0, sampler.b_cap)
                acc = gen.random(len(active)) < np.minimum(bias / env_a, 1.0)
                if record_jumps:
                    jl_t.append(np.full(len(active), k * dt))
                    jl_z.append(z)
                    jl_acc.append(acc.copy())
                    jl_bias.append(bias.copy())
                    jl_env.append(env_a.copy())
                x[active] += np.where(acc, z, 0.0)
                n_acc += int(np.count_nonzero(acc))
                counts[active] -= 1
        out = np.abs(x) > r_hi
        if np.any(out):
            clamp_count += int(np.count_nonzero(out))
            x = np.clip(x, -r_hi, r_hi)
        if k % stride == 0:
            states[:, k // stride] = x

    jump_log = {}
    if record_jumps and jl_t:
        jump_log = {"t": np.concatenate(jl_t), "z": np.concatenate(jl_z),
                    "accepted": np.concatenate(jl_acc),
                    "bias": np.concatenate(jl_bias),
                    "envelope": np.concatenate(jl_env)}
    diagnostics = {
        "sampler": "sde", "dt": dt, "eps_jump": fields.eps_jump,
        "clamp_count": clamp_count, "max_abs_state": float(np.max(np.abs(states))),
        "n_proposals": n_prop, "n_accepted": n_acc,
        "envelope_violations": violations, "envelope_rebuilds": rebuild,
        "neglected_drift_bound": fields.neglected_drift_bound,
        "effective_sigma2": fields.effective_sigma2,
    }
    return {"times": times, "states": states, "jump_log": jump_log,
            "diagnostics": diagnostics}


def farm_sde_paths(sol: SpectralSolution, model: LevyModel, fields: GstFields,
                   n_paths: int, dt: float, T: float, rng: RngSpec,
                   threads: int = 1, chunk: int = 64, **kw) -> np.ndarray:
    """Run an SDE path farm in fixed chunks, optionally across worker threads.

    Each chunk of ``chunk`` paths gets its own derived stream, so the result
    is bit-identical for any thread count.  Returns the recorded states,
    shape (n_paths, n_times).
    """
    import concurrent.futures as cf

    chunks = [(i, min(chunk, n_paths - i * chunk))
              for i in range((n_paths + chunk - 1) // chunk)]

    def run(index_size):
        idx, size = index_size
        out = simulate_sde_ensemble(sol, model, fields, n_paths=size, dt=dt,
                                    T=T, rng=RngSpec(rng.seed, rng.stream
                                                     + 1000003 * (idx + 1)), **kw)
        return idx, out["states"]

    results = [None] * len(chunks)
    if threads > 1:
        with cf.ThreadPoolExecutor(max_workers=threads) as pool:
            for idx, states in pool.map(run, chunks):
                results[idx] = states
    else:
        for pair in chunks:
            idx, states = run(pair)
            results[idx] = states
    return np.vstack(results)


# ---------------------------------------------------------------------------
# two-sample / one-sample KS helpers
# ---------------------------------------------------------------------------

def ks_distance(samples: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a callable CDF."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(s)
    f = np.asarray(cdf(s), dtype=float)
    dplus = np.max(np.arange(1, n + 1) / n - f)
    dminus = np.max(f - np.arange(0, n) / n)
    return float(max(dplus, dminus))


def ks_distance_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / len(a)
    fb = np.searchsorted(b, allv, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value (1.628 / sqrt(n) at 1%)."""
    coef = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}[level]
    return coef / math.sqrt(n)


def ks_distance_atoms(samples: np.ndarray, nodes: np.ndarray,
                      masses: np.ndarray) -> float:
    """KS statistic between samples supported on grid atoms and the atomic
    target law: sup over atoms of |empirical CDF - target CDF| evaluated at
    the atoms (the continuous-case formula would count the atom jump itself
    as discrepancy)."""
    order = np.argsort(nodes)
    nd, ms = nodes[order], masses[order]
    cum = np.cumsum(ms)
    cum /= cum[-1]
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    emp = np.searchsorted(s, nd, side="right") / len(s)
    return float(np.max(np.abs(emp - cum)))


def grid_atom_cdf(kernel_nodes: np.ndarray, masses: np.ndarray):
    """Right-continuous CDF of the atomic grid distribution (chain marginals)."""
    order = np.argsort(kernel_nodes)
    nodes = kernel_nodes[order]
    cum = np.cumsum(masses[order])
    cum /= cum[-1]

    def cdf(x):
        idx = np.searchsorted(nodes, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    return cdf
