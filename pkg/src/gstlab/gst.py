"""Ground-state transform: intrinsic kernel, stationary density, drift and
jump-bias fields, tail sandwich and comparison diagnostics.

Given the ground state phi0 of H = -L + V at eigenvalue lambda0, the
transformed process is the stationary Markov process with transition kernel

    u~(t, x, y) = exp(lambda0 t) u(t, x, y) / (phi0(x) phi0(y))

against the stationary measure phi0^2 dx.  Its generator carries the drift
sigma^2 grad log phi0 plus a small-jump compensator, and jumps with the
position-dependent intensity nu(z) phi0(x+z)/phi0(x).

Every constructor here renormalizes phi0 internally, so all outputs are
invariant under rescaling the stored ground state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .levy import LevyModel, radial_levy_density
from .potentials import Potential, unit_ball_envelope
from .spectral import SpectralSolution, _mode_norms


class GstError(RuntimeError):
    pass


class NotApplicableError(ValueError):
    """Operation rejected: precondition on the model/potential fails."""


# ---------------------------------------------------------------------------
# interpolation of the ground state
# ---------------------------------------------------------------------------

class Phi0Interpolant:
    """Log-linear interpolation of phi0 (linear in log phi0, positive by
    construction), with log-linear extrapolation beyond the grid."""

    def __init__(self, sol_or_nodes, log_phi: Optional[np.ndarray] = None):
        if log_phi is None:
            sol = sol_or_nodes
            if sol.grid.d != 1:
                raise NotImplementedError("interpolation implemented for d = 1")
            self.x = sol.grid.axis_nodes()
            self.log_phi = np.log(sol.normalized_phi0())
        else:
            self.x = np.asarray(sol_or_nodes, dtype=float)
            self.log_phi = np.asarray(log_phi, dtype=float)
        self.h = float(self.x[1] - self.x[0])
        # one-sided slopes for extrapolation
        self._slope_lo = (self.log_phi[1] - self.log_phi[0]) / self.h
        self._slope_hi = (self.log_phi[-1] - self.log_phi[-2]) / self.h
        # central-difference derivative of log phi0 at the nodes
        self._dlog = np.gradient(self.log_phi, self.h)

    def log_phi0(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x[0], self.x[-1]
        out = np.interp(x, self.x, self.log_phi)
        out = np.where(x < lo, self.log_phi[0] + (x - lo) * self._slope_lo, out)
        out = np.where(x > hi, self.log_phi[-1] + (x - hi) * self._slope_hi, out)
        return out if out.ndim else float(out)

    def phi0(self, x):
        return np.exp(self.log_phi0(x))

    def grad_log(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x, self._dlog)
        out = np.where(x < self.x[0], self._slope_lo, out)
        out = np.where(x > self.x[-1], self._slope_hi, out)
        return out if out.ndim else float(out)

    def bias(self, x, z):
        """phi0(x + z) / phi0(x); satisfies bias(x, 0) = 1 and the cocycle
        bias(x, z) bias(x+z, z') = bias(x, z+z') exactly."""
        return np.exp(self.log_phi0(np.asarray(x) + np.asarray(z)) - self.log_phi0(x))


# ---------------------------------------------------------------------------
# certified window
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    r_lo: float
    r_hi: float

    def contains(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (r >= self.r_lo) & (r <= self.r_hi)


def certified_window(sol: SpectralSolution, factor: float = 1e3,
                     mass_quantile: float = 0.99) -> Window:
    """Radial window where grid tail values are trusted.

    The outer edge is the largest radius at which phi0 still exceeds
    ``factor`` times the boundary value (beyond it, truncation noise
    dominates); the inner edge is the radius holding ``mass_quantile`` of the
    stationary mass (inside it, the tail regime has not set in).
    """
    phi = sol.normalized_phi0()
    r = sol.grid.node_radii()
    masses = phi**2 * sol.grid.spacing**sol.grid.d
    order = np.argsort(r)
    cum = np.cumsum(masses[order])
    r_lo = float(r[order][np.searchsorted(cum, mass_quantile * cum[-1])])
    boundary = sol.boundary_ratio * float(np.max(phi))
    ok = phi >= factor * boundary
    if not np.any(ok):
        raise GstError("no certified radii: boundary contamination everywhere")
    r_hi = float(np.max(r[ok]))
    if r_hi <= r_lo:
        raise GstError(f"certified window empty: r_lo={r_lo:.3g} >= r_hi={r_hi:.3g}")
    return Window(r_lo=r_lo, r_hi=r_hi)


# ---------------------------------------------------------------------------
# intrinsic kernel and stationary density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntrinsicKernel:
    """Transition kernel of the transformed process at time step t.

    ``matrix`` is u~(t, x_i, y_j); ``stationary_weights`` are phi0^2(y_j) h^d
    (summing to 1), so each row of matrix * weights is a probability vector
    up to ``normalization_defect``.
    """

    t: float
    matrix: np.ndarray
    stationary_weights: np.ndarray
    grid_nodes: np.ndarray
    normalization_defect: float
    m_modes: int

    @property
    def transition_probabilities(self) -> np.ndarray:
        p = np.clip(self.matrix * self.stationary_weights[None, :], 0.0, None)
        return p / p.sum(axis=1, keepdims=True)


def intrinsic_kernel(sol: SpectralSolution, t: float,
                     m_modes: Optional[int] = None,
                     defect_tol: float = 1e-4) -> IntrinsicKernel:
    """u~ = exp(lambda0 t) u / (phi0 x phi0), assembled spectrally.

    Raises GstError if the Markov-normalization defect exceeds defect_tol
    (grid or mode count insufficient for this t).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    avail = sol.modes.shape[1]
    m = avail if m_modes is None else int(m_modes)
    if m > avail:
        raise ValueError(f"m_modes = {m} exceeds available eigenpairs ({avail})")
    modes = sol.modes[:, :m] / _mode_norms(sol)[None, :m]
    phi0 = modes[:, 0]
    lam = sol.eigenvalues[:m] - sol.lambda0
    ratios = modes / phi0[:, None]
    mat = (ratios * np.exp(-lam * t)[None, :]) @ ratios.T
    mat = 0.5 * (mat + mat.T)      # symmetric by detailed balance
    h = sol.grid.spacing**sol.grid.d
    weights = phi0**2 * h
    weights = weights / weights.sum()
    defect = float(np.max(np.abs(mat @ weights - 1.0)))
    if defect > defect_tol:
        raise GstError(f"kernel normalization defect {defect:.2e} exceeds {defect_tol:.0e}; "
                       "increase the grid or mode count, or raise t")
    return IntrinsicKernel(t=t, matrix=mat, stationary_weights=weights,
                           grid_nodes=sol.grid.nodes(), normalization_defect=defect,
                           m_modes=m)


@dataclass(frozen=True)
class StationaryDensity:
    values: np.ndarray       # phi0^2, normalized to unit total mass on the grid
    node_masses: np.ndarray  # values * h^d, summing to exactly 1
    grid_nodes: np.ndarray


def stationary_density(sol: SpectralSolution) -> StationaryDensity:
    phi = sol.normalized_phi0()
    h = sol.grid.spacing**sol.grid.d
    dens = phi**2
    total = float(np.sum(dens) * h)
    dens = dens / total
    masses = dens * h
    masses = masses / masses.sum()
    return StationaryDensity(values=dens, node_masses=masses,
                             grid_nodes=sol.grid.nodes())


# ---------------------------------------------------------------------------
# drift / bias fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GstFields:
    """Drift and jump-bias fields of the transformed process.

    drift(x) = sigma^2 (log phi0)'(x) + int_{eps<=|z|<=1} (bias(x,z) - 1) z nu(z) dz.

    The compensator integral is tabulated on the grid nodes; the part below
    eps_jump is dropped, its first-order effect bounded by
    ``neglected_drift_bound`` (folded into ``effective_sigma2`` as a diffusion
    correction when sigma^2 > 0).
    """

    sigma2: float
    interp: Phi0Interpolant
    jump_drift_nodes: Optional[np.ndarray]
    nodes: np.ndarray
    eps_jump: float
    small_jump_m2: float
    neglected_drift_bound: float
    window: Window

    @property
    def effective_sigma2(self) -> float:
        return self.sigma2 + (self.small_jump_m2 if self.sigma2 > 0 else 0.0)

    def grad_log_phi0(self, x):
        return self.interp.grad_log(x)

    def jump_drift(self, x):
        if self.jump_drift_nodes is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes, self.jump_drift_nodes)
        return out if out.ndim else float(out)

    def drift(self, x):
        out = self.sigma2 * self.interp.grad_log(x) + self.jump_drift(x)
        return out if np.ndim(out) else float(out)

    def bias(self, x, z):
        return self.interp.bias(x, z)


def gst_fields(sol: SpectralSolution, model: LevyModel,
               eps_jump: Optional[float] = None, quad_points: int = 96) -> GstFields:
    """Build the drift/bias fields from a 1-d solution."""
    if sol.grid.d != 1:
        raise NotImplementedError("fields are implemented for d = 1")
    interp = Phi0Interpolant(sol)
    nodes = sol.grid.axis_nodes()
    eps = sol.grid.spacing if eps_jump is None else float(eps_jump)
    jump_nodes = None
    m2 = 0.0
    if model.has_jumps:
        if eps < 1.0:
            z, w = np.polynomial.legendre.leggauss(quad_points)
            z = 0.5 * (z + 1.0) * (1.0 - eps) + eps
            w = 0.5 * w * (1.0 - eps)
            nu = radial_levy_density(model, z)
            # symmetric pair +-z: (bias(x,z)-1) z - (bias(x,-z)-1) z
            up = interp.bias(nodes[:, None], z[None, :])
            dn = interp.bias(nodes[:, None], -z[None, :])
            jump_nodes = ((up - dn) * (w * nu * z)[None, :]).sum(axis=1)
        else:
            jump_nodes = np.zeros_like(nodes)
        m2 = _small_jump_second_moment(model, eps)
    slope_cap = float(np.max(np.abs(interp._dlog)))
    return GstFields(sigma2=model.diffusion_coeff, interp=interp,
                     jump_drift_nodes=jump_nodes, nodes=nodes, eps_jump=eps,
                     small_jump_m2=m2, neglected_drift_bound=m2 * slope_cap,
                     window=certified_window(sol))


def _small_jump_second_moment(model: LevyModel, eps: float) -> float:
    """int_{|z| < eps} z^2 nu(z) dz in d = 1."""
    if not model.has_jumps or eps <= 0:
        return 0.0
    z, w = np.polynomial.legendre.leggauss(64)
    z = 0.5 * (z + 1.0) * min(eps, 1.0)
    w = 0.5 * w * min(eps, 1.0)
    return float(2.0 * np.sum(w * z**2 * radial_levy_density(model, z)))


# ---------------------------------------------------------------------------
# binary export of the transform products
# ---------------------------------------------------------------------------

def save_kernel(kernel: IntrinsicKernel, path) -> str:
    """Persist an intrinsic kernel to .npz with a content hash."""
    digest = _arrays_digest(kernel.matrix, kernel.stationary_weights,
                            kernel.grid_nodes)
    np.savez(path, t=kernel.t, matrix=kernel.matrix,
             stationary_weights=kernel.stationary_weights,
             grid_nodes=kernel.grid_nodes,
             normalization_defect=kernel.normalization_defect,
             m_modes=kernel.m_modes, content_hash=np.bytes_(digest.encode()))
    return digest


def load_kernel(path) -> IntrinsicKernel:
    with np.load(path) as z:
        kern = IntrinsicKernel(
            t=float(z["t"]), matrix=z["matrix"],
            stationary_weights=z["stationary_weights"],
            grid_nodes=z["grid_nodes"],
            normalization_defect=float(z["normalization_defect"]),
            m_modes=int(z["m_modes"]))
        stored = bytes(z["content_hash"]).decode()
    digest = _arrays_digest(kern.matrix, kern.stationary_weights, kern.grid_nodes)
    if digest != stored:
        raise IOError("kernel artifact content hash mismatch")
    return kern


def save_fields(fields: GstFields, path) -> str:
    """Persist the drift/bias fields to .npz with a content hash."""
    jd = fields.jump_drift_nodes if fields.jump_drift_nodes is not None \
        else np.array([])
    digest = _arrays_digest(fields.nodes, fields.interp.log_phi, jd)
    np.savez(path, sigma2=fields.sigma2, nodes=fields.nodes,
             log_phi=fields.interp.log_phi, jump_drift=jd,
             eps_jump=fields.eps_jump, small_jump_m2=fields.small_jump_m2,
             neglected_drift_bound=fields.neglected_drift_bound,
             window=np.array([fields.window.r_lo, fields.window.r_hi]),
             content_hash=np.bytes_(digest.encode()))
    return digest


def load_fields(path) -> GstFields:
    with np.load(path) as z:
        nodes = z["nodes"]
        jd = z["jump_drift"]
        fields = GstFields(
            sigma2=float(z["sigma2"]),
            interp=Phi0Interpolant(nodes, z["log_phi"]),
            jump_drift_nodes=None if jd.size == 0 else jd,
            nodes=nodes, eps_jump=float(z["eps_jump"]),
            small_jump_m2=float(z["small_jump_m2"]),
            neglected_drift_bound=float(z["neglected_drift_bound"]),
            window=Window(*map(float, z["window"])))
        stored = bytes(z["content_hash"]).decode()
    digest = _arrays_digest(fields.nodes, fields.interp.log_phi,
                            jd if jd.size else np.array([]))
    if digest != stored:
        raise IOError("fields artifact content hash mismatch")
    return fields


def _arrays_digest(*arrays) -> str:
    import hashlib
    hasher = hashlib.sha256()
    for arr in arrays:
        hasher.update(np.ascontiguousarray(arr).tobytes())
    return hasher.hexdigest()


# ---------------------------------------------------------------------------
# sandwich and comparison diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    radii: np.ndarray
    ratio_up: np.ndarray     # phi0 (1 v V_up) / (1 ^ nu): bounded below
    ratio_low: np.ndarray    # phi0 (1 v V_low) / (1 ^ nu): bounded above
    slope: float
    window: Window
    case: str                # "confining" or "decaying"
    theta_fit: Optional[float] = None
    eps_shift: Optional[float] = None

    def spread_up(self) -> float:
        return float(np.max(self.ratio_up) / np.min(self.ratio_up))

    def spread_low(self) -> float:
        return float(np.max(self.ratio_low) / np.min(self.ratio_low))


def sandwich_check(sol: SpectralSolution, model: LevyModel, potential: Potential,
                   n_r: int = 48, window: Optional[Window] = None,
                   eps_shift: float = 0.1) -> SandwichReport:
    """Two-sided ground-state tail check against (1 ^ nu) / (1 v V).

    Confining case: reports phi0 (1 v V_up/low) / (1 ^ nu) over the certified
    window (bounded iff the sandwich holds) and the fitted log-log slope of
    phi0.  Decaying case: reports phi0 / (1 ^ nu) and, for exponentially
    localized intensities near the continuum edge, the best-fit rate theta in
    exp(-theta sqrt(|lambda0| + eps) r) rather than asserting one.
    """
    if not model.has_jumps:
        raise NotApplicableError("sandwich bounds concern jump models; "
                                 "a pure diffusion has nu = 0")
    win = window or certified_window(sol)
    interp = Phi0Interpolant(sol)
    radii = np.geomspace(max(win.r_lo, 1.05), win.r_hi, n_r)
    # shell value of phi0: average the two sides in d = 1
    log_phi = 0.5 * (interp.log_phi0(radii) + interp.log_phi0(-radii))
    nu = radial_levy_density(model, radii)
    slope = float(np.polyfit(np.log(radii), log_phi, 1)[0])
    if potential.kind == "confining":
        v_up = np.array([unit_ball_envelope(potential, r).v_up for r in radii])
        v_low = np.array([unit_ball_envelope(potential, r).v_low for r in radii])
        ratio_up = np.exp(log_phi) * np.maximum(1.0, v_up) / np.minimum(1.0, nu)
        ratio_low = np.exp(log_phi) * np.maximum(1.0, v_low) / np.minimum(1.0, nu)
        return SandwichReport(radii=radii, ratio_up=ratio_up, ratio_low=ratio_low,
                              slope=slope, window=win, case="confining")
    if sol.lambda0 >= 0:
        raise NotApplicableError("decaying sandwich needs a bound state (lambda0 < 0)")
    ratio = np.exp(log_phi) / np.minimum(1.0, nu)
    # best-fit exponential rate of phi0 against sqrt(|lambda0| + eps) r
    rate = -float(np.polyfit(radii, log_phi, 1)[0])
    theta = rate / math.sqrt(abs(sol.lambda0) + eps_shift)
    return SandwichReport(radii=radii, ratio_up=ratio, ratio_low=ratio,
                          slope=slope, window=win, case="decaying",
                          theta_fit=theta, eps_shift=eps_shift)


@dataclass(frozen=True)
class ComparisonEntry:
    c: float
    min_ratio: float
    outer_slope: float
    holds: bool


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple
    condition_holds: bool
    skipped_c: tuple = ()


def compare_ground_states(sol1: SpectralSolution, sol2: SpectralSolution,
                          c0: float, n_r: int = 64,
                          slope_tol: float = -0.5) -> ComparisonReport:
    """Check liminf phi0_1(c x) / phi0_2(x) > 0 for c in {c0, 2 c0, 4 c0}.

    The ratio is evaluated over sol2's certified window (restricted so c x
    stays inside sol1's window); the condition is read as holding when the
    fitted log-log slope of the ratio over the outer half of the window does
    not head to zero (slope >= slope_tol) and the minimum stays positive.
    """
    if sol1.grid.d != sol2.grid.d:
        raise ValueError("solutions must share the dimension")
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    w1, w2 = certified_window(sol1), certified_window(sol2)
    i1, i2 = Phi0Interpolant(sol1), Phi0Interpolant(sol2)
    entries = []
    skipped = []
    for c in (c0, 2.0 * c0, 4.0 * c0):
        r_hi = min(w2.r_hi, w1.r_hi / c)
        r_lo = max(w2.r_lo, w1.r_lo / c, 1e-6)
        if r_hi <= r_lo * 1.2:
            skipped.append(c)      # this dilation leaves no certified overlap
            continue
        radii = np.geomspace(r_lo, r_hi, n_r)
        log_ratio = (0.5 * (i1.log_phi0(c * radii) + i1.log_phi0(-c * radii))
                     - 0.5 * (i2.log_phi0(radii) + i2.log_phi0(-radii)))
        outer = radii >= radii[n_r // 2]
        slope = float(np.polyfit(np.log(radii[outer]), log_ratio[outer], 1)[0])
        min_ratio = float(np.exp(np.min(log_ratio)))
        entries.append(ComparisonEntry(c=c, min_ratio=min_ratio, outer_slope=slope,
                                       holds=slope >= slope_tol and min_ratio > 0))
    if not entries:
        raise GstError(f"windows incompatible at every c in "
                       f"{(c0, 2 * c0, 4 * c0)}")
    return ComparisonReport(entries=tuple(entries),
                            condition_holds=all(e.holds for e in entries),
                            skipped_c=tuple(skipped))


# ---------------------------------------------------------------------------
# analytic tail extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailModel:
    """Fitted tail of the ground state: log phi0(r) = c0 + c1 log r - c2 r^p.

    Used to extend phi0^2 integrals beyond the grid; the exponent p comes
    from the model/potential family (p = None fits a pure power law).
    """

    c0: float
    c1: float
    c2: float
    p: float
    d: int
    r_fit: float          # radius where the fit takes over
    log_match: float      # log of empirical survival at r_fit
    surface: float

    def log_phi0(self, r):
        r = np.asarray(r, dtype=float)
        out = self.c0 + self.c1 * np.log(r) - self.c2 * r**self.p
        return out if out.ndim else float(out)

    def log_shell_density(self, r):
        """log of phi0^2(r) r^(d-1) * surface."""
        return 2.0 * self.log_phi0(r) + (self.d - 1) * np.log(r) + math.log(self.surface)

    def log_survival_raw(self, rho):
        """Asymptotic log of int_rho^inf phi0^2 s^(d-1) ds (Watson lemma form:
        integrand / |d log integrand / ds| at the endpoint)."""
        return self.log_survival_raw_from_log(np.log(np.asarray(rho, dtype=float)))

    def log_survival_raw_from_log(self, log_rho):
        """Same, taking log rho; safe for radii far beyond float range."""
        log_rho = np.asarray(log_rho, dtype=float)
        with np.errstate(over="ignore"):
            log_phi = self.c0 + self.c1 * log_rho \
                - self.c2 * np.exp(np.minimum(self.p * log_rho, 709.0))
        log_shell = 2.0 * log_phi + (self.d - 1) * log_rho + math.log(self.surface)
        a = 2.0 * self.c1 + self.d - 1          # w' = a / rho - b rho^(p-1)
        b = 2.0 * self.c2 * self.p
        if b > 0.0:
            log_wp = math.log(b) + (self.p - 1.0) * log_rho
            with np.errstate(over="ignore", invalid="ignore"):
                ratio = a / b * np.exp(np.clip(-self.p * log_rho, -700.0, 700.0))
            log_wp = log_wp + np.log(np.maximum(np.abs(1.0 - ratio), 1e-300))
        else:
            log_wp = math.log(max(abs(a), 1e-300)) - log_rho
        out = log_shell - log_wp
        return out if np.ndim(out) else float(out)


def default_tail_power(model: LevyModel, potential: Optional[Potential]) -> Optional[float]:
    """Exponent p for the ground-state tail model log phi0 ~ -c r^p, from
    the model/potential family: the stretched-exponential rate of the jump
    intensity and the potential growth dominate; pure power tails (heavy
    jumps, no exponential confinement) return None."""
    p = 0.0
    if model.has_jumps and model.density_profile.mu > 0:
        p = max(p, model.density_profile.beta)
    if potential is not None and potential.kind == "confining":
        fam = potential.params
        if potential.family == "exp_poly_log" and fam.get("exp_rate", 0.0) > 0:
            p = max(p, fam["exp_power"])
        elif not model.has_jumps:
            if potential.family == "polynomial":
                p = max(p, int(fam["degree"]) + 1.0)
            elif potential.family == "double_well":
                p = max(p, 3.0)
    elif potential is not None and not model.has_jumps:
        p = max(p, 1.0)    # bound state of a diffusion: exponential tail
    return p if p > 0 else None


def fit_tail_model(sol: SpectralSolution, exp_power: Optional[float] = None,
                   window: Optional[Window] = None) -> TailModel:
    """Least-squares fit of the ground-state tail on the certified window."""
    win = window or certified_window(sol)
    interp = Phi0Interpolant(sol)
    radii = np.geomspace(max(win.r_lo, 1e-3), win.r_hi, 200)
    log_phi = 0.5 * (interp.log_phi0(radii) + interp.log_phi0(-radii))
    c2, p = 0.0, 2.0
    if exp_power is not None:
        p = float(exp_power)
        a = np.stack([np.ones_like(radii), np.log(radii), -radii**p], axis=1)
        coef, *_ = np.linalg.lstsq(a, log_phi, rcond=None)
        c0, c1, c2 = map(float, coef)
    if exp_power is None or c2 < 0:
        coef = np.polyfit(np.log(radii), log_phi, 1)
        c0, c1, c2 = float(coef[1]), float(coef[0]), 0.0
    surface = 2.0 if sol.grid.d == 1 else 2.0 * math.pi
    model = TailModel(c0=c0, c1=c1, c2=c2, p=p, d=sol.grid.d,
                      r_fit=win.r_hi, log_match=0.0, surface=surface)
    # integrability guard for the pure-power branch
    if model.c2 == 0.0 and 2 * model.c1 + sol.grid.d >= -0.0:
        raise GstError("fitted tail is not square integrable; supply exp_power")
    return model


class StationarySurvival:
    """log of S(rho) = phi0^2-mass of {|x| >= rho}: empirical on the grid
    (piecewise linear in rho, matching the cell-uniform stationary law),
    analytic (TailModel) beyond the certified window, stitched continuously."""

    def __init__(self, sol: SpectralSolution, tail: TailModel):
        dens = stationary_density(sol)
        if sol.grid.d == 1:
            # fold the cell-uniform law onto radii: each cell [x-h/2, x+h/2]
            # spreads its mass uniformly over [a, b] in |x|; the folded
            # density is piecewise constant and S is its reverse integral,
            # accumulated tail-inward so deep-tail values keep precision
            h = sol.grid.spacing
            edges = np.concatenate([dens.grid_nodes - h / 2,
                                    [dens.grid_nodes[-1] + h / 2]])
            knots = np.unique(np.concatenate([np.abs(edges), [0.0]]))
            mids = 0.5 * (knots[:-1] + knots[1:])
            n_cells = len(dens.values)

            def cell_value(x):
                i = np.searchsorted(edges, x, side="right") - 1
                ok = (i >= 0) & (i < n_cells)
                return np.where(ok, dens.values[np.clip(i, 0, n_cells - 1)], 0.0)

            g = cell_value(mids) + cell_value(-mids)   # folded density
            seg = g * np.diff(knots)
            surv = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            self.r_sorted = knots
            self.surv = surv
        else:
            r = np.linalg.norm(dens.grid_nodes, axis=-1)
            order = np.argsort(r)
            self.r_sorted = r[order]
            self.surv = np.cumsum(dens.node_masses[order][::-1])[::-1]
        self.tail = tail
        self.r_fit = tail.r_fit
        emp = self._empirical(self.r_fit)
        if emp <= 0:
            raise GstError("empirical survival vanished inside the certified "
                           "window; refine the grid")
        self.log_stitch = math.log(emp) - tail.log_survival_raw(self.r_fit)

    def _empirical(self, rho) -> float:
        return float(np.interp(rho, self.r_sorted, self.surv))

    def log_survival(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        inside = rho <= self.r_fit
        if np.any(inside):
            with np.errstate(divide="ignore"):
                out[inside] = np.log(np.interp(rho[inside], self.r_sorted,
                                               self.surv))
        if np.any(~inside):
            out[~inside] = self.log_stitch + self.tail.log_survival_raw(rho[~inside])
        return out if out.shape != (1,) else float(out[0])

    def log_survival_from_log(self, log_rho):
        """log S at log radii; radii beyond float range use the tail model."""
        log_rho = np.atleast_1d(np.asarray(log_rho, dtype=float))
        out = np.empty_like(log_rho)
        inside = log_rho <= math.log(self.r_fit)
        if np.any(inside):
            with np.errstate(divide="ignore"):
                out[inside] = np.log(np.interp(np.exp(log_rho[inside]),
                                               self.r_sorted, self.surv))
        if np.any(~inside):
            out[~inside] = self.log_stitch + \
                self.tail.log_survival_raw_from_log(log_rho[~inside])
        return out if out.shape != (1,) else float(out[0])
