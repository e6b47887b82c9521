"""Spectral discretization of H = -L + V on a truncated periodic grid.

The nonlocal part acts as a Fourier multiplier psi(xi) on the periodic grid
(one FFT pair per application, O(n^d log n)); the potential acts diagonally.
Eigenpairs at the bottom of the spectrum come from ARPACK on the matrix-free
operator, with a dense fallback that doubles as the build-time oracle.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .levy import LevyModel, symbol_eval
from .potentials import Potential, potential_eval


class EigensolverError(RuntimeError):
    pass


class NoBoundStateError(RuntimeError):
    """Decaying potential without a negative isolated eigenvalue."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-R, R)^d, d = 1 or 2, n points per axis."""

    d: int
    half_width: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("grids are supported in d = 1 or 2")
        if self.half_width <= 0:
            raise ValueError("half width must be positive")
        n = self.n
        if n < 64 or (n & (n - 1)) != 0:
            raise ValueError("points per axis must be a power of two, >= 64")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def n_nodes(self) -> int:
        return self.n**self.d

    def axis_nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (n,) in d=1 or (n*n, 2) in d=2."""
        ax = self.axis_nodes()
        if self.d == 1:
            return ax
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def node_radii(self) -> np.ndarray:
        x = self.nodes()
        return np.abs(x) if self.d == 1 else np.linalg.norm(x, axis=-1)


class DiscreteOperator:
    """Matrix-free H = psi(D) + V on a Grid.

    Potential values above ``v_cap`` are clipped: once V exceeds ~1e4 over a
    unit length the ground state is below double-precision resolution there,
    so the clip is exact for the bottom eigenpairs while keeping the spectral
    radius small enough for Lanczos to converge on steep confining wells.
    """

    def __init__(self, model: LevyModel, potential: Optional[Potential], grid: Grid,
                 cell_average: bool = True, v_cap: float = 1e6):
        if potential is not None and getattr(potential, "d", grid.d) != grid.d:
            raise ValueError("potential dimension does not match the grid")
        self.model = model
        self.potential = potential
        self.grid = grid
        h = grid.spacing
        if grid.d == 1:
            k = 2.0 * math.pi * np.fft.rfftfreq(grid.n, d=h)
            self.psi = np.asarray(symbol_eval(model, k), dtype=float)
        else:
            k1 = 2.0 * math.pi * np.fft.fftfreq(grid.n, d=h)
            kmag = np.hypot(k1[:, None], k1[None, :])
            self.psi = np.asarray(symbol_eval(model, kmag.ravel()), dtype=float)
            self.psi = self.psi.reshape(grid.n, grid.n)
        self.v = potential_on_grid(potential, grid, cell_average=cell_average)
        self.v_clipped = int(np.count_nonzero(self.v > v_cap))
        if self.v_clipped:
            self.v = np.minimum(self.v, v_cap)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        g = self.grid
        if g.d == 1:
            out = np.fft.irfft(self.psi * np.fft.rfft(vec), n=g.n)
        else:
            w = vec.reshape(g.n, g.n)
            out = np.fft.ifft2(self.psi * np.fft.fft2(w)).real.ravel()
        return out + self.v * vec

    def as_linear_operator(self) -> LinearOperator:
        n = self.grid.n_nodes
        return LinearOperator((n, n), matvec=self.apply, dtype=float)

    def dense(self) -> np.ndarray:
        """Dense matrix of the operator; oracle use, d = 1 and n <= 2048."""
        g = self.grid
        if g.d != 1 or g.n > 2048:
            raise ValueError("dense form restricted to d = 1 grids with n <= 2048")
        k = 2.0 * math.pi * np.fft.fftfreq(g.n, d=g.spacing)
        psi_full = np.asarray(symbol_eval(self.model, k), dtype=float)
        f = np.fft.fft(np.eye(g.n), axis=0)
        mat = np.fft.ifft(psi_full[:, None] * f, axis=0).real
        mat[np.diag_indices(g.n)] += self.v
        return 0.5 * (mat + mat.T)


def potential_on_grid(potential: Optional[Potential], grid: Grid,
                      cell_average: bool = True) -> np.ndarray:
    """Sample V at the nodes; discontinuous/singular 1-d families are averaged
    over grid cells so the discretization stays second order."""
    if potential is None:
        return np.zeros(grid.n_nodes)
    nodes = grid.nodes()
    vals = np.asarray(potential_eval(potential, nodes), dtype=float)
    if not cell_average or grid.d != 1:
        return vals
    h = grid.spacing
    if potential.family == "well":
        a = potential.params["radius"]
        depth = potential.params["depth"]
        lo, hi = nodes - h / 2, nodes + h / 2
        overlap = np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None)
        vals = -depth * overlap / h
    elif potential.family in ("coulomb", "yukawa"):
        # integrable singularity at the origin: average the origin cell
        i0 = int(np.argmin(np.abs(nodes)))
        if abs(nodes[i0]) < h / 2:
            val, _ = integrate.quad(lambda y: potential_eval(potential, y),
                                    nodes[i0] - h / 2, nodes[i0] + h / 2,
                                    points=[0.0], limit=100)
            vals[i0] = val / h
    return vals


def build_operator(model: LevyModel, potential: Optional[Potential], grid: Grid,
                   cell_average: bool = True) -> DiscreteOperator:
    return DiscreteOperator(model, potential, grid, cell_average=cell_average)


@dataclass(frozen=True)
class SpectralSolution:
    """Bottom eigenpairs of H on a grid.

    ``modes`` holds the lowest eigenfunctions column-wise, L2-normalized on
    the grid (sum phi^2 h^d = 1); ``phi0`` is the strictly positive ground
    state (modes[:, 0] after sign fixing and a positivity floor).
    """

    grid: Grid
    eigenvalues: np.ndarray
    modes: np.ndarray
    phi0: np.ndarray
    lambda0: float
    lambda1: float
    residual: float
    boundary_ratio: float
    model_hash: str
    meta: dict

    @property
    def spectral_gap(self) -> float:
        return self.lambda1 - self.lambda0

    def normalized_phi0(self) -> np.ndarray:
        h = self.grid.spacing
        nrm = math.sqrt(float(np.sum(self.phi0**2)) * h**self.grid.d)
        return self.phi0 / nrm


def model_provenance_hash(model: LevyModel, potential: Optional[Potential],
                          grid: Grid) -> str:
    try:
        pot_cfg = potential.to_config() if potential is not None else None
    except ValueError:
        pot_cfg = {"family": "custom", "kind": potential.kind}
    blob = json.dumps({"model": model.to_config(), "potential": pot_cfg,
                       "grid": {"d": grid.d, "half_width": grid.half_width, "n": grid.n}},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def ground_state(op: DiscreteOperator, n_modes: int = 8, gap_tol: float = 1e-8,
                 positivity_tol: float = 1e-6, method: str = "auto",
                 maxiter: Optional[int] = None) -> SpectralSolution:
    """Lowest eigenpairs of the discrete operator.

    ARPACK (Lanczos) on the matrix-free apply, started from a fixed vector so
    repeated solves are bit-identical; dense fallback for small 1-d grids.
    The ground vector's sign is fixed positive and a tiny positivity floor is
    applied to the far-tail noise.  Decaying potentials must bind:
    lambda0 < -gap_tol, otherwise NoBoundStateError.
    """
    grid = op.grid
    nn = grid.n_nodes
    n_modes = min(n_modes, nn - 2)
    if method == "dense" or (method == "auto" and grid.d == 1 and grid.n <= 256):
        vals, vecs = _dense_eig(op, n_modes)
    else:
        try:
            v0 = 1.0 + 0.1 * np.cos(np.arange(nn) * 2.0 * math.pi / nn)
            vals, vecs = eigsh(op.as_linear_operator(), k=n_modes, which="SA",
                               ncv=min(nn, max(6 * n_modes, 60)),
                               maxiter=maxiter or min(100 * nn, 20000), v0=v0)
        except ArpackNoConvergence as exc:
            if grid.d == 1 and grid.n <= 2048:
                vals, vecs = _dense_eig(op, n_modes)
            else:
                raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    h = grid.spacing
    vecs = vecs / h ** (grid.d / 2.0)
    for j in range(vecs.shape[1]):
        i = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]

    phi0 = vecs[:, 0].copy()
    peak = float(np.max(phi0))
    if float(np.min(phi0)) < -positivity_tol * peak:
        raise EigensolverError("ground vector changes sign beyond tolerance")
    floor = np.finfo(float).eps * peak
    phi0 = np.maximum(phi0, floor)
    nrm = math.sqrt(float(np.sum(phi0**2)) * h**grid.d)
    phi0 /= nrm
    vecs[:, 0] = phi0

    lam0, lam1 = float(vals[0]), float(vals[1])
    if not lam0 < lam1:
        raise EigensolverError("no strict spectral gap in the computed pairs")
    if op.potential is not None and op.potential.kind == "decaying" and lam0 >= -gap_tol:
        raise NoBoundStateError(
            f"decaying potential does not bind: lambda0 = {lam0:.3e} >= -{gap_tol:.0e}")

    r = op.apply(phi0) - lam0 * phi0
    residual = math.sqrt(float(np.sum(r**2)) * h**grid.d) / max(1.0, abs(lam0))
    boundary_ratio = _boundary_ratio(grid, phi0)
    return SpectralSolution(
        grid=grid, eigenvalues=vals, modes=vecs, phi0=phi0,
        lambda0=lam0, lambda1=lam1, residual=residual,
        boundary_ratio=boundary_ratio,
        model_hash=model_provenance_hash(op.model, op.potential, grid),
        meta={"n_modes": n_modes,
              "model": op.model.to_config(),
              "potential": _potential_meta(op.potential)},
    )


def _potential_meta(potential: Optional[Potential]) -> Optional[dict]:
    if potential is None:
        return None
    try:
        return potential.to_config()
    except ValueError:
        return {"family": "custom", "kind": potential.kind}


def _dense_eig(op: DiscreteOperator, n_modes: int):
    from scipy.linalg import eigh

    mat = op.dense()
    vals, vecs = eigh(mat, subset_by_index=[0, n_modes - 1])
    return vals, vecs


def _boundary_ratio(grid: Grid, phi0: np.ndarray) -> float:
    peak = float(np.max(phi0))
    if grid.d == 1:
        edge = max(phi0[0], phi0[-1])
    else:
        w = phi0.reshape(grid.n, grid.n)
        edge = max(w[0, :].max(), w[-1, :].max(), w[:, 0].max(), w[:, -1].max())
    return float(edge) / peak


def solve_ground_state(model: LevyModel, potential: Optional[Potential],
                       grid: Grid, n_modes: int = 8, auto_expand: bool = True,
                       boundary_target: float = 1e-10, max_n: int = 32768,
                       **kw) -> SpectralSolution:
    """Solve, doubling the box (keeping the spacing) while a confining
    problem's ground state has not decayed below ``boundary_target`` at the
    boundary.  Decaying potentials keep the given box; their leakage is
    reported in ``boundary_ratio``."""
    expansions = 0
    while True:
        op = build_operator(model, potential, grid)
        sol = ground_state(op, n_modes=n_modes, **kw)
        confining = potential is not None and potential.kind == "confining"
        if (not auto_expand or not confining
                or sol.boundary_ratio <= boundary_target or grid.n * 2 > max_n):
            if expansions:
                sol = replace(sol, meta={**sol.meta, "expansions": expansions})
            return sol
        grid = Grid(d=grid.d, half_width=grid.half_width * 2.0, n=grid.n * 2)
        expansions += 1


def well_eigenvalue(a: float, v: float, tol: float = 1e-12) -> float:
    """Ground eigenvalue of -(1/2) d^2/dx^2 - v 1_{|x| <= a} in d = 1.

    Solves tan(a sqrt(2(v - |l|))) = sqrt(|l| / (v - |l|)) for the smallest
    |l| by bracketing in u = sqrt(2(v - |l|)), using that a u < pi/2 at the
    ground state.  Returns lambda0 < 0 (a bound state always exists).
    """
    if a <= 0 or v <= 0:
        raise ValueError("well parameters must be positive")
    u_max = min(math.sqrt(2.0 * v), math.pi / (2.0 * a))

    def g(u):
        return math.tan(a * u) - math.sqrt(max(2.0 * v - u * u, 0.0)) / u

    lo = u_max * 1e-12
    hi = u_max * (1.0 - 1e-13)
    u_star = brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    return -(v - 0.5 * u_star * u_star)


@dataclass(frozen=True)
class FeynmanKacKernel:
    """Spectral truncation of the semigroup kernel u(t, x, y)."""

    t: float
    matrix: np.ndarray
    m_modes: int
    truncation_estimate: float
    clamped_negatives: int


def fk_kernel(sol: SpectralSolution, t: float, m_modes: Optional[int] = None,
              truncation_tol: float = 1e-3, clamp_tol: float = 1e-12) -> FeynmanKacKernel:
    """u(t, x, y) = sum_k exp(-lambda_k t) phi_k(x) phi_k(y), k < m_modes.

    The truncation estimate is exp(-(lambda_last - lambda0) t) relative to
    the leading term; if it exceeds ``truncation_tol`` the caller should
    raise m_modes or t.  Small negative entries (below clamp_tol relative)
    are clamped to zero and counted.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    avail = sol.modes.shape[1]
    m = avail if m_modes is None else int(m_modes)
    if m > avail:
        raise ValueError(f"m_modes = {m} exceeds available eigenpairs ({avail})")
    lam = sol.eigenvalues[:m]
    modes = sol.modes[:, :m] / _mode_norms(sol)[None, :m]
    weights = np.exp(-(lam - sol.lambda0) * t)
    u = math.exp(-sol.lambda0 * t) * (modes * weights[None, :]) @ modes.T
    u = 0.5 * (u + u.T)
    trunc = float(np.exp(-(sol.eigenvalues[avail - 1] - sol.lambda0) * t))
    scale = float(np.max(np.abs(u)))
    n_neg = int(np.count_nonzero(u < -clamp_tol * scale))
    u[u < 0] = 0.0
    return FeynmanKacKernel(t=t, matrix=u, m_modes=m, truncation_estimate=trunc,
                            clamped_negatives=n_neg)


def _mode_norms(sol: SpectralSolution) -> np.ndarray:
    h = sol.grid.spacing**sol.grid.d
    return np.sqrt(np.sum(sol.modes**2, axis=0) * h)


def save_solution(sol: SpectralSolution, path) -> str:
    """Persist to an .npz artifact; returns the content hash."""
    meta = json.dumps({**sol.meta, "model_hash": sol.model_hash,
                       "grid": {"d": sol.grid.d, "half_width": sol.grid.half_width,
                                "n": sol.grid.n}},
                      sort_keys=True)
    digest = _solution_digest(sol, meta)
    np.savez(path, eigenvalues=sol.eigenvalues, modes=sol.modes, phi0=sol.phi0,
             lambda0=sol.lambda0, lambda1=sol.lambda1, residual=sol.residual,
             boundary_ratio=sol.boundary_ratio, meta=np.bytes_(meta.encode()),
             content_hash=np.bytes_(digest.encode()))
    return digest


def load_solution(path) -> SpectralSolution:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        grid = Grid(**meta.pop("grid"))
        sol = SpectralSolution(
            grid=grid, eigenvalues=z["eigenvalues"], modes=z["modes"],
            phi0=z["phi0"], lambda0=float(z["lambda0"]), lambda1=float(z["lambda1"]),
            residual=float(z["residual"]), boundary_ratio=float(z["boundary_ratio"]),
            model_hash=meta.pop("model_hash"), meta=meta)
        stored = bytes(z["content_hash"]).decode()
    digest = _solution_digest(sol, json.dumps({**sol.meta, "model_hash": sol.model_hash,
                                               "grid": {"d": grid.d,
                                                        "half_width": grid.half_width,
                                                        "n": grid.n}}, sort_keys=True))
    if digest != stored:
        raise IOError("artifact content hash mismatch")
    return sol


def _solution_digest(sol: SpectralSolution, meta: str) -> str:
    hasher = hashlib.sha256()
    for arr in (sol.eigenvalues, sol.modes, sol.phi0):
        hasher.update(np.ascontiguousarray(arr).tobytes())
    hasher.update(meta.encode())
    return hasher.hexdigest()
