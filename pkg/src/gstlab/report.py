"""Delimited output and figure rendering for experiment runs.

CSV bodies are written with fixed formatting and no timestamps, so re-running
a configuration reproduces them byte for byte; wall-clock metadata lives only
in the run manifest.  Each report path renders matplotlib figures next to the
CSV files it summarizes.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .gst import SandwichReport, stationary_density
from .spectral import SpectralSolution

FLOAT_FMT = "%.12g"


def write_csv(path, header, rows) -> str:
    """Write rows with fixed float formatting; returns the body sha256."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(FLOAT_FMT % v if isinstance(v, float) else str(v)
                              for v in row))
    body = "\n".join(lines) + "\n"
    Path(path).write_text(body)
    return hashlib.sha256(body.encode()).hexdigest()


def write_json(path, payload: dict) -> str:
    body = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    Path(path).write_text(body)
    return hashlib.sha256(body.encode()).hexdigest()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"unserializable {type(obj)}")


def write_manifest(out_dir, command: str, config_hash: str, config: dict,
                   seed: int, outputs: dict) -> Path:
    """Run manifest: the one place where wall-clock time is recorded."""
    path = Path(out_dir) / "manifest.json"
    payload = {
        "command": command,
        "config_hash": config_hash,
        "config": config,
        "seed": seed,
        "outputs": outputs,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               default=_json_default) + "\n")
    return path


def subsample_indices(n: int, keep: int = 2000) -> np.ndarray:
    """Log-spaced subsample of 0..n-1 for long trace files."""
    if n <= keep:
        return np.arange(n)
    idx = np.unique(np.geomspace(1, n, keep).astype(int) - 1)
    return idx


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def fig_ground_state(sol: SpectralSolution, path) -> None:
    x = sol.grid.axis_nodes()
    phi = sol.normalized_phi0()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(x, phi, lw=1.0)
    ax1.set_xlabel("x")
    ax1.set_ylabel(r"$\varphi_0$")
    ax1.set_title(f"ground state  ($\\lambda_0$={sol.lambda0:.6g}, "
                  f"gap={sol.spectral_gap:.4g})")
    ax2.semilogy(x, np.maximum(phi, 1e-300), lw=1.0)
    ax2.set_xlabel("x")
    ax2.set_ylabel(r"$\varphi_0$ (log)")
    ax2.set_title("tail decay")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_density_vs_samples(sol: SpectralSolution, samples, path,
                           bins: int = 80) -> None:
    dens = stationary_density(sol)
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    ax.hist(np.asarray(samples).ravel(), bins=bins, density=True, alpha=0.45,
            label="samples")
    ax.plot(dens.grid_nodes, dens.values, "k-", lw=1.2,
            label=r"$\varphi_0^2$")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_envelope_trace(estimate, constant, path, label: str = "") -> None:
    idx = subsample_indices(len(estimate.n))
    fig, ax = plt.subplots(figsize=(5.8, 3.6))
    ax.semilogx(estimate.n[idx], estimate.ratio[idx], ".", ms=1.5, alpha=0.35,
                label=r"$|X_n|/\tau(n)$")
    ax.semilogx(estimate.n[idx], estimate.running_max[idx], "r-", lw=1.4,
                label="running max")
    if constant is not None and np.isfinite(constant) and constant > 0:
        ax.axhline(constant, color="k", ls="--", lw=1.0,
                   label=f"predicted c = {constant:.4g}")
    ax.axhline(estimate.c_hat, color="r", ls=":", lw=1.0,
               label=f"c_hat = {estimate.c_hat:.4g}")
    ax.set_xlabel("n")
    ax.set_ylabel("ratio")
    if label:
        ax.set_title(label)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_exceedances(estimate, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.bar(range(len(estimate.exceedance_c)),
           np.maximum(estimate.exceedance_counts, 0.5), width=0.7)
    ax.set_yscale("log")
    ax.set_xticks(range(len(estimate.exceedance_c)))
    ax.set_xticklabels([f"{c:.3g}" for c in estimate.exceedance_c],
                       rotation=45, fontsize=7)
    ax.set_xlabel("level c")
    ax.set_ylabel(r"#{n : $|X_n| \geq c\,\tau(n)$}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_sandwich(report: SandwichReport, path) -> None:
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    ax.loglog(report.radii, report.ratio_up, "-", lw=1.2,
              label=r"$\varphi_0 (1 \vee V_{up}) / (1 \wedge \nu)$")
    if report.case == "confining":
        ax.loglog(report.radii, report.ratio_low, "-", lw=1.2,
                  label=r"$\varphi_0 (1 \vee V_{low}) / (1 \wedge \nu)$")
    ax.set_xlabel("r")
    ax.set_ylabel("sandwich ratio")
    ax.set_title(f"tail slope {report.slope:.3f}")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def fig_path(times, states, path, jump_times=None) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    ax.plot(times, states, lw=0.7)
    if jump_times is not None and len(jump_times):
        ax.plot(jump_times, np.interp(jump_times, times, states), "r.", ms=2,
                alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("X_t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
