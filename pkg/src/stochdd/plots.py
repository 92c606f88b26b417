"""Matplotlib figure rendering for run reports and sweeps (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .klexp import KLExpansion, relative_energy
from .krylov import SolveReport


def convergence_plot(report: SolveReport, path) -> None:
    """Relative update and residual norms per PCGM iteration, log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if report.update_norms:
        ax.semilogy(
            np.arange(1, len(report.update_norms) + 1),
            report.update_norms,
            "o-", ms=3, label="relative update",
        )
    ax.semilogy(
        np.arange(len(report.residual_norms)),
        report.residual_norms,
        "s--", ms=3, label="residual norm",
    )
    ax.axhline(report.tol, color="gray", lw=0.8, ls=":", label="tolerance")
    ax.set_xlabel("PCGM iteration")
    ax.set_ylabel("norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def energy_plot(kle: KLExpansion, path) -> None:
    """Relative partial eigenvalue sums against the eigenvalue index."""
    energy = relative_energy(kle)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(energy) + 1), energy, "o-", ms=4)
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("relative partial sum")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def sweep_plot(rows: list[dict], path) -> None:
    """Iteration counts against the sweep axis, one line per preconditioner."""
    ok = [r for r in rows if r.get("iterations") is not None]
    if not ok:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    by_precond: dict[str, list[dict]] = {}
    for row in ok:
        by_precond.setdefault(row["preconditioner"], []).append(row)
    for kind, group in sorted(by_precond.items()):
        values = [r["value"] for r in group]
        xticks = np.arange(len(values))
        ax.plot(xticks, [r["iterations"] for r in group], "o-", label=kind)
        ax.set_xticks(xticks)
        ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel(ok[0]["axis"])
    ax.set_ylabel("PCGM iterations")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
