"""Preconditioned conjugate gradient driver with convergence bookkeeping.

The iteration follows the classic PCG recurrence with the convergence test
placed directly after the solution update: the solve stops once
||u_{i+1} - u_i|| / ||u_i|| <= tol (absolute update norm when ||u_i|| = 0).
The true preconditioned-residual scalars are recorded every iteration, and
the CG coefficients feed a Lanczos tridiagonal for a condition estimate of
the preconditioned operator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal


class IndefiniteOperatorError(RuntimeError):
    """The operator produced a non-positive curvature p^T A p."""


class IndefinitePreconditionerError(RuntimeError):
    """The preconditioner produced a non-positive inner product r^T M^-1 r."""


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    tol: float = 0.0
    residual_norms: list[float] = field(default_factory=list)
    update_norms: list[float] = field(default_factory=list)  # relative per iteration
    alphas: list[float] = field(default_factory=list)
    betas: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    condition_estimate: float | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "residual_norms": [float(v) for v in self.residual_norms],
            "update_norms": [float(v) for v in self.update_norms],
            "wall_time": self.wall_time,
            "condition_estimate": self.condition_estimate,
        }


def condition_estimate(alphas, betas) -> float | None:
    """Extreme eigenvalue ratio of the Lanczos tridiagonal built from CG scalars.

    Absent (None) when no iterations ran; a single iteration yields the
    trivial estimate 1.
    """
    m = len(alphas)
    if m == 0:
        return None
    if m == 1:
        return 1.0
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas[: m - 1], dtype=float)
    diag = np.empty(m)
    diag[0] = 1.0 / alphas[0]
    diag[1:] = 1.0 / alphas[1:] + betas / alphas[:-1]
    off = np.sqrt(betas) / alphas[:-1]
    eigs = eigh_tridiagonal(diag, off, eigvals_only=True)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0:
        return None
    return hi / lo


def pcgm(
    apply_op: Callable[[np.ndarray], np.ndarray],
    apply_prec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    u0: np.ndarray | None = None,
    tol: float = 1e-5,
    maxit: int = 500,
) -> tuple[np.ndarray, SolveReport]:
    """Solve S u = g with SPD operator and preconditioner actions.

    Returns the final iterate and a report; when maxit is exhausted the
    iterate with the smallest residual norm seen so far is returned with
    converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = time.perf_counter()
    u = np.zeros_like(rhs) if u0 is None else np.array(u0, dtype=float)
    report = SolveReport(tol=tol)

    r = rhs - apply_op(u)
    report.residual_norms.append(float(np.linalg.norm(r)))
    if maxit == 0:
        report.wall_time = time.perf_counter() - start
        return u, report
    if report.residual_norms[0] == 0.0:
        report.converged = True
        report.wall_time = time.perf_counter() - start
        return u, report

    z = apply_prec(r)
    p = z.copy()
    delta = float(r @ z)
    if delta <= 0:
        raise IndefinitePreconditionerError(f"r^T z = {delta:g} at iteration 0")

    best_u = u.copy()
    best_res = report.residual_norms[0]
    for i in range(maxit):
        q = apply_op(p)
        gamma = float(q @ p)
        if gamma <= 0:
            raise IndefiniteOperatorError(f"p^T S p = {gamma:g} at iteration {i}")
        alpha = delta / gamma
        report.alphas.append(alpha)
        u_norm = float(np.linalg.norm(u))
        u = u + alpha * p
        r = r - alpha * q
        update = float(np.linalg.norm(alpha * p))
        rel_update = update / u_norm if u_norm > 0 else update
        report.update_norms.append(rel_update)
        res_norm = float(np.linalg.norm(r))
        report.residual_norms.append(res_norm)
        report.iterations = i + 1
        if res_norm < best_res:
            best_res = res_norm
            best_u = u.copy()
        if rel_update <= tol or res_norm == 0.0:
            report.converged = True
            break
        z = apply_prec(r)
        delta_next = float(r @ z)
        if delta_next <= 0:
            raise IndefinitePreconditionerError(f"r^T z = {delta_next:g} at iteration {i + 1}")
        beta = delta_next / delta
        report.betas.append(beta)
        p = z + beta * p
        delta = delta_next

    if not report.converged:
        u = best_u
    report.condition_estimate = condition_estimate(report.alphas, report.betas)
    report.wall_time = time.perf_counter() - start
    return u, report
