"""Semidefinite solver front end and feasibility certificates.

The per-step problems are tiny (at most ~10 variables, blocks of at most
~8 rows), so they are handed to cvxopt's dense cone LP solver. The solver
is driven well below the advertised tolerances and every accepted solution
is re-verified here by evaluating each block's smallest eigenvalue at the
returned point; the contract is the certificate, not the solver internals.

Solves are deterministic: cvxopt's interior-point iteration has no
randomized choices, so identical problems and options yield identical
solutions bit for bit on one platform.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from cvxopt import matrix as _cvxmat
from cvxopt import solvers as _cvxsolvers

from .errors import InvalidParameter
from .lmi import SdpProblem

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    """Acceptance tolerances and iteration cap for the gain solver.

    ``feas_tol`` bounds how far below zero a block eigenvalue may sit at an
    accepted solution; ``obj_tol`` bounds the epigraph slack at the optimum.
    The interior-point iteration itself targets tolerances two to three
    orders tighter so the certificates hold with margin.
    """

    feas_tol: float = 1e-7
    obj_tol: float = 1e-6
    max_iters: int = 200

    def __post_init__(self):
        if not self.feas_tol > 0.0 or not self.obj_tol > 0.0:
            raise InvalidParameter("tolerances must be positive")
        if self.max_iters < 1:
            raise InvalidParameter("max_iters must be >= 1")

    def _ipm_options(self) -> dict:
        gap = max(min(self.obj_tol * 1e-3, 1e-9), 1e-12)
        return {
            "show_progress": False,
            "maxiters": int(self.max_iters),
            "abstol": gap,
            "reltol": gap,
            "feastol": max(min(self.feas_tol, 1e-8), 1e-12),
        }


@dataclass(frozen=True)
class CertificateReport:
    """Blockwise feasibility of a candidate point."""

    block_labels: tuple[str, ...]
    block_min_eigs: tuple[float, ...]
    min_block_eig: float
    objective: float
    feas_tol: float

    @property
    def feasible(self) -> bool:
        return self.min_block_eig >= -self.feas_tol

    def worst_block(self) -> str:
        i = int(np.argmin(self.block_min_eigs))
        return self.block_labels[i] or f"block {i}"


@dataclass(frozen=True)
class GainSolution:
    """Optimized gains with the solver's verdict and certificate."""

    lam: np.ndarray
    beta: float
    gamma: float
    status: str
    min_block_eig: float
    objective: float
    iterations: int
    solve_time: float
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.lam, [self.beta, self.gamma]])


def check_certificate(problem: SdpProblem, x, feas_tol: float = 1e-7) -> CertificateReport:
    """Evaluate every block at x and report the smallest eigenvalues."""
    x = np.asarray(x, dtype=float)
    eigs = tuple(b.min_eigenvalue(x) for b in problem.blocks)
    return CertificateReport(
        block_labels=tuple(b.label for b in problem.blocks),
        block_min_eigs=eigs,
        min_block_eig=float(min(eigs)),
        objective=float(problem.c @ x),
        feas_tol=float(feas_tol),
    )


def _cone_data(problem: SdpProblem):
    """Stack the blocks into cvxopt's (c, G, h, dims) cone-LP layout."""
    nv = problem.n_vars
    rows = sum(b.size * b.size for b in problem.blocks)
    G = np.zeros((rows, nv))
    h = np.zeros(rows)
    r0 = 0
    for block in problem.blocks:
        span = block.size * block.size
        for idx, mat in block.coeffs:
            flat = mat.flatten(order="F")
            if idx == 0:
                h[r0:r0 + span] = flat
            else:
                G[r0:r0 + span, idx - 1] = -flat
        r0 += span
    dims = {"l": 0, "q": [], "s": [b.size for b in problem.blocks]}
    return _cvxmat(problem.c), _cvxmat(G), _cvxmat(h), dims


def _failure(problem, status, reason, iterations, elapsed, x=None):
    n = problem.n_gains
    if x is None:
        lam, beta, gamma = np.zeros(n), float("nan"), float("nan")
        eig, obj = float("nan"), float("nan")
    else:
        lam, beta, gamma = x[:n], float(x[n]), float(x[n + 1])
        cert = check_certificate(problem, x)
        eig, obj = cert.min_block_eig, cert.objective
    return GainSolution(
        lam=lam, beta=beta, gamma=gamma, status=status,
        min_block_eig=eig, objective=obj,
        iterations=iterations, solve_time=elapsed, reason=reason,
    )


def solve_sdp(problem: SdpProblem, opts: SolverOptions | None = None) -> GainSolution:
    """Minimize gamma over the feasible set of the problem's blocks.

    Never raises on solver trouble; failures come back as a GainSolution
    whose status names the failure and whose reason says what happened, so
    a closed-loop caller can decide on a fallback.
    """
    opts = opts or SolverOptions()
    c, G, h, dims = _cone_data(problem)
    t0 = time.perf_counter()
    try:
        sol = _cvxsolvers.conelp(c, G, h, dims, options=opts._ipm_options())
    except (ArithmeticError, ValueError) as exc:
        return _failure(problem, STATUS_NUMERICAL_FAILURE,
                        f"interior-point iteration failed: {exc}",
                        0, time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    iterations = int(sol.get("iterations", 0))
    raw = sol["status"]
    x = None if sol["x"] is None else np.asarray(sol["x"]).ravel()

    if raw == "optimal":
        n = problem.n_gains
        cert = check_certificate(problem, x, opts.feas_tol)
        if not cert.feasible:
            return _failure(
                problem, STATUS_NUMERICAL_FAILURE,
                f"solver reported optimal but block {cert.worst_block()} has "
                f"eigenvalue {cert.min_block_eig:.3e} < -{opts.feas_tol:.1e}",
                iterations, elapsed, x,
            )
        return GainSolution(
            lam=x[:n], beta=float(x[n]), gamma=float(x[n + 1]),
            status=STATUS_OPTIMAL,
            min_block_eig=cert.min_block_eig,
            objective=cert.objective,
            iterations=iterations, solve_time=elapsed,
        )
    if raw == "primal infeasible":
        return _failure(problem, STATUS_INFEASIBLE,
                        "certified primal infeasible", iterations, elapsed)
    if raw == "dual infeasible":
        return _failure(problem, STATUS_NUMERICAL_FAILURE,
                        "certified dual infeasible (objective unbounded below)",
                        iterations, elapsed, x)
    status = (STATUS_MAX_ITERATIONS if iterations >= opts.max_iters
              else STATUS_NUMERICAL_FAILURE)
    return _failure(problem, status,
                    f"no convergence after {iterations} iterations",
                    iterations, elapsed, x)


def slack_eigenvalues(problem: SdpProblem, opts: SolverOptions | None = None):
    """Solve and also report per-block minimum eigenvalues of the solver's
    own primal slacks, for double-entry comparison with check_certificate."""
    opts = opts or SolverOptions()
    c, G, h, dims = _cone_data(problem)
    sol = _cvxsolvers.conelp(c, G, h, dims, options=opts._ipm_options())
    if sol["status"] != "optimal":
        raise InvalidParameter(f"instance did not solve: {sol['status']}")
    x = np.asarray(sol["x"]).ravel()
    s = np.asarray(sol["s"]).ravel()
    eigs = []
    r0 = 0
    for block in problem.blocks:
        span = block.size * block.size
        Sm = s[r0:r0 + span].reshape(block.size, block.size, order="F")
        eigs.append(float(np.linalg.eigvalsh(0.5 * (Sm + Sm.T)).min()))
        r0 += span
    return x, tuple(eigs)
