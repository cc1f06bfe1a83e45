"""Closed-loop error dynamics and the discrete-time stability margin.

With per-task feedback gains the stacked task error evolves, to first
order, as errdot = A err. One Euler step then changes the quadratic
Lyapunov value V = 0.5 * ||err||^2 by 0.5 * err^T X err with

    X = A^T dt + A dt + A^T A dt^2,

so the step is certifiably contracting exactly when X is negative
definite. The margin reported here is the largest eigenvalue of X:
negative means stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .hierarchy import HierarchyState

_SYM_ATOL = 1e-12


@dataclass(frozen=True)
class ErrorDynamics:
    """Gain-free coupling grid of a hierarchy plus the sampling time."""

    coupling: np.ndarray
    dims: tuple[int, ...]
    dt: float

    def __post_init__(self):
        coupling = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        n = sum(self.dims)
        if coupling.shape != (n, n):
            raise DimensionMismatch(
                f"coupling must be {n}x{n}, got {coupling.shape}"
            )
        if not self.dt > 0.0:
            raise InvalidParameter("dt must be positive")
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_state(cls, state: HierarchyState, dt: float) -> "ErrorDynamics":
        return cls(coupling=state.coupling, dims=state.dims, dt=dt)

    @property
    def n(self) -> int:
        return sum(self.dims)


def assemble_A(dyn: ErrorDynamics, lam) -> np.ndarray:
    """Closed-loop error matrix: column l of the gain-free grid times lam_l."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (dyn.n,):
        raise DimensionMismatch(
            f"expected {dyn.n} gains, got shape {lam.shape}"
        )
    if np.any(lam < 0.0):
        raise InvalidParameter("gains must be nonnegative")
    return dyn.coupling * lam[np.newaxis, :]


def stability_margin(A, dt: float) -> float:
    """Largest eigenvalue of A^T dt + A dt + A^T A dt^2; negative == stable."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("A must be square")
    if not dt > 0.0:
        raise InvalidParameter("dt must be positive")
    B = A * dt
    X = B.T + B + B.T @ B
    asym = np.abs(X - X.T).max() if X.size else 0.0
    if asym > _SYM_ATOL * (1.0 + np.abs(X).max()):
        raise InvalidParameter(
            f"assembled stability expression is asymmetric by {asym:.3e}"
        )
    return float(np.linalg.eigvalsh(0.5 * (X + X.T)).max())


def lyapunov_value(err) -> float:
    """Quadratic error measure 0.5 * ||err||^2."""
    err = np.asarray(err, dtype=float)
    return 0.5 * float(err.ravel() @ err.ravel())
