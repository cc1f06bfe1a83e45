"""Prioritized task hierarchies and the closed-loop velocity law.

Lower-priority task velocities are projected into the null space of all
higher-priority task Jacobians, so they can never disturb tasks above them.
The projector of priority level i is built from the pseudo-inverse of the
augmented Jacobian that stacks J_1..J_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, RankDeficient
from .kinematics import ManipulatorModel, PINV_RTOL, pinv, row_rank, task_jacobian, task_value
from .tasks import TaskSpec, TaskStack


def wrap_angle(x):
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def task_error(task: TaskSpec, model: ManipulatorModel, q) -> np.ndarray:
    """Regulation error target - value, wrapped for angular tasks."""
    err = task.target - task_value(model, task, q)
    if task.is_angular:
        err = wrap_angle(err)
    return err


@dataclass(frozen=True)
class HierarchyState:
    """Per-step snapshot of a task hierarchy at one configuration.

    ``projectors[i]`` is the null-space projector of the first i tasks
    (index 0 is the identity). ``blocks[i][rho]`` is the gain-free coupling
    -J_i N_{rho-1} Jrho^+ between the error of task i and the gain of task
    rho; ``coupling`` is the same grid assembled into one n-by-n matrix.
    """

    jacobians: tuple[np.ndarray, ...]
    errors: tuple[np.ndarray, ...]
    pinvs: tuple[np.ndarray, ...]
    projectors: tuple[np.ndarray, ...]
    blocks: tuple[tuple[np.ndarray, ...], ...]
    coupling: np.ndarray

    @property
    def h(self) -> int:
        return len(self.jacobians)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(j.shape[0] for j in self.jacobians)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def dof(self) -> int:
        return self.jacobians[0].shape[1]

    @property
    def error_vector(self) -> np.ndarray:
        """All task errors stacked by priority."""
        return np.concatenate(self.errors)

    def split_gains(self, lam) -> list[np.ndarray]:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n,):
            raise DimensionMismatch(
                f"expected {self.n} gains, got shape {lam.shape}"
            )
        out, start = [], 0
        for d in self.dims:
            out.append(lam[start:start + d])
            start += d
        return out


def assemble_hierarchy(jacobians, errors, rtol: float = PINV_RTOL) -> HierarchyState:
    """Build a HierarchyState from explicit Jacobians and task errors.

    Raises RankDeficient (with .level set to the 1-based priority) when a
    task Jacobian or an augmented Jacobian loses row rank.
    """
    jacobians = tuple(np.atleast_2d(np.asarray(J, dtype=float)) for J in jacobians)
    errors = tuple(np.atleast_1d(np.asarray(e, dtype=float)) for e in errors)
    if not jacobians or len(jacobians) != len(errors):
        raise DimensionMismatch("need one error vector per Jacobian")
    h = len(jacobians)
    dof = jacobians[0].shape[1]
    for i, (J, e) in enumerate(zip(jacobians, errors), start=1):
        if J.shape[1] != dof:
            raise DimensionMismatch(f"task {i}: Jacobian column count != {dof}")
        if e.shape != (J.shape[0],):
            raise DimensionMismatch(f"task {i}: error length != Jacobian rows")

    pinvs = []
    for i, J in enumerate(jacobians, start=1):
        try:
            pinvs.append(pinv(J, rtol))
        except RankDeficient as exc:
            raise RankDeficient(f"task {i}: {exc}", level=i) from exc

    projectors = [np.eye(dof)]
    for i in range(1, h + 1):
        aug = np.vstack(jacobians[:i])
        if row_rank(aug, rtol) < aug.shape[0]:
            raise RankDeficient(
                f"augmented Jacobian of tasks 1..{i} is rank deficient",
                level=i,
            )
        projectors.append(np.eye(dof) - pinv(aug, rtol) @ aug)

    blocks = tuple(
        tuple(-jacobians[i] @ projectors[rho] @ pinvs[rho]
              for rho in range(h))
        for i in range(h)
    )
    coupling = np.block([list(row) for row in blocks])
    return HierarchyState(
        jacobians=jacobians,
        errors=errors,
        pinvs=tuple(pinvs),
        projectors=tuple(projectors),
        blocks=blocks,
        coupling=coupling,
    )


def build_state(stack: TaskStack, model: ManipulatorModel, q,
                rtol: float = PINV_RTOL) -> HierarchyState:
    """Evaluate Jacobians, errors, projectors and couplings at q."""
    stack.warn_if_overconstrained(model.dof)
    jacobians = [task_jacobian(model, t, q) for t in stack.tasks]
    errors = [task_error(t, model, q) for t in stack.tasks]
    return assemble_hierarchy(jacobians, errors, rtol)


def clik_velocity(state: HierarchyState, gains) -> np.ndarray:
    """Joint velocity of the prioritized closed-loop law.

    ``gains`` is the stacked vector of per-error-coordinate feedback gains
    (the diagonals of the per-task gain matrices, highest priority first);
    entries must be nonnegative.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (state.n,):
        raise DimensionMismatch(
            f"expected {state.n} gains, got shape {gains.shape}"
        )
    if np.any(gains < 0.0):
        raise InvalidParameter("gains must be nonnegative")
    qd = np.zeros(state.dof)
    start = 0
    for i, d in enumerate(state.dims):
        lam_i = gains[start:start + d]
        qd += state.projectors[i] @ state.pinvs[i] @ (lam_i * state.errors[i])
        start += d
    return qd
