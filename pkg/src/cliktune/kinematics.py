"""Manipulator models, forward kinematics, task Jacobians and pseudo-inverses.

Two model families are supported: planar chains of revolute joints described
by link lengths, and spatial serial chains described by classic
Denavit-Hartenberg rows ``(a, alpha, d, theta_offset)`` with the transform

    T = Rz(theta + theta_offset) * Tz(d) * Tx(a) * Rx(alpha).

All operations are pure functions of value-semantic inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, RankDeficient, TaskModelMismatch
from .tasks import (
    COORDINATES,
    DH_FRAME_COORDINATE,
    DH_FRAME_POSITION,
    PLANAR_EE_ORIENTATION,
    PLANAR_EE_POSITION,
    TaskSpec,
)

PLANAR = "planar"
DH_CHAIN = "dh"

PINV_RTOL = 1e-8

# Universal Robots UR5, classic DH, lengths in meters, angles in radians.
# Validated in the test suite against an independently composed transform
# chain before any scenario uses it.
UR5_DH_TABLE = (
    (0.0, np.pi / 2, 0.089159, 0.0),
    (-0.425, 0.0, 0.0, 0.0),
    (-0.39225, 0.0, 0.0, 0.0),
    (0.0, np.pi / 2, 0.10915, 0.0),
    (0.0, -np.pi / 2, 0.09465, 0.0),
    (0.0, 0.0, 0.0823, 0.0),
)


def _readonly(a, dtype=float):
    out = np.asarray(a, dtype=dtype).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ManipulatorModel:
    """Geometry and joint-velocity bounds of a serial manipulator."""

    kind: str
    dof: int
    qd_upper: np.ndarray
    qd_lower: np.ndarray
    link_lengths: np.ndarray | None = None
    dh_rows: tuple[tuple[float, float, float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in (PLANAR, DH_CHAIN):
            raise InvalidParameter(f"unknown model kind {self.kind!r}")
        if self.dof < 1:
            raise InvalidParameter("dof must be positive")
        hi = np.atleast_1d(np.asarray(self.qd_upper, dtype=float))
        lo = np.atleast_1d(np.asarray(self.qd_lower, dtype=float))
        if hi.shape != (self.dof,) or lo.shape != (self.dof,):
            raise DimensionMismatch(
                f"velocity bounds must have length {self.dof}"
            )
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise InvalidParameter(
                "velocity bounds must straddle zero: qd_lower < 0 < qd_upper"
            )
        object.__setattr__(self, "qd_upper", _readonly(hi))
        object.__setattr__(self, "qd_lower", _readonly(lo))
        if self.kind == PLANAR:
            if self.link_lengths is None:
                raise InvalidParameter("planar model needs link_lengths")
            lengths = np.atleast_1d(np.asarray(self.link_lengths, dtype=float))
            if lengths.shape != (self.dof,):
                raise InvalidParameter(
                    f"planar model with dof={self.dof} needs {self.dof} link lengths"
                )
            if not np.all(lengths > 0.0):
                raise InvalidParameter("link lengths must be positive")
            object.__setattr__(self, "link_lengths", _readonly(lengths))
        else:
            if self.dh_rows is None:
                raise InvalidParameter("dh model needs dh_rows")
            rows = tuple(tuple(float(v) for v in row) for row in self.dh_rows)
            if len(rows) != self.dof or any(len(r) != 4 for r in rows):
                raise InvalidParameter(
                    f"dh model with dof={self.dof} needs {self.dof} rows of "
                    "(a, alpha, d, theta_offset)"
                )
            object.__setattr__(self, "dh_rows", rows)

    @classmethod
    def planar(cls, link_lengths, qd_upper, qd_lower=None) -> "ManipulatorModel":
        lengths = np.atleast_1d(np.asarray(link_lengths, dtype=float))
        dof = lengths.shape[0]
        hi = np.broadcast_to(np.asarray(qd_upper, dtype=float), (dof,))
        lo = -hi if qd_lower is None else np.broadcast_to(
            np.asarray(qd_lower, dtype=float), (dof,))
        return cls(kind=PLANAR, dof=dof, qd_upper=hi, qd_lower=lo,
                   link_lengths=lengths)

    @classmethod
    def dh_chain(cls, dh_rows, qd_upper, qd_lower=None) -> "ManipulatorModel":
        rows = tuple(tuple(float(v) for v in row) for row in dh_rows)
        dof = len(rows)
        hi = np.broadcast_to(np.asarray(qd_upper, dtype=float), (dof,))
        lo = -hi if qd_lower is None else np.broadcast_to(
            np.asarray(qd_lower, dtype=float), (dof,))
        return cls(kind=DH_CHAIN, dof=dof, qd_upper=hi, qd_lower=lo,
                   dh_rows=rows)

    @classmethod
    def ur5(cls, qd_limit=6.0) -> "ManipulatorModel":
        """UR5 arm with symmetric joint-velocity bounds (rad/s)."""
        return cls.dh_chain(UR5_DH_TABLE, qd_upper=float(qd_limit))


@dataclass(frozen=True)
class JointState:
    """Joint configuration q (rad) at time t (s)."""

    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if q.ndim != 1:
            raise DimensionMismatch("q must be a vector")
        if not np.all(np.isfinite(q)):
            raise InvalidParameter("joint values must be finite")
        object.__setattr__(self, "q", _readonly(q))
        object.__setattr__(self, "t", float(self.t))


def _check_q(model: ManipulatorModel, q) -> np.ndarray:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (model.dof,):
        raise DimensionMismatch(
            f"expected {model.dof} joint values, got shape {q.shape}"
        )
    if not np.all(np.isfinite(q)):
        raise InvalidParameter("joint values must be finite")
    return q


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    """Homogeneous transform of one classic DH row."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def frame_transforms(model: ManipulatorModel, q) -> list[np.ndarray]:
    """Base-frame transforms of every chain frame, from frame 0 (= I) to dof."""
    if model.kind != DH_CHAIN:
        raise TaskModelMismatch("frame_transforms needs a DH-chain model")
    q = _check_q(model, q)
    T = np.eye(4)
    frames = [T]
    for (a, alpha, d, off), qi in zip(model.dh_rows, q):
        T = T @ dh_transform(a, alpha, d, qi + off)
        frames.append(T)
    return frames


def _frame_position_jacobian(frames: list[np.ndarray], k: int, dof: int) -> np.ndarray:
    """Position Jacobian of the origin of frame k, revolute joints."""
    pk = frames[k][:3, 3]
    J = np.zeros((3, dof))
    for j in range(k):
        zj = frames[j][:3, 2]
        pj = frames[j][:3, 3]
        J[:, j] = np.cross(zj, pk - pj)
    return J


def _planar_ee_position(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    angles = np.cumsum(q)
    L = model.link_lengths
    return np.array([np.sum(L * np.cos(angles)), np.sum(L * np.sin(angles))])


def _planar_position_jacobian(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    angles = np.cumsum(q)
    L = model.link_lengths
    lx = L * np.cos(angles)
    ly = L * np.sin(angles)
    # joint j moves every link at or beyond j
    J = np.zeros((2, model.dof))
    for j in range(model.dof):
        J[0, j] = -np.sum(ly[j:])
        J[1, j] = np.sum(lx[j:])
    return J


def _check_frame_index(model: ManipulatorModel, task: TaskSpec) -> int:
    k = int(task.frame_index)
    if not 1 <= k <= model.dof:
        raise TaskModelMismatch(
            f"frame_index {k} out of range 1..{model.dof}"
        )
    return k


def task_value(model: ManipulatorModel, task: TaskSpec, q) -> np.ndarray:
    """Current task value sigma_i(q), a vector of length task.dim."""
    q = _check_q(model, q)
    if model.kind == PLANAR:
        if task.kind == PLANAR_EE_POSITION:
            return _planar_ee_position(model, q)
        if task.kind == PLANAR_EE_ORIENTATION:
            return np.array([np.sum(q)])
        raise TaskModelMismatch(
            f"task {task.kind!r} is not defined for a planar model"
        )
    if task.kind == DH_FRAME_POSITION:
        k = _check_frame_index(model, task)
        return frame_transforms(model, q)[k][:3, 3].copy()
    if task.kind == DH_FRAME_COORDINATE:
        k = _check_frame_index(model, task)
        axis = COORDINATES.index(task.coordinate)
        return np.array([frame_transforms(model, q)[k][axis, 3]])
    raise TaskModelMismatch(
        f"task {task.kind!r} is not defined for a DH-chain model"
    )


def task_jacobian(model: ManipulatorModel, task: TaskSpec, q) -> np.ndarray:
    """Analytic Jacobian of task_value at q, shape (task.dim, dof)."""
    q = _check_q(model, q)
    if model.kind == PLANAR:
        if task.kind == PLANAR_EE_POSITION:
            return _planar_position_jacobian(model, q)
        if task.kind == PLANAR_EE_ORIENTATION:
            return np.ones((1, model.dof))
        raise TaskModelMismatch(
            f"task {task.kind!r} is not defined for a planar model"
        )
    if task.kind == DH_FRAME_POSITION:
        k = _check_frame_index(model, task)
        return _frame_position_jacobian(frame_transforms(model, q), k, model.dof)
    if task.kind == DH_FRAME_COORDINATE:
        k = _check_frame_index(model, task)
        axis = COORDINATES.index(task.coordinate)
        full = _frame_position_jacobian(frame_transforms(model, q), k, model.dof)
        return full[axis:axis + 1, :]
    raise TaskModelMismatch(
        f"task {task.kind!r} is not defined for a DH-chain model"
    )


def pinv(J, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a full-row-rank wide matrix.

    Singular values at or below ``rtol * sigma_max`` count as zero. Row-rank
    loss raises RankDeficient instead of damping: the control law is only
    valid away from singularities.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m, nu = J.shape
    if m > nu:
        raise DimensionMismatch(
            f"pinv expects a wide matrix (rows <= cols), got {J.shape}"
        )
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= rtol * s[0]:
        rank = int(np.sum(s > rtol * s[0])) if s[0] > 0.0 else 0
        raise RankDeficient(
            f"matrix of shape {J.shape} has row rank {rank} < {m}"
        )
    return (Vt.T / s) @ U.T


def row_rank(J, rtol: float = PINV_RTOL) -> int:
    """Numerical rank with the same threshold rule as pinv."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(J, dtype=float)),
                      compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
