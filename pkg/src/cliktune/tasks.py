"""Task definitions and prioritized task stacks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStack, InvalidParameter

# Task kinds. Planar kinds apply to planar models, frame kinds to DH chains.
PLANAR_EE_POSITION = "planar_ee_position"
PLANAR_EE_ORIENTATION = "planar_ee_orientation"
DH_FRAME_POSITION = "dh_frame_position"
DH_FRAME_COORDINATE = "dh_frame_coordinate"

TASK_KINDS = (
    PLANAR_EE_POSITION,
    PLANAR_EE_ORIENTATION,
    DH_FRAME_POSITION,
    DH_FRAME_COORDINATE,
)

_TASK_DIMS = {
    PLANAR_EE_POSITION: 2,
    PLANAR_EE_ORIENTATION: 1,
    DH_FRAME_POSITION: 3,
    DH_FRAME_COORDINATE: 1,
}

COORDINATES = ("x", "y", "z")


@dataclass(frozen=True)
class TaskSpec:
    """One task: a kind, a desired value and (for DH kinds) a frame.

    ``target`` is the desired task value, in meters for position kinds and
    radians for the planar orientation. ``frame_index`` counts DH rows, so
    index k addresses the frame reached after applying row k.
    """

    kind: str
    target: np.ndarray
    frame_index: int | None = None
    coordinate: str | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise InvalidParameter(f"unknown task kind {self.kind!r}")
        target = np.atleast_1d(np.asarray(self.target, dtype=float))
        if target.ndim != 1 or target.shape[0] != self.dim:
            raise InvalidParameter(
                f"task {self.kind!r} needs a target of length {self.dim}, "
                f"got shape {target.shape}"
            )
        if not np.all(np.isfinite(target)):
            raise InvalidParameter("task target must be finite")
        target.flags.writeable = False
        object.__setattr__(self, "target", target)
        if self.kind in (DH_FRAME_POSITION, DH_FRAME_COORDINATE):
            if self.frame_index is None or self.frame_index < 1:
                raise InvalidParameter(
                    f"task {self.kind!r} needs frame_index >= 1"
                )
        if self.kind == DH_FRAME_COORDINATE and self.coordinate not in COORDINATES:
            raise InvalidParameter(
                f"task {self.kind!r} needs coordinate in {COORDINATES}"
            )

    @property
    def dim(self) -> int:
        return _TASK_DIMS[self.kind]

    @property
    def is_angular(self) -> bool:
        """True when the task value is an angle and errors must be wrapped."""
        return self.kind == PLANAR_EE_ORIENTATION


@dataclass(frozen=True)
class TaskStack:
    """Ordered list of tasks, index 0 being the highest priority."""

    tasks: tuple[TaskSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if not tasks:
            raise EmptyStack("a task stack needs at least one task")
        object.__setattr__(self, "tasks", tasks)

    @property
    def h(self) -> int:
        return len(self.tasks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(t.dim for t in self.tasks)

    @property
    def n(self) -> int:
        return sum(self.dims)

    def warn_if_overconstrained(self, dof: int) -> None:
        if self.n > dof:
            warnings.warn(
                f"task stack has total dimension {self.n} > {dof} joints; "
                "the stack cannot be full rank",
                stacklevel=3,
            )

    def split(self, stacked: np.ndarray) -> list[np.ndarray]:
        """Split a length-n vector into per-task pieces."""
        stacked = np.asarray(stacked, dtype=float)
        if stacked.shape != (self.n,):
            raise InvalidParameter(
                f"expected a vector of length {self.n}, got shape {stacked.shape}"
            )
        out = []
        start = 0
        for d in self.dims:
            out.append(stacked[start:start + d])
            start += d
        return out
