"""LMI blocks of the per-step gain-selection problem.

Decision variables are stacked as x = [lam_1..lam_n, beta, gamma]. Every
block is affine in x,

    F_j(x) = F_{j,0} + sum_l F_{j,l} x_l,

and the tuning problem minimizes gamma subject to all blocks being positive
semidefinite. Coefficient index 0 is the constant term, 1..n address the
gains, n+1 addresses beta and n+2 addresses gamma.

Blocks:

* stability_block -- Schur-complement form of the contraction requirement
  -A^T - A - A^T A dt >= beta I, linear in the gains and beta.
* velocity_blocks -- elementwise joint-velocity bounds, via the map
  qd = S lam.
* regulation_block -- epigraph of (beta - beta_des)^2 + delta ||lam||^2
  bounded by gamma, which softly tracks the desired contraction rate.
* beta_floor_block -- keeps beta strictly positive.
* gain_floor_block -- keeps the gains nonnegative.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .hierarchy import HierarchyState
from .stability import ErrorDynamics

_SYM_ATOL = 1e-12

BETA_FLOOR_DEFAULT = 1e-9


@dataclass(frozen=True)
class LmiBlock:
    """One affine symmetric-matrix constraint F_j(x) >= 0."""

    size: int
    coeffs: tuple[tuple[int, np.ndarray], ...]
    label: str = ""

    def __post_init__(self):
        coeffs = []
        seen = set()
        for idx, mat in self.coeffs:
            idx = int(idx)
            if idx < 0:
                raise InvalidParameter("coefficient index must be >= 0")
            if idx in seen:
                raise InvalidParameter(f"duplicate coefficient index {idx}")
            seen.add(idx)
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            if mat.shape != (self.size, self.size):
                raise DimensionMismatch(
                    f"block {self.label or '?'}: coefficient {idx} has shape "
                    f"{mat.shape}, expected ({self.size}, {self.size})"
                )
            asym = np.abs(mat - mat.T).max() if mat.size else 0.0
            if asym > _SYM_ATOL * (1.0 + np.abs(mat).max()):
                raise InvalidParameter(
                    f"block {self.label or '?'}: coefficient {idx} is "
                    f"asymmetric by {asym:.3e}"
                )
            mat = 0.5 * (mat + mat.T)
            mat.flags.writeable = False
            coeffs.append((idx, mat))
        coeffs.sort(key=lambda c: c[0])
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @property
    def max_index(self) -> int:
        return max((idx for idx, _ in self.coeffs), default=0)

    def constant(self) -> np.ndarray:
        for idx, mat in self.coeffs:
            if idx == 0:
                return mat
        return np.zeros((self.size, self.size))

    def evaluate(self, x) -> np.ndarray:
        """F_j(x) for a full decision vector x."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.size, self.size))
        for idx, mat in self.coeffs:
            out += mat if idx == 0 else mat * x[idx - 1]
        return out

    def min_eigenvalue(self, x) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(x)).min())


@dataclass(frozen=True)
class SdpProblem:
    """min c^T x over the intersection of the blocks' semidefinite cones."""

    n_gains: int
    blocks: tuple[LmiBlock, ...]
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        n = int(self.n_gains)
        if n < 1:
            raise InvalidParameter("need at least one gain variable")
        object.__setattr__(self, "n_gains", n)
        blocks = tuple(self.blocks)
        if not blocks:
            raise InvalidParameter("need at least one block")
        for b in blocks:
            if b.max_index > n + 2:
                raise DimensionMismatch(
                    f"block {b.label or '?'} references variable "
                    f"{b.max_index} but the problem has {n + 2}"
                )
        object.__setattr__(self, "blocks", blocks)
        c = np.zeros(n + 2)
        c[-1] = 1.0
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def n_vars(self) -> int:
        return self.n_gains + 2

    def evaluate_blocks(self, x) -> list[np.ndarray]:
        return [b.evaluate(x) for b in self.blocks]


def build_F1(dyn: ErrorDynamics) -> LmiBlock:
    """Stability block, size 2n.

    Arranged as [[-(A^T + A) - beta I, A^T sqrt(dt)], [A sqrt(dt), I]],
    whose Schur complement recovers -A^T - A - beta I - A^T A dt >= 0 while
    staying linear in every gain and in beta.
    """
    n = dyn.n
    sq = np.sqrt(dyn.dt)
    coeffs = []
    const = np.zeros((2 * n, 2 * n))
    const[n:, n:] = np.eye(n)
    coeffs.append((0, const))
    for l in range(n):
        col = np.zeros((n, n))
        col[:, l] = dyn.coupling[:, l]
        mat = np.zeros((2 * n, 2 * n))
        mat[:n, :n] = -(col + col.T)
        mat[:n, n:] = col.T * sq
        mat[n:, :n] = col * sq
        coeffs.append((1 + l, mat))
    beta_mat = np.zeros((2 * n, 2 * n))
    beta_mat[:n, :n] = -np.eye(n)
    coeffs.append((n + 1, beta_mat))
    return LmiBlock(size=2 * n, coeffs=tuple(coeffs), label="stability")


def build_S(state: HierarchyState) -> np.ndarray:
    """Map S with qd = S lam, columns grouped by task.

    Column block i is N_{i-1} J_i^+ diag(err_i), so multiplying by the
    stacked gain vector reproduces the closed-loop velocity law exactly.
    """
    S = np.zeros((state.dof, state.n))
    start = 0
    for i, d in enumerate(state.dims):
        S[:, start:start + d] = (
            state.projectors[i] @ state.pinvs[i] @ np.diag(state.errors[i])
        )
        start += d
    return S


def build_F2(S, qd_upper, qd_lower) -> tuple[LmiBlock, LmiBlock]:
    """Diagonal velocity-bound blocks: qd_upper - S lam >= 0 and
    S lam - qd_lower >= 0, elementwise."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    nu, n = S.shape
    hi = np.asarray(qd_upper, dtype=float)
    lo = np.asarray(qd_lower, dtype=float)
    if hi.shape != (nu,) or lo.shape != (nu,):
        raise DimensionMismatch(f"velocity bounds must have length {nu}")
    if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
        raise InvalidParameter("velocity bounds must straddle zero")
    upper = [(0, np.diag(hi))]
    lower = [(0, -np.diag(lo))]
    for j in range(n):
        upper.append((1 + j, -np.diag(S[:, j])))
        lower.append((1 + j, np.diag(S[:, j])))
    return (
        LmiBlock(size=nu, coeffs=tuple(upper), label="velocity_upper"),
        LmiBlock(size=nu, coeffs=tuple(lower), label="velocity_lower"),
    )


def build_F3(beta_des: float, delta: float, n: int) -> LmiBlock:
    """Epigraph block of size n+2 bounding the tracking cost by gamma.

    [[gamma, lam^T, beta - beta_des],
     [lam,   I/delta, 0],
     [beta - beta_des, 0, 1]] >= 0
    is, by Schur complement, gamma >= (beta - beta_des)^2 + delta ||lam||^2.
    """
    if not delta > 0.0:
        raise InvalidParameter("delta must be positive")
    if not beta_des > 0.0:
        raise InvalidParameter("desired beta must be positive")
    m = n + 2
    const = np.zeros((m, m))
    const[1:1 + n, 1:1 + n] = np.eye(n) / delta
    const[0, m - 1] = const[m - 1, 0] = -beta_des
    const[m - 1, m - 1] = 1.0
    coeffs = [(0, const)]
    for l in range(n):
        mat = np.zeros((m, m))
        mat[0, 1 + l] = mat[1 + l, 0] = 1.0
        coeffs.append((1 + l, mat))
    beta_mat = np.zeros((m, m))
    beta_mat[0, m - 1] = beta_mat[m - 1, 0] = 1.0
    coeffs.append((n + 1, beta_mat))
    gamma_mat = np.zeros((m, m))
    gamma_mat[0, 0] = 1.0
    coeffs.append((n + 2, gamma_mat))
    return LmiBlock(size=m, coeffs=tuple(coeffs), label="regulation")


def build_F4_beta_positive(eps_beta: float, n: int) -> LmiBlock:
    """1x1 block beta - eps_beta >= 0."""
    if eps_beta < 0.0:
        raise InvalidParameter("eps_beta must be >= 0")
    return LmiBlock(
        size=1,
        coeffs=((0, np.array([[-eps_beta]])), (n + 1, np.array([[1.0]]))),
        label="beta_floor",
    )


def build_gain_floor(n: int) -> LmiBlock:
    """Diagonal block diag(lam) >= 0: feedback gains may not go negative."""
    coeffs = [(0, np.zeros((n, n)))]
    for l in range(n):
        mat = np.zeros((n, n))
        mat[l, l] = 1.0
        coeffs.append((1 + l, mat))
    return LmiBlock(size=n, coeffs=tuple(coeffs), label="gain_floor")


def assemble_problem(blocks, n: int) -> SdpProblem:
    """Bundle blocks into min-gamma standard form over x = [lam, beta, gamma]."""
    return SdpProblem(n_gains=n, blocks=tuple(blocks))


def standard_blocks(dyn: ErrorDynamics, S, qd_upper, qd_lower,
                    beta_des: float, delta: float,
                    eps_beta: float = BETA_FLOOR_DEFAULT) -> list[LmiBlock]:
    """All blocks of the per-step tuning problem, in canonical order."""
    upper, lower = build_F2(S, qd_upper, qd_lower)
    return [
        build_F1(dyn),
        upper,
        lower,
        build_F3(beta_des, delta, dyn.n),
        build_F4_beta_positive(eps_beta, dyn.n),
        build_gain_floor(dyn.n),
    ]


def export_problem(problem: SdpProblem) -> str:
    """Serialize a problem to a plain-text sparse format.

    Layout::

        sdp 1
        nvars <n+2>
        ngains <n>
        c <v_1> ... <v_{n+2}>
        blocks <m>
        block <j> size <s> label <text>
        <j> <l> <row> <col> <value>        # upper triangle, l = 0 is constant

    Indices are zero-based; every entry line refers to block j, variable
    coefficient l (0 for the constant term) and one upper-triangular
    position. Suitable for feeding the same data to an external SDP tool.
    """
    out = io.StringIO()
    out.write("sdp 1\n")
    out.write(f"nvars {problem.n_vars}\n")
    out.write(f"ngains {problem.n_gains}\n")
    out.write("c " + " ".join(repr(float(v)) for v in problem.c) + "\n")
    out.write(f"blocks {len(problem.blocks)}\n")
    for j, block in enumerate(problem.blocks):
        out.write(f"block {j} size {block.size} label {block.label or '-'}\n")
    for j, block in enumerate(problem.blocks):
        for idx, mat in block.coeffs:
            for r in range(block.size):
                for col in range(r, block.size):
                    v = mat[r, col]
                    if v != 0.0:
                        out.write(f"{j} {idx} {r} {col} {repr(float(v))}\n")
    return out.getvalue()
