"""Closed-loop discrete-time simulation with per-step gain tuning.

Each control step evaluates the task hierarchy at the current
configuration, picks feedback gains (either by solving the semidefinite
tuning problem or from a fixed vector), applies the prioritized velocity
law and integrates one Euler step. Everything observable is logged: joint
state, velocities, error norms, gains, the achieved contraction parameter,
the stability margin of the gains actually applied, the Lyapunov value and
the solver's verdict.

If the gain solver fails mid-run the previous step's gains are reused and
the record is flagged; a failure on the very first step aborts, since
there is nothing safe to fall back to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameter, RankDeficient, SimulationError
from .hierarchy import HierarchyState, build_state, clik_velocity, task_error
from .kinematics import PLANAR, JointState, ManipulatorModel, pinv, task_jacobian
from .lmi import BETA_FLOOR_DEFAULT, assemble_problem, build_S, standard_blocks
from .sdp import GainSolution, SolverOptions, solve_sdp
from .stability import ErrorDynamics, assemble_A, lyapunov_value, stability_margin
from .tasks import TaskSpec, TaskStack

MODE_SDP = "sdp"
MODE_FIXED = "fixed"

STATUS_FIXED = "fixed"

# relative slack allowed when checking tuned velocities against the bounds
VELOCITY_SLACK = 1e-6


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run one closed-loop simulation."""

    name: str
    model: ManipulatorModel
    stack: TaskStack
    mode: str = MODE_SDP
    fixed_gains: np.ndarray | None = None
    beta_tilde: float = 8.0
    delta: float = 2e-5
    eps_beta: float = BETA_FLOOR_DEFAULT
    dt: float = 0.01
    duration: float = 5.0
    q0: np.ndarray | None = None
    initial_task_values: np.ndarray | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.mode not in (MODE_SDP, MODE_FIXED):
            raise InvalidParameter(f"unknown mode {self.mode!r}")
        if not self.dt > 0.0:
            raise InvalidParameter("dt must be positive")
        if self.duration < 0.0:
            raise InvalidParameter("duration must be >= 0")
        if not self.beta_tilde > 0.0:
            raise InvalidParameter("beta_tilde must be positive")
        if not self.delta > 0.0:
            raise InvalidParameter("delta must be positive")
        if self.eps_beta < 0.0:
            raise InvalidParameter("eps_beta must be >= 0")
        if self.mode == MODE_FIXED and self.fixed_gains is None:
            raise InvalidParameter("fixed mode needs fixed_gains")
        if self.fixed_gains is not None:
            lam = np.atleast_1d(np.asarray(self.fixed_gains, dtype=float))
            if lam.shape != (self.stack.n,):
                raise InvalidParameter(
                    f"fixed_gains must have length {self.stack.n}"
                )
            if not np.all(lam > 0.0):
                raise InvalidParameter("fixed gains must be positive")
            lam = lam.copy()
            lam.flags.writeable = False
            object.__setattr__(self, "fixed_gains", lam)
        if self.q0 is None and self.initial_task_values is None:
            raise InvalidParameter("need q0 or initial_task_values")
        if self.q0 is not None:
            q0 = np.atleast_1d(np.asarray(self.q0, dtype=float))
            if q0.shape != (self.model.dof,):
                raise InvalidParameter(
                    f"q0 must have length {self.model.dof}"
                )
            q0 = q0.copy()
            q0.flags.writeable = False
            object.__setattr__(self, "q0", q0)
        if self.initial_task_values is not None:
            vals = np.atleast_1d(np.asarray(self.initial_task_values, dtype=float))
            if vals.shape != (self.stack.n,):
                raise InvalidParameter(
                    f"initial_task_values must have length {self.stack.n}"
                )
            vals = vals.copy()
            vals.flags.writeable = False
            object.__setattr__(self, "initial_task_values", vals)
        self.stack.warn_if_overconstrained(self.model.dof)

    @property
    def steps(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))

    def resolve_q0(self) -> np.ndarray:
        if self.q0 is not None:
            return np.asarray(self.q0, dtype=float).copy()
        return solve_initial_configuration(
            self.model, self.stack, self.initial_task_values
        )


def _ik_seed(dof: int) -> np.ndarray:
    # fixed, slightly bent posture; keeps the start away from the
    # stretched-out singularity and makes the solve reproducible
    pattern = (0.5, -1.0, -0.5)
    return np.array([pattern[j % 3] for j in range(dof)])


def solve_initial_configuration(model: ManipulatorModel, stack: TaskStack,
                                values, seed=None, tol: float = 1e-12,
                                max_iter: int = 100) -> np.ndarray:
    """Find q with stacked task values equal to ``values`` (planar models).

    Newton iteration from a fixed seed; any configuration reproducing the
    requested task values is acceptable, so the first root found wins.
    """
    if model.kind != PLANAR:
        raise InvalidParameter(
            "initial_task_values is only supported for planar models; "
            "give q0 explicitly for DH chains"
        )
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.shape != (stack.n,):
        raise InvalidParameter(
            f"expected {stack.n} initial task values, got shape {values.shape}"
        )
    targets = stack.split(values)
    goals = [
        TaskSpec(kind=task.kind, target=want, frame_index=task.frame_index,
                 coordinate=task.coordinate)
        for task, want in zip(stack.tasks, targets)
    ]
    q = _ik_seed(model.dof) if seed is None else np.asarray(seed, dtype=float).copy()
    for _ in range(max_iter):
        r = np.concatenate([task_error(g, model, q) for g in goals])
        if np.linalg.norm(r) < tol:
            return q
        J = np.vstack([task_jacobian(model, g, q) for g in goals])
        q = q + pinv(J) @ r
    raise InvalidParameter(
        "could not find a configuration matching the initial task values "
        f"(final residual {np.linalg.norm(r):.3e})"
    )


@dataclass(frozen=True)
class TraceRecord:
    """One fully evaluated control step."""

    k: int
    t: float
    q: np.ndarray
    qd: np.ndarray
    err_norms: np.ndarray
    lam: np.ndarray
    beta: float
    gamma: float
    margin: float
    lyapunov: float
    solver_status: str
    solve_time: float
    min_block_eig: float = float("nan")
    iterations: int = 0
    fallback: bool = False


@dataclass
class SimTrace:
    """Complete log of one run: one record per step plus the final state."""

    scenario: Scenario
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def margins(self) -> np.ndarray:
        return np.array([r.margin for r in self.records])

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.records])

    @property
    def lyapunov_values(self) -> np.ndarray:
        return np.array([r.lyapunov for r in self.records])

    @property
    def err_norms(self) -> np.ndarray:
        """Shape (records, h)."""
        return np.vstack([r.err_norms for r in self.records])

    @property
    def joint_velocities(self) -> np.ndarray:
        return np.vstack([r.qd for r in self.records])

    @property
    def gains(self) -> np.ndarray:
        return np.vstack([r.lam for r in self.records])

    def record_at(self, t: float) -> TraceRecord:
        k = int(round(t / self.scenario.dt))
        if not 0 <= k < len(self.records):
            raise InvalidParameter(f"no record at t={t}")
        return self.records[k]

    def csv_header(self) -> list[str]:
        nu = self.scenario.model.dof
        h = self.scenario.stack.h
        n = self.scenario.stack.n
        cols = ["t"]
        cols += [f"q_{j + 1}" for j in range(nu)]
        cols += [f"qd_{j + 1}" for j in range(nu)]
        cols += [f"err_norm_{i + 1}" for i in range(h)]
        cols += [f"lambda_{l + 1}" for l in range(n)]
        cols += ["beta", "gamma", "stab_margin", "lyapunov",
                 "solver_status", "solve_time_s"]
        return cols

    def write_csv(self, stream) -> None:
        def fmt(v: float) -> str:
            return repr(float(v))

        stream.write(",".join(self.csv_header()) + "\n")
        for r in self.records:
            fields = [fmt(r.t)]
            fields += [fmt(v) for v in r.q]
            fields += [fmt(v) for v in r.qd]
            fields += [fmt(v) for v in r.err_norms]
            fields += [fmt(v) for v in r.lam]
            # wall-clock solve time is the one inherently non-reproducible
            # column; microsecond rounding keeps it honest but compact
            fields += [fmt(r.beta), fmt(r.gamma), fmt(r.margin),
                       fmt(r.lyapunov), r.solver_status,
                       fmt(round(r.solve_time, 6))]
            stream.write(",".join(fields) + "\n")

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)

    def summary(self) -> dict:
        final = self.records[-1]
        return {
            "scenario": self.scenario.name,
            "steps": len(self.records) - 1,
            "final_err_norms": final.err_norms.tolist(),
            "min_margin": float(self.margins.min()),
            "max_margin": float(self.margins.max()),
            "max_abs_qd": float(np.abs(self.joint_velocities).max()),
            "mean_beta_deficit": self.mean_beta_deficit(),
            "solve_time_total_s": float(sum(r.solve_time for r in self.records)),
        }

    def mean_beta_deficit(self) -> float:
        """Time-averaged beta_tilde - beta over steps with tuned gains."""
        vals = [self.scenario.beta_tilde - r.beta for r in self.records
                if not math.isnan(r.beta)]
        return float(np.mean(vals)) if vals else float("nan")


@dataclass(frozen=True)
class StepState:
    """Carries the joint state and the last accepted gains between steps."""

    joint: JointState
    k: int = 0
    last_gains: GainSolution | None = None


def _tune_gains(scenario: Scenario, state: HierarchyState,
                dyn: ErrorDynamics) -> GainSolution:
    blocks = standard_blocks(
        dyn,
        build_S(state),
        scenario.model.qd_upper,
        scenario.model.qd_lower,
        scenario.beta_tilde,
        scenario.delta,
        scenario.eps_beta,
    )
    problem = assemble_problem(blocks, dyn.n)
    return solve_sdp(problem, scenario.solver)


def _evaluate(scenario: Scenario, step_state: StepState):
    """Evaluate the hierarchy, gains and diagnostics at one configuration."""
    k = step_state.k
    q = step_state.joint.q
    try:
        state = build_state(scenario.stack, scenario.model, q)
    except RankDeficient as exc:
        raise SimulationError(
            f"step {k}: rank-deficient hierarchy (priority level "
            f"{exc.level}); aborting", step=k,
        ) from exc
    dyn = ErrorDynamics.from_state(state, scenario.dt)

    fallback = False
    if scenario.mode == MODE_FIXED:
        gains = GainSolution(
            lam=np.asarray(scenario.fixed_gains, dtype=float),
            beta=float("nan"), gamma=float("nan"), status=STATUS_FIXED,
            min_block_eig=float("nan"), objective=float("nan"),
            iterations=0, solve_time=0.0,
        )
        lam = gains.lam
        status = STATUS_FIXED
    else:
        gains = _tune_gains(scenario, state, dyn)
        status = gains.status
        if gains.ok:
            lam = np.maximum(gains.lam, 0.0)
        elif step_state.last_gains is not None:
            fallback = True
            lam = np.maximum(step_state.last_gains.lam, 0.0)
        else:
            raise SimulationError(
                f"step {k}: gain solver failed on the first step "
                f"({gains.status}: {gains.reason}); aborting", step=k,
            )

    qd = clik_velocity(state, lam)
    if scenario.mode == MODE_SDP:
        hi = scenario.model.qd_upper * (1.0 + VELOCITY_SLACK)
        lo = scenario.model.qd_lower * (1.0 + VELOCITY_SLACK)
        if np.any(qd > hi) or np.any(qd < lo):
            worst = int(np.argmax(np.maximum(qd - hi, lo - qd)))
            raise SimulationError(
                f"step {k}: tuned velocity {qd[worst]:.6f} rad/s of joint "
                f"{worst + 1} violates its bound", step=k,
            )

    record = TraceRecord(
        k=k,
        t=step_state.joint.t,
        q=q.copy(),
        qd=qd,
        err_norms=np.array([float(np.linalg.norm(e)) for e in state.errors]),
        lam=lam.copy(),
        beta=gains.beta,
        gamma=gains.gamma,
        margin=stability_margin(assemble_A(dyn, lam), scenario.dt),
        lyapunov=lyapunov_value(state.error_vector),
        solver_status=status,
        solve_time=gains.solve_time,
        min_block_eig=gains.min_block_eig,
        iterations=gains.iterations,
        fallback=fallback,
    )
    accepted = gains if (scenario.mode == MODE_FIXED or gains.ok) else step_state.last_gains
    return record, qd, accepted


def step(scenario: Scenario, step_state: StepState) -> tuple[StepState, TraceRecord]:
    """One control step: evaluate, log, integrate."""
    record, qd, accepted = _evaluate(scenario, step_state)
    k_next = step_state.k + 1
    nxt = StepState(
        joint=JointState(q=step_state.joint.q + qd * scenario.dt,
                         t=k_next * scenario.dt),
        k=k_next,
        last_gains=accepted,
    )
    return nxt, record


def run(scenario: Scenario) -> SimTrace:
    """Simulate for floor(duration/dt) steps and log every state visited."""
    trace = SimTrace(scenario=scenario)
    state = StepState(joint=JointState(q=scenario.resolve_q0(), t=0.0))
    for _ in range(scenario.steps):
        state, record = step(scenario, state)
        trace.records.append(record)
    final_record, _, _ = _evaluate(scenario, state)
    trace.records.append(final_record)
    return trace


# --- builtin scenarios -----------------------------------------------------

PLANAR3_LINKS = (0.5, 0.3, 0.2)
PLANAR3_TARGET_POSITION = (0.76, 0.18)
PLANAR3_TARGET_ORIENTATION = -1.22
PLANAR3_INITIAL_VALUES = (0.5, 0.0, -1.134)
PLANAR3_FIXED_GAINS = (1.0, 1.0, 10.0)

UR5_Q0_DEG = (135.0, 0.0, -90.0, 0.0, 90.0, 0.0)
UR5_TARGET_POSITION = (-0.5, -0.4, 0.6)
UR5_TARGET_WRIST_Y = -0.3
UR5_FIXED_GAINS = (2.0, 2.0, 2.0, 1.0)


def planar3_scenario(**overrides) -> Scenario:
    """3-link planar arm regulating end-effector position then orientation."""
    model = ManipulatorModel.planar(PLANAR3_LINKS, qd_upper=3.0)
    stack = TaskStack((
        TaskSpec(kind="planar_ee_position", target=PLANAR3_TARGET_POSITION),
        TaskSpec(kind="planar_ee_orientation", target=PLANAR3_TARGET_ORIENTATION),
    ))
    base = Scenario(
        name="planar3",
        model=model,
        stack=stack,
        mode=MODE_SDP,
        fixed_gains=None,
        beta_tilde=8.0,
        delta=2e-5,
        dt=0.01,
        duration=5.0,
        initial_task_values=PLANAR3_INITIAL_VALUES,
    )
    return replace(base, **overrides) if overrides else base


def ur5_scenario(**overrides) -> Scenario:
    """UR5 regulating end-effector position plus the wrist-frame height."""
    model = ManipulatorModel.ur5(qd_limit=6.0)
    stack = TaskStack((
        TaskSpec(kind="dh_frame_position", target=UR5_TARGET_POSITION,
                 frame_index=6),
        TaskSpec(kind="dh_frame_coordinate", target=(UR5_TARGET_WRIST_Y,),
                 frame_index=4, coordinate="y"),
    ))
    base = Scenario(
        name="ur5",
        model=model,
        stack=stack,
        mode=MODE_SDP,
        fixed_gains=None,
        beta_tilde=8.0,
        delta=5e-5,
        dt=0.01,
        duration=4.0,
        q0=np.deg2rad(UR5_Q0_DEG),
    )
    return replace(base, **overrides) if overrides else base


def builtin_scenarios() -> list[Scenario]:
    return [planar3_scenario(), ur5_scenario()]


def get_builtin(name: str) -> Scenario:
    for maker in (planar3_scenario, ur5_scenario):
        scenario = maker()
        if scenario.name == name:
            return scenario
    names = [s.name for s in builtin_scenarios()]
    raise InvalidParameter(f"unknown builtin scenario {name!r}; have {names}")


def fixed_baseline(scenario: Scenario) -> Scenario:
    """The fixed-gain variant a tuned scenario is compared against."""
    gains = {
        "planar3": PLANAR3_FIXED_GAINS,
        "ur5": UR5_FIXED_GAINS,
    }.get(scenario.name)
    if gains is None:
        raise InvalidParameter(
            f"no fixed-gain baseline defined for {scenario.name!r}"
        )
    return replace(scenario, mode=MODE_FIXED, fixed_gains=gains)


def with_velocity_limit(scenario: Scenario, limit: float) -> Scenario:
    """Same scenario with symmetric joint-velocity bounds of +-limit rad/s."""
    if not limit > 0.0:
        raise InvalidParameter("velocity limit must be positive")
    model = scenario.model
    if model.kind == PLANAR:
        new_model = ManipulatorModel.planar(model.link_lengths, qd_upper=limit)
    else:
        new_model = ManipulatorModel.dh_chain(model.dh_rows, qd_upper=limit)
    return replace(scenario, model=new_model)
