"""Hierarchical closed-loop inverse kinematics with certified gain tuning.

A prioritized stack of kinematic tasks is regulated in discrete time; at
every control step a small semidefinite program picks the task feedback
gains so that one Euler step provably contracts the stacked task error
while respecting joint-velocity bounds.
"""

from .errors import (
    CliktuneError,
    ConfigError,
    DimensionMismatch,
    EmptyStack,
    InvalidParameter,
    RankDeficient,
    SimulationError,
    TaskModelMismatch,
)
from .hierarchy import (
    HierarchyState,
    assemble_hierarchy,
    build_state,
    clik_velocity,
    task_error,
    wrap_angle,
)
from .kinematics import (
    JointState,
    ManipulatorModel,
    UR5_DH_TABLE,
    dh_transform,
    frame_transforms,
    pinv,
    task_jacobian,
    task_value,
)
from .lmi import (
    LmiBlock,
    SdpProblem,
    assemble_problem,
    build_F1,
    build_F2,
    build_F3,
    build_F4_beta_positive,
    build_S,
    build_gain_floor,
    export_problem,
    standard_blocks,
)
from .sdp import (
    CertificateReport,
    GainSolution,
    SolverOptions,
    check_certificate,
    solve_sdp,
)
from .sim import (
    Scenario,
    SimTrace,
    StepState,
    TraceRecord,
    builtin_scenarios,
    fixed_baseline,
    get_builtin,
    planar3_scenario,
    run,
    solve_initial_configuration,
    step,
    ur5_scenario,
    with_velocity_limit,
)
from .stability import ErrorDynamics, assemble_A, lyapunov_value, stability_margin
from .tasks import TaskSpec, TaskStack

__all__ = [
    "CliktuneError",
    "ConfigError",
    "DimensionMismatch",
    "EmptyStack",
    "InvalidParameter",
    "RankDeficient",
    "SimulationError",
    "TaskModelMismatch",
    "HierarchyState",
    "assemble_hierarchy",
    "build_state",
    "clik_velocity",
    "task_error",
    "wrap_angle",
    "JointState",
    "ManipulatorModel",
    "UR5_DH_TABLE",
    "dh_transform",
    "frame_transforms",
    "pinv",
    "task_jacobian",
    "task_value",
    "LmiBlock",
    "SdpProblem",
    "assemble_problem",
    "build_F1",
    "build_F2",
    "build_F3",
    "build_F4_beta_positive",
    "build_S",
    "build_gain_floor",
    "export_problem",
    "standard_blocks",
    "CertificateReport",
    "GainSolution",
    "SolverOptions",
    "check_certificate",
    "solve_sdp",
    "Scenario",
    "SimTrace",
    "StepState",
    "TraceRecord",
    "builtin_scenarios",
    "fixed_baseline",
    "get_builtin",
    "planar3_scenario",
    "run",
    "solve_initial_configuration",
    "step",
    "ur5_scenario",
    "with_velocity_limit",
    "ErrorDynamics",
    "assemble_A",
    "lyapunov_value",
    "stability_margin",
    "TaskSpec",
    "TaskStack",
    "__version__",
]

__version__ = "0.1.0"
