from .base import ControlDecision as ControlDecision
from .governor import (
    GovernorConfig as GovernorConfig,
    ReferenceGovernor as ReferenceGovernor,
    governor_step as governor_step,
)
from .mpc import (
    MpcConfig as MpcConfig,
    MpcController as MpcController,
    MpcSolution as MpcSolution,
    SolverStats as SolverStats,
    mpc_solve as mpc_solve,
)
from .pid import (
    PidConfig as PidConfig,
    PidController as PidController,
    PidState as PidState,
    pid_step as pid_step,
)
