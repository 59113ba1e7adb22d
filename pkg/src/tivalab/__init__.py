from .pkpd import (
    PkParams as PkParams,
    PdParams as PdParams,
    ThetaVector as ThetaVector,
    PatientModel as PatientModel,
    DiscreteModel as DiscreteModel,
    build_continuous_matrices as build_continuous_matrices,
    discretize as discretize,
    interaction_u as interaction_u,
    bis_output as bis_output,
    bis_jacobian as bis_jacobian,
    step as step,
)
from .population import (
    UncertaintySpec as UncertaintySpec,
    SampledPatient as SampledPatient,
    sample_patient as sample_patient,
    sample_cohort as sample_cohort,
)
from .estimation import (
    EkfConfig as EkfConfig,
    EkfState as EkfState,
    ekf_update as ekf_update,
    ekf_predict_only as ekf_predict_only,
)
from .model_bank import (
    GridSpec as GridSpec,
    SelectorConfig as SelectorConfig,
    build_grid as build_grid,
    criterion as criterion,
    select_model as select_model,
    bank_step as bank_step,
)
from .control import (
    ControlDecision as ControlDecision,
    MpcConfig as MpcConfig,
    PidConfig as PidConfig,
    ReferenceGovernor as ReferenceGovernor,
    mpc_solve as mpc_solve,
    governor_step as governor_step,
    pid_step as pid_step,
)
from .control.tuning import tune_pid as tune_pid
from .simulation import (
    ScenarioConfig as ScenarioConfig,
    RunTrace as RunTrace,
    MetricsRecord as MetricsRecord,
    CohortSummary as CohortSummary,
    run_closed_loop as run_closed_loop,
    compute_metrics as compute_metrics,
    run_monte_carlo as run_monte_carlo,
)
from .config import (
    DEFAULTS as DEFAULTS,
    LabConfig as LabConfig,
    load_config as load_config,
    merge_defaults as merge_defaults,
)
from .validation import (
    validate_config as validate_config,
    ValidationIssue as ValidationIssue,
    ValidationResult as ValidationResult,
)
