from .closed_loop import (
    CONTROLLER_KINDS as CONTROLLER_KINDS,
    NoiseSpec as NoiseSpec,
    RunTrace as RunTrace,
    ScenarioConfig as ScenarioConfig,
    make_controller as make_controller,
    run_closed_loop as run_closed_loop,
    scenario_for as scenario_for,
)
from .metrics import (
    CohortSummary as CohortSummary,
    MetricsRecord as MetricsRecord,
    compute_metrics as compute_metrics,
    metrics_from_series as metrics_from_series,
    summarize_metrics as summarize_metrics,
)
from .monte_carlo import (
    MonteCarloConfig as MonteCarloConfig,
    MonteCarloResult as MonteCarloResult,
    run_monte_carlo as run_monte_carlo,
)
