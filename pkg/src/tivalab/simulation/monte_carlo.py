"""Cohort runs across controllers on a shared, seeded patient population."""

import logging
import multiprocessing
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..errors import ParameterDomainError
from ..population import SampledPatient, sample_cohort
from .closed_loop import CONTROLLER_KINDS, RunTrace, ScenarioConfig, run_closed_loop
from .metrics import CohortSummary, MetricsRecord, compute_metrics, summarize_metrics

if TYPE_CHECKING:
    from ..config import LabConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_patients: int = 100
    master_seed: int = 1234
    parallelism: int = 1
    controllers: Tuple[str, ...] = CONTROLLER_KINDS

    def __post_init__(self):
        if self.n_patients < 1:
            raise ParameterDomainError(f"n_patients={self.n_patients!r} must be >= 1")
        if self.parallelism < 1:
            raise ParameterDomainError(f"parallelism={self.parallelism!r} must be >= 1")
        unknown = [c for c in self.controllers if c not in CONTROLLER_KINDS]
        if unknown or not self.controllers:
            raise ParameterDomainError(f"controllers must be a nonempty subset of {CONTROLLER_KINDS}")
        object.__setattr__(self, 'controllers', tuple(self.controllers))


@dataclass(eq=False)
class RunResult:
    controller: str
    patient_index: int
    seed: int
    status: str
    message: str = ''
    metrics: Optional[MetricsRecord] = None
    bis: Optional[np.ndarray] = None
    propofol_mg: float = 0.0
    remifentanil_ug: float = 0.0
    mean_solve_ms: float = 0.0
    max_solve_ms: float = 0.0
    switches: int = 0
    non_converged: int = 0
    trace: Optional[RunTrace] = None

    @property
    def ok(self) -> bool:
        return self.status == 'ok'


@dataclass(eq=False)
class MonteCarloResult:
    scenarios: Tuple[ScenarioConfig, ...]
    results: List[RunResult]
    summaries: Dict[str, CohortSummary]
    envelope: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def failures(self) -> List[RunResult]:
        return [r for r in self.results if not r.ok]

    def for_controller(self, kind: str) -> List[RunResult]:
        return [r for r in self.results if r.controller == kind]

    def worst_case(self, kind: str) -> Optional[RunResult]:
        """Completed run with the largest undershoot (lowest patient index on ties)."""
        done = [r for r in self.for_controller(kind) if r.ok]
        if not done:
            return None
        return max(done, key=lambda r: (r.metrics.us, -r.patient_index))

    def drug_ratio(self, kind: str) -> Optional[float]:
        """Mean remifentanil (µg) to propofol (mg) ratio over completed runs."""
        ratios = [
            r.remifentanil_ug / r.propofol_mg
            for r in self.for_controller(kind)
            if r.ok and r.propofol_mg > 0
        ]
        return float(np.mean(ratios)) if ratios else None


def _run_one(task) -> RunResult:
    patient, scenario, config, keep_trace = task
    try:
        trace = run_closed_loop(patient, scenario, patient.seed, config)
        metrics = compute_metrics(trace, scenario.band, scenario.bis_target)
    except Exception as exc:  # one failed run must not stop the cohort
        logger.warning(
            "%s patient %d failed: %s", scenario.controller, patient.index, exc, exc_info=True
        )
        return RunResult(
            controller=scenario.controller,
            patient_index=patient.index,
            seed=patient.seed,
            status='failed',
            message=f"{type(exc).__name__}: {exc}",
        )
    ticks = trace.solve_ms[:: scenario.hold]
    propofol, remifentanil = trace.drug_totals()
    switches = int(np.count_nonzero(np.diff(trace.model_index))) if len(trace) > 1 else 0
    return RunResult(
        controller=scenario.controller,
        patient_index=patient.index,
        seed=patient.seed,
        status='ok',
        metrics=metrics,
        bis=trace.bis_measured,
        propofol_mg=propofol,
        remifentanil_ug=remifentanil,
        mean_solve_ms=float(np.mean(ticks)),
        max_solve_ms=float(np.max(ticks)),
        switches=switches,
        non_converged=trace.non_converged,
        trace=trace if keep_trace else None,
    )


def _envelope(scenarios: Sequence[ScenarioConfig], results: Sequence[RunResult]) -> pd.DataFrame:
    columns = {}
    for scenario in scenarios:
        series = [r.bis for r in results if r.controller == scenario.controller and r.ok]
        if not series:
            continue
        stacked = np.stack(series)
        if 't_s' not in columns:
            columns['t_s'] = np.arange(stacked.shape[1]) * scenario.base_ts
        columns[f'{scenario.controller}_mean'] = stacked.mean(axis=0)
        columns[f'{scenario.controller}_std'] = stacked.std(axis=0)
    return pd.DataFrame(columns)


def run_monte_carlo(
    n_patients: int,
    scenarios: Sequence[ScenarioConfig],
    master_seed: int,
    parallelism: int = 1,
    config: Optional['LabConfig'] = None,
    emit_traces: bool = False,
    cohort: Optional[Sequence[SampledPatient]] = None,
    progress: bool = True,
) -> MonteCarloResult:
    """Run every scenario on the same cohort.

    Results are sorted by (scenario order, patient index), so they do not
    depend on ``parallelism``.
    """
    if n_patients < 1:
        raise ParameterDomainError(f"n_patients={n_patients!r} must be >= 1")
    if parallelism < 1:
        raise ParameterDomainError(f"parallelism={parallelism!r} must be >= 1")
    if config is None:
        from ..config import default_lab_config  # lazy import to avoid cycles

        config = default_lab_config()
    scenarios = tuple(scenarios)
    if not scenarios:
        raise ParameterDomainError("at least one scenario is required")
    kinds = [s.controller for s in scenarios]
    if len(set(kinds)) != len(kinds):
        raise ParameterDomainError(f"duplicate controller kinds in scenarios: {kinds}")
    if cohort is None:
        cohort = sample_cohort(n_patients, config.uncertainty, master_seed)
    cohort = list(cohort)[:n_patients]

    tasks = [(p, s, config, emit_traces) for s in scenarios for p in cohort]
    logger.info(
        "monte carlo: %d patients x %d controllers, %d workers",
        len(cohort),
        len(scenarios),
        parallelism,
    )
    bar = tqdm(total=len(tasks), desc='runs', unit='run', disable=not progress)
    results: List[RunResult] = []
    if parallelism == 1:
        for task in tasks:
            results.append(_run_one(task))
            bar.update(1)
    else:
        with multiprocessing.Pool(parallelism) as pool:
            for result in pool.imap_unordered(_run_one, tasks):
                results.append(result)
                bar.update(1)
    bar.close()

    order = {kind: i for i, kind in enumerate(kinds)}
    results.sort(key=lambda r: (order[r.controller], r.patient_index))

    summaries = {}
    for scenario in scenarios:
        runs = [r for r in results if r.controller == scenario.controller]
        done = [r.metrics for r in runs if r.ok]
        failed = len(runs) - len(done)
        if failed:
            logger.warning("%s: %d of %d runs failed", scenario.controller, failed, len(runs))
        summaries[scenario.controller] = summarize_metrics(
            scenario.controller, done, scenario.duration / 60.0, n_failed=failed
        )
    return MonteCarloResult(
        scenarios=scenarios,
        results=results,
        summaries=summaries,
        envelope=_envelope(scenarios, results),
    )
