"""PID gain search on a tuning cohort.

Random log-uniform sampling inside the gain boxes followed by a few
coordinate-descent passes in log space. The score of a gain set is the mean
per-patient objective plus a weight on the worst patient.
"""

import dataclasses
import functools
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ParameterDomainError
from ..population import SampledPatient
from .pid import PidConfig

if TYPE_CHECKING:
    from ..config import LabConfig
    from ..simulation.closed_loop import RunTrace, ScenarioConfig

logger = logging.getLogger(__name__)

GAINS = ('kp', 'ti', 'td')


@dataclass(frozen=True)
class TuningSpace:
    kp: Tuple[float, float] = (0.01, 0.1)
    ti: Tuple[float, float] = (100.0, 1500.0)
    td: Tuple[float, float] = (1.0, 30.0)

    def __post_init__(self):
        for name in GAINS:
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ParameterDomainError(f"gain box {name}=({lo}, {hi}) must satisfy 0 < lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def log_bounds(self) -> np.ndarray:
        return np.log(np.array([getattr(self, name) for name in GAINS]))

    def contains(self, pid: PidConfig) -> bool:
        return all(getattr(self, n)[0] <= getattr(pid, n) <= getattr(self, n)[1] for n in GAINS)


@dataclass(frozen=True)
class TuningConfig:
    space: TuningSpace = field(default_factory=TuningSpace)
    n_samples: int = 24
    refine_passes: int = 2
    seed: int = 0
    n_patients: int = 8
    undershoot_weight: float = 10.0
    worst_case_weight: float = 0.5

    def __post_init__(self):
        if self.n_samples < 0 or self.refine_passes < 0:
            raise ParameterDomainError("n_samples and refine_passes must be >= 0")
        if self.n_patients < 1:
            raise ParameterDomainError("n_patients must be >= 1")
        if self.undershoot_weight < 0 or self.worst_case_weight < 0:
            raise ParameterDomainError("objective weights must be >= 0")


@dataclass(frozen=True)
class TuningResult:
    config: PidConfig
    score: float
    evaluations: int
    history: Tuple[Tuple[float, float, float, float], ...]


def induction_objective(
    trace: 'RunTrace', target: float = 50.0, band_low: float = 45.0, undershoot_weight: float = 10.0
) -> float:
    """Mean absolute BIS error plus a weighted undershoot below ``band_low``."""
    iae = float(np.mean(np.abs(trace.bis_measured - target)))
    undershoot = max(0.0, band_low - float(np.min(trace.bis_measured)))
    return iae + undershoot_weight * undershoot


def search_pid_gains(
    cohort: Sequence[SampledPatient],
    objective: Optional[Callable[['RunTrace'], float]] = None,
    tuning: Optional[TuningConfig] = None,
    base: Optional[PidConfig] = None,
    lab: Optional['LabConfig'] = None,
    scenario: Optional['ScenarioConfig'] = None,
) -> TuningResult:
    from ..simulation.closed_loop import run_closed_loop, scenario_for  # lazy import to avoid cycles

    if not cohort:
        raise ParameterDomainError("tuning cohort is empty")
    tuning = tuning or TuningConfig()
    if lab is None:
        from ..config import default_lab_config  # lazy import to avoid cycles

        lab = default_lab_config()
    base = base or lab.pid
    scenario = scenario or scenario_for('pid', lab)
    if objective is None:
        objective = functools.partial(
            induction_objective,
            target=scenario.bis_target,
            band_low=scenario.band[0],
            undershoot_weight=tuning.undershoot_weight,
        )

    cache: Dict[Tuple[float, float, float], float] = {}
    history: List[Tuple[float, float, float, float]] = []

    def score(gains: np.ndarray) -> float:
        key = tuple(float(g) for g in gains)
        if key not in cache:
            pid = dataclasses.replace(base, kp=key[0], ti=key[1], td=key[2])
            candidate_lab = dataclasses.replace(lab, pid=pid)
            values = np.array(
                [
                    objective(run_closed_loop(p, scenario, p.seed, candidate_lab))
                    for p in cohort
                ]
            )
            cache[key] = float(values.mean() + tuning.worst_case_weight * values.max())
            history.append((*key, cache[key]))
        return cache[key]

    bounds = tuning.space.log_bounds()
    rng = np.random.default_rng(tuning.seed)
    candidates = [np.exp(rng.uniform(bounds[:, 0], bounds[:, 1])) for _ in range(tuning.n_samples)]
    if tuning.space.contains(base):
        candidates.insert(0, np.array([base.kp, base.ti, base.td]))
    if not candidates:
        candidates.append(np.exp(bounds.mean(axis=1)))

    best = min(candidates, key=score)
    best_score = score(best)
    logger.info("random search best %.4f at kp=%.4g ti=%.4g td=%.4g", best_score, *best)

    log_best = np.log(best)
    step = (bounds[:, 1] - bounds[:, 0]) / 4.0
    for _ in range(tuning.refine_passes):
        for i in range(len(GAINS)):
            for direction in (-1.0, 1.0):
                trial = log_best.copy()
                trial[i] = np.clip(trial[i] + direction * step[i], bounds[i, 0], bounds[i, 1])
                trial_score = score(np.exp(trial))
                if trial_score < best_score:
                    log_best, best_score = trial, trial_score
        step = step / 2.0
    gains = np.exp(log_best)
    config = dataclasses.replace(base, kp=float(gains[0]), ti=float(gains[1]), td=float(gains[2]))
    logger.info("tuned PID kp=%.4g ti=%.4g td=%.4g score=%.4f", config.kp, config.ti, config.td, best_score)
    return TuningResult(
        config=config, score=best_score, evaluations=len(cache), history=tuple(history)
    )


def tune_pid(
    cohort: Sequence[SampledPatient],
    objective: Optional[Callable[['RunTrace'], float]] = None,
    **kwargs,
) -> PidConfig:
    """Best PID gains found on ``cohort``; deterministic for a given tuning seed."""
    return search_pid_gains(cohort, objective, **kwargs).config
