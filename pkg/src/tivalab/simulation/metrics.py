"""Induction performance metrics and their cohort summaries."""

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .closed_loop import RunTrace

METRIC_NAMES = ('tt', 'bis_nadir', 'st10', 'st20', 'us')


@dataclass(frozen=True)
class MetricsRecord:
    """Times in minutes, levels in BIS units; ``None`` marks an event that never happened."""

    tt: Optional[float]
    bis_nadir: float
    st10: Optional[float]
    st20: Optional[float]
    us: float

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def _settling_time(t: np.ndarray, bis: np.ndarray, lo: float, hi: float) -> Optional[float]:
    outside = np.flatnonzero((bis < lo) | (bis > hi))
    if outside.size == 0:
        return 0.0
    last = int(outside[-1])
    if last == len(bis) - 1:
        return None
    return float(t[last + 1]) / 60.0


def metrics_from_series(
    t,
    bis,
    band: Tuple[float, float] = (45.0, 55.0),
    target: float = 50.0,
) -> MetricsRecord:
    """Metrics of a BIS series sampled at times ``t`` (seconds)."""
    t = np.asarray(t, dtype=float)
    bis = np.asarray(bis, dtype=float)
    if bis.size == 0 or bis.shape != t.shape:
        raise ValueError("metrics need a nonempty BIS series matching its time grid")
    lo, hi = band
    inside = np.flatnonzero((bis >= lo) & (bis <= hi))
    tt = float(t[inside[0]]) / 60.0 if inside.size else None
    nadir = float(np.min(bis))
    return MetricsRecord(
        tt=tt,
        bis_nadir=nadir,
        st10=_settling_time(t, bis, target * 0.9, target * 1.1),
        st20=_settling_time(t, bis, target * 0.8, target * 1.2),
        us=max(0.0, lo - nadir),
    )


def compute_metrics(
    trace: RunTrace, target_band: Tuple[float, float] = (45.0, 55.0), target: float = 50.0
) -> MetricsRecord:
    """Metrics on the measured BIS of a closed-loop trace."""
    return metrics_from_series(trace.t, trace.bis_measured, target_band, target)


@dataclass(frozen=True)
class MetricStats:
    mean: Optional[float]
    std: Optional[float]
    extreme: Optional[float]
    n_defined: int
    n_absent: int


@dataclass(frozen=True)
class CohortSummary:
    controller: str
    n_runs: int
    n_failed: int
    stats: Dict[str, MetricStats]

    def __getitem__(self, metric: str) -> MetricStats:
        return self.stats[metric]


def _metric_stats(values: Sequence[Optional[float]], use_min: bool, cap: float) -> MetricStats:
    defined = np.array([v for v in values if v is not None], dtype=float)
    n_absent = len(values) - defined.size
    if defined.size == 0:
        return MetricStats(None, None, cap if n_absent else None, 0, n_absent)
    if use_min:
        extreme = float(np.min(defined))
    else:
        # absent events count at the cap in the max column only
        extreme = cap if n_absent else float(np.max(defined))
    return MetricStats(
        mean=float(np.mean(defined)),
        std=float(np.std(defined)),
        extreme=extreme,
        n_defined=int(defined.size),
        n_absent=n_absent,
    )


def summarize_metrics(
    controller: str,
    records: Sequence[MetricsRecord],
    duration_min: float,
    n_failed: int = 0,
) -> CohortSummary:
    """Mean, population std and max (min for the nadir) over completed runs."""
    stats = {
        name: _metric_stats(
            [getattr(r, name) for r in records], use_min=(name == 'bis_nadir'), cap=duration_min
        )
        for name in METRIC_NAMES
    }
    return CohortSummary(controller=controller, n_runs=len(records), n_failed=n_failed, stats=stats)
