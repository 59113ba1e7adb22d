"""CSV, JSON and text outputs of closed-loop and cohort runs."""

import json
import logging
import pathlib
from typing import Dict, Optional

import pandas as pd

from ..utils.file_ops import PathLike, ensure_export_dir, write_text
from .closed_loop import RunTrace
from .metrics import METRIC_NAMES, MetricStats
from .monte_carlo import MonteCarloResult

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ('patient_id', 'controller', 'tt_min', 'nadir', 'st10_min', 'st20_min', 'us')
FLOAT_FORMAT = '%.6f'

_LABELS = {
    'tt': 'TT (min)',
    'bis_nadir': 'BIS_NADIR',
    'st10': 'ST10 (min)',
    'st20': 'ST20 (min)',
    'us': 'US',
}


def write_trace_csv(trace: RunTrace, path: PathLike) -> pathlib.Path:
    target = pathlib.Path(path)
    ensure_export_dir(target.parent)
    trace.to_frame().to_csv(target, index=False, float_format=FLOAT_FORMAT)
    return target


def metrics_frame(result: MonteCarloResult) -> pd.DataFrame:
    """One row per completed run; absent events are NaN (empty in CSV)."""
    rows = []
    for run in result.results:
        if not run.ok:
            continue
        m = run.metrics
        rows.append(
            {
                'patient_id': run.patient_index,
                'controller': run.controller,
                'tt_min': m.tt,
                'nadir': m.bis_nadir,
                'st10_min': m.st10,
                'st20_min': m.st20,
                'us': m.us,
            }
        )
    frame = pd.DataFrame(rows, columns=list(METRICS_COLUMNS))
    float_cols = list(METRICS_COLUMNS[2:])
    frame[float_cols] = frame[float_cols].astype(float)
    return frame


def write_metrics_csv(result: MonteCarloResult, path: PathLike) -> pathlib.Path:
    target = pathlib.Path(path)
    ensure_export_dir(target.parent)
    metrics_frame(result).to_csv(target, index=False, float_format=FLOAT_FORMAT, na_rep='')
    return target


def _stats_dict(stats: MetricStats) -> Dict[str, Optional[float]]:
    return {
        'mean': stats.mean,
        'std': stats.std,
        'extreme': stats.extreme,
        'n_defined': stats.n_defined,
        'n_absent': stats.n_absent,
    }


def summary_dict(result: MonteCarloResult) -> Dict[str, dict]:
    """Machine-readable summary per controller."""
    out = {}
    for kind, summary in result.summaries.items():
        runs = [r for r in result.for_controller(kind) if r.ok]
        worst = result.worst_case(kind)
        out[kind] = {
            'n_runs': summary.n_runs,
            'n_failed': summary.n_failed,
            'metrics': {name: _stats_dict(summary[name]) for name in METRIC_NAMES},
            'drug_ratio_ug_per_mg': result.drug_ratio(kind),
            'worst_case_patient': None if worst is None else worst.patient_index,
            'solve_ms_mean': (
                sum(r.mean_solve_ms for r in runs) / len(runs) if runs else None
            ),
            'solve_ms_max': max((r.max_solve_ms for r in runs), default=None),
            'non_converged_solves': sum(r.non_converged for r in runs),
            'model_switches': sum(r.switches for r in runs),
        }
    return out


def _fmt(value: Optional[float]) -> str:
    return '-' if value is None else f"{value:.2f}"


def summary_frame(result: MonteCarloResult) -> pd.DataFrame:
    """Rows per controller, ``mean ± std`` and max (min for the nadir) per metric."""
    rows = {}
    for kind, summary in result.summaries.items():
        row = {}
        for name in METRIC_NAMES:
            stats = summary[name]
            row[_LABELS[name]] = f"{_fmt(stats.mean)} ± {_fmt(stats.std)}"
            extreme_label = 'min' if name == 'bis_nadir' else 'max'
            row[f"{_LABELS[name]} {extreme_label}"] = _fmt(stats.extreme)
        row['n'] = summary.n_runs
        row['failed'] = summary.n_failed
        rows[kind.upper()] = row
    return pd.DataFrame.from_dict(rows, orient='index')


def format_summary(result: MonteCarloResult) -> str:
    return summary_frame(result).to_string()


def write_report(
    result: MonteCarloResult, out_dir: PathLike, emit_traces: bool = False
) -> Dict[str, pathlib.Path]:
    """Write metrics.csv, summary.json, summary.txt, bis_envelope.csv and optional traces."""
    out = ensure_export_dir(out_dir)
    written = {
        'metrics': write_metrics_csv(result, out / 'metrics.csv'),
        'summary_json': write_text(
            out / 'summary.json', json.dumps(summary_dict(result), indent=2)
        ),
        'summary_txt': write_text(out / 'summary.txt', format_summary(result)),
    }
    if not result.envelope.empty:
        envelope_path = out / 'bis_envelope.csv'
        result.envelope.to_csv(envelope_path, index=False, float_format=FLOAT_FORMAT)
        written['envelope'] = envelope_path
    if emit_traces:
        traces_dir = ensure_export_dir(out / 'traces')
        for run in result.results:
            if run.trace is not None:
                write_trace_csv(
                    run.trace, traces_dir / f"{run.controller}_{run.patient_index:04d}.csv"
                )
        for scenario in result.scenarios:
            worst = result.worst_case(scenario.controller)
            if worst is not None and worst.trace is not None:
                key = f"worst_{scenario.controller}"
                written[key] = write_trace_csv(worst.trace, out / f"{key}.csv")
    logger.info("report written to %s", out)
    return written
