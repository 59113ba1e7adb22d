#!/usr/bin/env python3
"""Command line interface for tiva-lab

Subcommands:
  run         one patient, one controller -> trace CSV
  montecarlo  cohort x controllers -> metrics CSV, summary, BIS envelope
  tune-pid    random/coordinate search of PID gains on a tuning cohort
  config      write the default configuration file
  validate    check a configuration file
"""

import argparse
import dataclasses
import logging
import pathlib
import sys
from typing import Any, Dict

import yaml

from .config import (
    LabConfig,
    config_from_mapping,
    default_lab_config,
    read_config_file,
    write_default_config,
)
from .control.tuning import search_pid_gains
from .errors import ConfigError, TivaLabError
from .population import nominal_patient, patient_seed, sample_cohort, sample_patient
from .simulation.closed_loop import CONTROLLER_KINDS, run_closed_loop, scenario_for
from .simulation.metrics import compute_metrics
from .simulation.monte_carlo import run_monte_carlo
from .simulation.reporting import format_summary, write_report, write_trace_csv
from .utils.file_ops import display_path, ensure_export_dir, format_file_size, write_text
from .validation import validate_config

DEFAULT_EXPORT_DIR = 'export'


def _overrides(args) -> Dict[str, Any]:
    mc: Dict[str, Any] = {}
    if getattr(args, 'n_patients', None) is not None:
        mc['n_patients'] = args.n_patients
    if getattr(args, 'seed', None) is not None:
        mc['master_seed'] = args.seed
    if getattr(args, 'parallelism', None) is not None:
        mc['parallelism'] = args.parallelism
    if getattr(args, 'controller', None):
        mc['controllers'] = [args.controller]
    return {'montecarlo': mc} if mc else {}


def _load(args) -> LabConfig:
    mapping: Dict[str, Any] = read_config_file(args.config) if args.config else {}
    overrides = _overrides(args)
    if not mapping and not overrides:
        return default_lab_config()
    for section, values in overrides.items():
        merged = dict(mapping.get(section) or {})
        merged.update(values)
        mapping[section] = merged
    return config_from_mapping(mapping, source=args.config)


def _fmt(value) -> str:
    return '-' if value is None else f"{value:.2f}"


def cmd_run(args) -> int:
    config = _load(args)
    kind = args.controller or 'mmpc'
    scenario = scenario_for(kind, config)
    if args.nominal:
        patient = nominal_patient(config.uncertainty)
    else:
        seed = patient_seed(config.montecarlo.master_seed, args.patient)
        patient = sample_patient(config.uncertainty, seed, index=args.patient)
    trace = run_closed_loop(patient, scenario, patient.seed, config)
    metrics = compute_metrics(trace, scenario.band, scenario.bis_target)

    out_dir = ensure_export_dir(args.out_dir)
    out_path = out_dir / (args.output or f"trace_{kind}_{patient.index:04d}.csv")
    write_trace_csv(trace, out_path)
    print(f"✅ Trace: {display_path(out_path)} ({format_file_size(out_path.stat().st_size)})")
    print(
        f"   {kind.upper()} patient {patient.index}: TT={_fmt(metrics.tt)} min "
        f"NADIR={_fmt(metrics.bis_nadir)} ST10={_fmt(metrics.st10)} min "
        f"ST20={_fmt(metrics.st20)} min US={_fmt(metrics.us)}"
    )
    if trace.solver_failures:
        print(f"⚠️  {trace.solver_failures} solver failures (last input held)")
    return 0


def cmd_montecarlo(args) -> int:
    config = _load(args)
    mc = config.montecarlo
    scenarios = [scenario_for(kind, config) for kind in mc.controllers]
    result = run_monte_carlo(
        mc.n_patients,
        scenarios,
        mc.master_seed,
        parallelism=mc.parallelism,
        config=config,
        emit_traces=args.emit_traces,
        progress=not args.no_progress,
    )
    written = write_report(result, args.out_dir, emit_traces=args.emit_traces)
    print(format_summary(result))
    print()
    for kind in mc.controllers:
        worst = result.worst_case(kind)
        ratio = result.drug_ratio(kind)
        if worst is not None:
            print(
                f"   {kind.upper()}: worst undershoot patient {worst.patient_index} "
                f"(US={worst.metrics.us:.2f}), drug ratio {_fmt(ratio)} µg/mg"
            )
    for name, path in written.items():
        print(f"✅ {name}: {display_path(path)}")
    failures = result.failures
    if failures:
        print(f"⚠️  {len(failures)} runs failed and were excluded", file=sys.stderr)
    return 0


def cmd_tune_pid(args) -> int:
    config = _load(args)
    tuning = config.tuning
    if args.n_patients is not None or args.seed is not None:
        tuning = dataclasses.replace(
            tuning,
            n_patients=args.n_patients if args.n_patients is not None else tuning.n_patients,
            seed=args.seed if args.seed is not None else tuning.seed,
        )
    cohort = sample_cohort(tuning.n_patients, config.uncertainty, tuning.seed)
    result = search_pid_gains(cohort, tuning=tuning, lab=config)
    pid = result.config
    out_dir = ensure_export_dir(args.out_dir)
    out_path = write_text(
        out_dir / 'pid_tuned.yaml',
        yaml.safe_dump({'pid': dataclasses.asdict(pid)}, sort_keys=False),
    )
    print(
        f"✅ Tuned PID kp={pid.kp:.5g} ti={pid.ti:.5g} td={pid.td:.5g} "
        f"score={result.score:.4f} ({result.evaluations} candidates)"
    )
    print(f"✅ Written: {display_path(out_path)}")
    return 0


def cmd_config(args) -> int:
    path = pathlib.Path(args.output)
    if path.exists() and not args.force:
        print(f"ERROR: {path} exists (use --force to overwrite)", file=sys.stderr)
        return 1
    write_default_config(path)
    print(f"✅ Default configuration written to {display_path(path)}")
    return 0


def cmd_validate(args) -> int:
    result = validate_config(read_config_file(args.config))
    for issue in result.issues:
        print(f"{issue.severity.upper()}: {issue.path}: {issue.message}")
    if not result.ok():
        return 1
    print("Config valid: no errors")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument('--config', help='YAML or JSON configuration file')
    p.add_argument('--out-dir', default=DEFAULT_EXPORT_DIR)


def build_parser():
    p = argparse.ArgumentParser(prog='tivalab', description=__doc__.splitlines()[1])
    p.add_argument(
        '--log-level',
        default='WARNING',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='logging level (default: WARNING)',
    )
    p.add_argument('-v', '--verbose', action='store_true', help='shorthand for --log-level INFO')
    sub = p.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='simulate one patient and write its trace CSV')
    _add_common(run)
    run.add_argument('--controller', choices=CONTROLLER_KINDS, default='mmpc')
    run.add_argument('--patient', type=int, default=0, help='cohort index of the patient')
    run.add_argument('--seed', type=int, help='master seed of the cohort')
    run.add_argument('--nominal', action='store_true', help='use the nominal patient')
    run.add_argument('-o', '--output', help='trace file name inside --out-dir')
    run.set_defaults(func=cmd_run)

    mc = sub.add_parser('montecarlo', help='run a cohort through the controllers')
    _add_common(mc)
    mc.add_argument('--controller', choices=CONTROLLER_KINDS, help='restrict to one controller')
    mc.add_argument('--n-patients', type=int)
    mc.add_argument('--seed', type=int, help='master seed of the cohort')
    mc.add_argument('--parallelism', type=int, help='worker processes')
    mc.add_argument('--emit-traces', action='store_true', help='write every run trace')
    mc.add_argument('--no-progress', action='store_true', help='hide the progress bar')
    mc.set_defaults(func=cmd_montecarlo)

    tune = sub.add_parser('tune-pid', help='search PID gains on a tuning cohort')
    _add_common(tune)
    tune.add_argument('--n-patients', type=int)
    tune.add_argument('--seed', type=int, help='tuning cohort and search seed')
    tune.set_defaults(func=cmd_tune_pid)

    cfg = sub.add_parser('config', help='write the default configuration')
    cfg.add_argument('-o', '--output', default='tivalab.yaml')
    cfg.add_argument('--force', action='store_true')
    cfg.set_defaults(func=cmd_config)

    val = sub.add_parser('validate', help='validate a configuration file')
    val.add_argument('config')
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = 'INFO' if args.verbose and args.log_level == 'WARNING' else args.log_level
    logging.basicConfig(level=getattr(logging, level), format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args) or 0
    except ConfigError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 2
    except TivaLabError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
