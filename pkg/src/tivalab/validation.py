from dataclasses import dataclass
from numbers import Real
from typing import Any, List, Mapping, Optional

import numpy as np


@dataclass
class ValidationIssue:
    path: str
    message: str
    severity: str = "error"  # 'error' | 'warn'


@dataclass
class ValidationResult:
    issues: List[ValidationIssue]

    def ok(self) -> bool:
        return all(i.severity != 'error' for i in self.issues)

    def errors(self) -> List[ValidationIssue]:
        return [i for i in self.issues if i.severity == 'error']


# log std above which unclamped draws reach implausible magnitudes
WIDE_LOG_STD = 1.0


class _Checker:
    def __init__(self):
        self.issues: List[ValidationIssue] = []

    def error(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path=path, message=message))

    def warn(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path=path, message=message, severity='warn'))

    def number(
        self,
        path: str,
        value: Any,
        lo: Optional[float] = None,
        hi: Optional[float] = None,
        strict_lo: bool = False,
        integer: bool = False,
    ) -> bool:
        if isinstance(value, bool) or not isinstance(value, Real) or not np.isfinite(value):
            self.error(path, f"expected a finite number, got {value!r}")
            return False
        if integer and int(value) != value:
            self.error(path, f"expected an integer, got {value!r}")
            return False
        if lo is not None and (value <= lo if strict_lo else value < lo):
            self.error(path, f"must be {'>' if strict_lo else '>='} {lo}, got {value!r}")
            return False
        if hi is not None and value > hi:
            self.error(path, f"must be <= {hi}, got {value!r}")
            return False
        return True

    def pair(self, path: str, value: Any, positive: bool = True) -> bool:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            self.error(path, f"expected a [low, high] pair, got {value!r}")
            return False
        ok = all(self.number(f"{path}/{i}", v, 0.0, strict_lo=positive) for i, v in enumerate(value))
        if ok and value[0] > value[1]:
            self.error(path, f"low {value[0]} exceeds high {value[1]}")
            return False
        return ok


def _unknown_keys(check: _Checker, mapping: Mapping, reference: Mapping, path: str = '') -> None:
    for key, value in mapping.items():
        if key not in reference:
            check.warn(f"{path}/{key}", "unknown key ignored")
        elif isinstance(reference[key], dict):
            if isinstance(value, Mapping):
                _unknown_keys(check, value, reference[key], f"{path}/{key}")
            else:
                check.error(f"{path}/{key}", "expected a mapping")


def _check_uncertainty(check: _Checker, unc: Mapping, explicit: bool) -> None:
    variant = unc.get('variant')
    if variant not in ('published', 'clamped'):
        check.error('/uncertainty/variant', f"must be 'published' or 'clamped', got {variant!r}")
    check.number('/uncertainty/clamp_sigmas', unc.get('clamp_sigmas'), 0.0, strict_lo=True)
    for table in ('propofol', 'remifentanil', 'pd'):
        rows = unc.get(table)
        if not isinstance(rows, Mapping):
            continue
        for key, row in rows.items():
            path = f"/uncertainty/{table}/{key}"
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                check.error(path, f"expected [nominal, log_std], got {row!r}")
                continue
            nominal_ok = check.number(f"{path}/0", row[0], 0.0, strict_lo=True)
            sigma_ok = check.number(f"{path}/1", row[1], 0.0)
            if sigma_ok and explicit and variant == 'published' and row[1] > WIDE_LOG_STD:
                check.warn(
                    path,
                    f"log std {row[1]} gives extreme unclamped draws; "
                    "consider uncertainty.variant: clamped",
                )
            if key == 'e0':
                if nominal_ok and row[0] > 100:
                    check.error(f"{path}/0", "E0 must lie in (0, 100]")
                if sigma_ok and row[1] != 0:
                    check.error(f"{path}/1", "E0 is fixed; its log std must be 0")


def _check_mpc(check: _Checker, mpc: Mapping) -> None:
    n_ok = check.number('/mpc/n', mpc.get('n'), 1, integer=True)
    nu_ok = check.number('/mpc/n_u', mpc.get('n_u'), 1, integer=True)
    if n_ok and nu_ok and mpc['n_u'] > mpc['n']:
        check.error('/mpc/n_u', f"control horizon {mpc['n_u']} exceeds prediction horizon {mpc['n']}")
    r = mpc.get('r')
    try:
        r_arr = np.asarray(r, dtype=float)
    except (TypeError, ValueError):
        r_arr = None
    if r_arr is None or r_arr.shape != (2, 2) or not np.all(np.isfinite(r_arr)):
        check.error('/mpc/r', "expected a 2x2 numeric matrix")
    elif not np.allclose(r_arr, r_arr.T) or np.min(np.linalg.eigvalsh(r_arr)) < -1e-12:
        check.error('/mpc/r', "must be symmetric positive semi-definite")
    check.number('/mpc/ts', mpc.get('ts'), 0.0, strict_lo=True)
    u_max = mpc.get('u_max')
    if not isinstance(u_max, (list, tuple)) or len(u_max) != 2:
        check.error('/mpc/u_max', "expected [propofol mg/s, remifentanil µg/s]")
    else:
        check.number('/mpc/u_max/0', u_max[0], 0.0, 6.67, strict_lo=True)
        check.number('/mpc/u_max/1', u_max[1], 0.0, 16.67, strict_lo=True)
    check.number('/mpc/exponent', mpc.get('exponent'), 1.0, strict_lo=True)
    check.number('/mpc/max_iter', mpc.get('max_iter'), 1, integer=True)
    check.number('/mpc/gtol', mpc.get('gtol'), 0.0, strict_lo=True)
    check.number('/mpc/time_budget', mpc.get('time_budget'), 0.0, strict_lo=True)
    check.number('/mpc/initial_fraction', mpc.get('initial_fraction'), 0.0, 1.0)


def _multiple(step: float, total: float) -> bool:
    ratio = total / step
    return abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1


def _check_scenario(check: _Checker, cfg: Mapping) -> None:
    scen = cfg['scenario']
    duration_ok = check.number('/scenario/duration', scen.get('duration'), 0.0, strict_lo=True)
    base_ok = check.number('/scenario/base_ts', scen.get('base_ts'), 0.0, strict_lo=True)
    target_ok = check.number('/scenario/bis_target', scen.get('bis_target'), 0.0, 100.0, strict_lo=True)
    if check.pair('/scenario/band', scen.get('band')) and target_ok:
        lo, hi = scen['band']
        if not lo < hi:
            check.error('/scenario/band', "band must be increasing")
        elif not lo <= scen['bis_target'] <= hi:
            check.warn('/scenario/band', "bis_target lies outside the target band")
    noise = scen.get('noise')
    if isinstance(noise, Mapping):
        if noise.get('kind') not in ('none', 'gaussian'):
            check.error('/scenario/noise/kind', f"must be 'none' or 'gaussian', got {noise.get('kind')!r}")
        check.number('/scenario/noise/std', noise.get('std'), 0.0)
    if not (duration_ok and base_ok):
        return
    for section in ('mpc', 'pid'):
        ts = cfg[section].get('ts')
        if not isinstance(ts, Real) or ts <= 0:
            continue
        if not _multiple(scen['base_ts'], ts):
            check.error(f"/{section}/ts", f"{ts} s is not a multiple of base_ts {scen['base_ts']} s")
        elif not _multiple(ts, scen['duration']):
            check.error(f"/{section}/ts", f"{ts} s does not divide duration {scen['duration']} s")


def validate_config(mapping: Mapping[str, Any]) -> ValidationResult:
    """Validate a (partial) configuration mapping after merging it over the defaults.

    Unknown keys are warnings; every domain violation is an error located by a
    slash path such as ``/mpc/n_u``.
    """
    from tivalab.config import DEFAULTS, merge_defaults  # lazy import to avoid cycles

    check = _Checker()
    if not isinstance(mapping, Mapping):
        return ValidationResult([ValidationIssue(path='/', message='config root not a mapping')])
    _unknown_keys(check, mapping, DEFAULTS)
    if check.issues and not ValidationResult(check.issues).ok():
        return ValidationResult(check.issues)
    cfg = merge_defaults(mapping)

    _check_uncertainty(check, cfg['uncertainty'], explicit='uncertainty' in mapping)
    for name in ('age', 'height', 'weight'):
        check.pair(f"/demographics/{name}", cfg['demographics'].get(name))
    for axis in ('c50p_quantiles', 'c50r_quantiles', 'gamma_quantiles'):
        levels = cfg['grid'].get(axis)
        if not isinstance(levels, (list, tuple)) or not levels:
            check.error(f"/grid/{axis}", "expected a nonempty list of quantile levels")
            continue
        for i, q in enumerate(levels):
            if check.number(f"/grid/{axis}/{i}", q, 0.0, 1.0, strict_lo=True) and q >= 1.0:
                check.error(f"/grid/{axis}/{i}", "quantile levels must lie in (0, 1)")

    sel = cfg['selector']
    check.number('/selector/n_c', sel.get('n_c'), 1, integer=True)
    check.number('/selector/alpha', sel.get('alpha'), 0.0)
    check.number('/selector/beta', sel.get('beta'), 0.0)
    check.number('/selector/lambda', sel.get('lambda'), 0.0, strict_lo=True)
    check.number('/selector/delta', sel.get('delta'), 0.0)

    ekf = cfg['ekf']
    check.number('/ekf/q_propofol', ekf.get('q_propofol'), 0.0)
    check.number('/ekf/q_remifentanil', ekf.get('q_remifentanil'), 0.0)
    check.number('/ekf/r2', ekf.get('r2'), 0.0, strict_lo=True)
    check.number('/ekf/p0', ekf.get('p0'), 0.0, strict_lo=True)

    _check_mpc(check, cfg['mpc'])

    gov = cfg['governor']
    check.number('/governor/k_i', gov.get('k_i'), 0.0)
    check.number('/governor/activation_time', gov.get('activation_time'), 0.0)

    pid = cfg['pid']
    for key in ('kp', 'td'):
        check.number(f"/pid/{key}", pid.get(key), 0.0)
    for key in ('ti', 'n_filter', 'ratio', 'ts'):
        check.number(f"/pid/{key}", pid.get(key), 0.0, strict_lo=True)

    _check_scenario(check, cfg)

    mc = cfg['montecarlo']
    check.number('/montecarlo/n_patients', mc.get('n_patients'), 1, integer=True)
    check.number('/montecarlo/master_seed', mc.get('master_seed'), 0, integer=True)
    check.number('/montecarlo/parallelism', mc.get('parallelism'), 1, integer=True)
    kinds = mc.get('controllers')
    allowed = ('pid', 'nmpc', 'mmpc')
    if not isinstance(kinds, (list, tuple)) or not kinds or any(k not in allowed for k in kinds):
        check.error('/montecarlo/controllers', f"expected a nonempty subset of {list(allowed)}")

    tun = cfg['tuning']
    for key in ('kp', 'ti', 'td'):
        check.pair(f"/tuning/{key}", tun.get(key))
    for key in ('n_samples', 'refine_passes', 'seed'):
        check.number(f"/tuning/{key}", tun.get(key), 0, integer=True)
    check.number('/tuning/n_patients', tun.get('n_patients'), 1, integer=True)
    check.number('/tuning/undershoot_weight', tun.get('undershoot_weight'), 0.0)
    check.number('/tuning/worst_case_weight', tun.get('worst_case_weight'), 0.0)
    return ValidationResult(check.issues)
