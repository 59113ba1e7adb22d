"""Configuration defaults, file loading and typed bundles.

A configuration file is a partial mapping deep-merged over :data:`DEFAULTS`.
Every section maps onto one dataclass of the library; :func:`build_lab_config`
does the conversion and :func:`load_config` adds file reading and validation.
"""

import copy
import functools
import json
import pathlib
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

import numpy as np
import yaml

from .control.governor import GovernorConfig
from .control.mpc import MpcConfig
from .control.pid import PidConfig
from .control.tuning import TuningConfig, TuningSpace
from .errors import ConfigError, ParameterDomainError
from .estimation import EkfConfig
from .model_bank import GridSpec, SelectorConfig
from .population import (
    PD_TABLE,
    PROPOFOL_PK_TABLE,
    REMIFENTANIL_PK_TABLE,
    DemographicRanges,
    UncertaintySpec,
)
from .simulation.closed_loop import CONTROLLER_KINDS, NoiseSpec, ScenarioConfig
from .simulation.monte_carlo import MonteCarloConfig
from .utils.file_ops import PathLike, write_text
from .validation import validate_config

UNCERTAINTY_VARIANTS = ('published', 'clamped')


def _table(table):
    return {k: [float(v[0]), float(v[1])] for k, v in table.items()}


DEFAULTS: Dict[str, Any] = {
    'uncertainty': {
        'variant': 'published',
        'clamp_sigmas': 3.0,
        'propofol': _table(PROPOFOL_PK_TABLE),
        'remifentanil': _table(REMIFENTANIL_PK_TABLE),
        'pd': _table(PD_TABLE),
    },
    'demographics': {'age': [18.0, 70.0], 'height': [150.0, 190.0], 'weight': [50.0, 100.0]},
    'grid': {
        'c50p_quantiles': [0.1, 0.3, 0.5, 0.7, 0.9],
        'c50r_quantiles': [0.2, 0.5, 0.8],
        'gamma_quantiles': [0.2, 0.5, 0.8],
    },
    'selector': {'n_c': 30, 'alpha': 0.0, 'beta': 1.0, 'lambda': 0.05, 'delta': 30.0},
    'ekf': {'q_propofol': 1e-4, 'q_remifentanil': 2e-3, 'r2': 1.0, 'p0': 1e-3},
    'mpc': {
        'n': 30,
        'n_u': 30,
        'r': [[6.0e5, 0.0], [0.0, 4.5e4]],
        'ts': 2.0,
        'u_max': [6.67, 16.67],
        'exponent': 4.0,
        'max_iter': 100,
        'gtol': 1e-6,
        'time_budget': 0.5,
        'initial_fraction': 0.25,
    },
    'governor': {'k_i': 0.02, 'activation_time': 120.0},
    'pid': {'kp': 0.0354, 'ti': 511.8, 'td': 8.989, 'n_filter': 5.0, 'ratio': 2.0, 'ts': 1.0},
    'scenario': {
        'duration': 600.0,
        'base_ts': 1.0,
        'bis_target': 50.0,
        'band': [45.0, 55.0],
        'noise': {'kind': 'none', 'std': 3.0},
    },
    'montecarlo': {
        'n_patients': 100,
        'master_seed': 1234,
        'parallelism': 1,
        'controllers': list(CONTROLLER_KINDS),
    },
    'tuning': {
        'kp': [0.01, 0.1],
        'ti': [100.0, 1500.0],
        'td': [1.0, 30.0],
        'n_samples': 24,
        'refine_passes': 2,
        'seed': 0,
        'n_patients': 8,
        'undershoot_weight': 10.0,
        'worst_case_weight': 0.5,
    },
}


def merge_defaults(user: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """Deep-merge ``user`` over :data:`DEFAULTS`; user values win, unknown keys are kept."""

    def merge(base, over):
        out = copy.deepcopy(base)
        for key, value in over.items():
            if isinstance(value, Mapping) and isinstance(out.get(key), dict):
                out[key] = merge(out[key], value)
            else:
                out[key] = copy.deepcopy(value)
        return out

    return merge(DEFAULTS, user or {})


def _prune(mapping: Mapping[str, Any], reference: Mapping[str, Any]) -> Dict[str, Any]:
    """Drop keys absent from ``reference`` (they were reported as warnings)."""
    out = {}
    for key, value in mapping.items():
        if key not in reference:
            continue
        if isinstance(reference[key], dict) and isinstance(value, Mapping):
            out[key] = _prune(value, reference[key])
        else:
            out[key] = value
    return out


@dataclass(frozen=True, eq=False)
class LabConfig:
    uncertainty: UncertaintySpec
    grid: GridSpec
    selector: SelectorConfig
    ekf: EkfConfig
    mpc: MpcConfig
    governor: GovernorConfig
    pid: PidConfig
    scenario: ScenarioConfig
    montecarlo: MonteCarloConfig
    tuning: TuningConfig
    source: Optional[str] = None


def _rows(table: Mapping[str, Any]):
    return {k: (float(v[0]), float(v[1])) for k, v in table.items()}


def build_lab_config(mapping: Mapping[str, Any], source: Optional[str] = None) -> LabConfig:
    """Typed configuration from a merged mapping (see :func:`merge_defaults`)."""
    unc = mapping['uncertainty']
    demo = mapping['demographics']
    uncertainty = UncertaintySpec(
        propofol=_rows(unc['propofol']),
        remifentanil=_rows(unc['remifentanil']),
        pd=_rows(unc['pd']),
        clamp_sigmas=float(unc['clamp_sigmas']) if unc['variant'] == 'clamped' else None,
        demographics=DemographicRanges(
            age=tuple(demo['age']), height=tuple(demo['height']), weight=tuple(demo['weight'])
        ),
    )
    grid_map = mapping['grid']
    grid = GridSpec(
        c50p_quantiles=tuple(grid_map['c50p_quantiles']),
        c50r_quantiles=tuple(grid_map['c50r_quantiles']),
        gamma_quantiles=tuple(grid_map['gamma_quantiles']),
        c50p_sigma=uncertainty.pd['c50p'][1],
        c50r_sigma=uncertainty.pd['c50r'][1],
        gamma_sigma=uncertainty.pd['gamma'][1],
    )
    sel = mapping['selector']
    selector = SelectorConfig(
        n_c=int(sel['n_c']),
        alpha=float(sel['alpha']),
        beta=float(sel['beta']),
        lam=float(sel['lambda']),
        delta=float(sel['delta']),
    )
    ekf = EkfConfig.diagonal(**{k: float(v) for k, v in mapping['ekf'].items()})
    mpc_map = dict(mapping['mpc'])
    mpc = MpcConfig(
        n=int(mpc_map.pop('n')),
        n_u=int(mpc_map.pop('n_u')),
        r=np.asarray(mpc_map.pop('r'), dtype=float),
        u_max=tuple(mpc_map.pop('u_max')),
        max_iter=int(mpc_map.pop('max_iter')),
        **{k: float(v) for k, v in mpc_map.items()},
    )
    governor = GovernorConfig(**{k: float(v) for k, v in mapping['governor'].items()})
    pid = PidConfig(**{k: float(v) for k, v in mapping['pid'].items()})
    scen = mapping['scenario']
    scenario = ScenarioConfig(
        controller='mmpc',
        duration=float(scen['duration']),
        control_ts=mpc.ts,
        base_ts=float(scen['base_ts']),
        bis_target=float(scen['bis_target']),
        noise=NoiseSpec(kind=scen['noise']['kind'], std=float(scen['noise']['std'])),
        band=tuple(scen['band']),
    )
    mc = mapping['montecarlo']
    montecarlo = MonteCarloConfig(
        n_patients=int(mc['n_patients']),
        master_seed=int(mc['master_seed']),
        parallelism=int(mc['parallelism']),
        controllers=tuple(mc['controllers']),
    )
    tun = mapping['tuning']
    tuning = TuningConfig(
        space=TuningSpace(kp=tuple(tun['kp']), ti=tuple(tun['ti']), td=tuple(tun['td'])),
        n_samples=int(tun['n_samples']),
        refine_passes=int(tun['refine_passes']),
        seed=int(tun['seed']),
        n_patients=int(tun['n_patients']),
        undershoot_weight=float(tun['undershoot_weight']),
        worst_case_weight=float(tun['worst_case_weight']),
    )
    return LabConfig(
        uncertainty=uncertainty,
        grid=grid,
        selector=selector,
        ekf=ekf,
        mpc=mpc,
        governor=governor,
        pid=pid,
        scenario=scenario,
        montecarlo=montecarlo,
        tuning=tuning,
        source=source,
    )


@functools.lru_cache(maxsize=1)
def default_lab_config() -> LabConfig:
    return build_lab_config(merge_defaults({}))


def read_config_file(path: PathLike) -> Dict[str, Any]:
    """Raw mapping from a YAML (``.yaml``/``.yml``) or JSON file."""
    cfg_path = pathlib.Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"config file not found: {cfg_path}")
    text = cfg_path.read_text(encoding='utf-8')
    suffix = cfg_path.suffix.lower()
    try:
        if suffix in ('.yaml', '.yml'):
            data = yaml.safe_load(text)
        elif suffix == '.json':
            data = json.loads(text)
        else:
            raise ConfigError(f"unsupported config format '{suffix}' (use .yaml, .yml or .json)")
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {cfg_path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{cfg_path}: top level must be a mapping")
    return dict(data)


def config_from_mapping(user: Mapping[str, Any], source: Optional[str] = None) -> LabConfig:
    """Merge, validate and build; warnings are surfaced, errors raise :class:`ConfigError`."""
    result = validate_config(user)
    for issue in result.issues:
        if issue.severity == 'warn':
            warnings.warn(f"{issue.path}: {issue.message}", UserWarning)
    if not result.ok():
        errors = [i for i in result.issues if i.severity == 'error']
        lines = '; '.join(f"{i.path}: {i.message}" for i in errors)
        raise ConfigError(f"invalid configuration: {lines}", issues=errors)
    try:
        return build_lab_config(_prune(merge_defaults(user), DEFAULTS), source=source)
    except (ParameterDomainError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def load_config(path: PathLike) -> LabConfig:
    return config_from_mapping(read_config_file(path), source=str(path))


def write_default_config(path: PathLike) -> pathlib.Path:
    text = yaml.safe_dump(DEFAULTS, sort_keys=False, default_flow_style=None)
    return write_text(path, text)
