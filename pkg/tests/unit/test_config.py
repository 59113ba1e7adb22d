#!/usr/bin/env python3
import json
import os
import pathlib
import sys
import tempfile
import unittest
import warnings

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.config import (
    config_from_mapping,
    default_lab_config,
    load_config,
    merge_defaults,
    write_default_config,
)
from tivalab.control import GovernorConfig, PidConfig
from tivalab.errors import ConfigError
from tivalab.model_bank import GridSpec, SelectorConfig
from tivalab.population import UncertaintySpec
from tivalab.simulation.closed_loop import ScenarioConfig
from tivalab.validation import validate_config


class TestDefaults(unittest.TestCase):
    def test_empty_mapping_gives_library_defaults(self):
        cfg = config_from_mapping({})
        self.assertEqual(cfg.uncertainty, UncertaintySpec.published())
        self.assertEqual(cfg.grid, GridSpec())
        self.assertEqual(cfg.selector, SelectorConfig())
        self.assertEqual(cfg.governor, GovernorConfig())
        self.assertEqual(cfg.pid, PidConfig())
        self.assertEqual(cfg.scenario, ScenarioConfig())
        self.assertEqual(cfg.mpc.n, 30)
        self.assertEqual(cfg.mpc.r[0, 0], 6.0e5)
        self.assertEqual(cfg.montecarlo.n_patients, 100)

    def test_cached_default(self):
        self.assertIs(default_lab_config(), default_lab_config())

    def test_merge_keeps_siblings(self):
        merged = merge_defaults({'mpc': {'n_u': 10}})
        self.assertEqual(merged['mpc']['n_u'], 10)
        self.assertEqual(merged['mpc']['n'], 30)

    def test_clamped_variant(self):
        cfg = config_from_mapping({'uncertainty': {'variant': 'clamped'}})
        self.assertEqual(cfg.uncertainty.clamp_sigmas, 3.0)


class TestValidation(unittest.TestCase):
    def _paths(self, mapping, severity='error'):
        return [i.path for i in validate_config(mapping).issues if i.severity == severity]

    def test_control_horizon_longer_than_prediction(self):
        self.assertIn('/mpc/n_u', self._paths({'mpc': {'n': 10, 'n_u': 20}}))

    def test_negative_hysteresis(self):
        self.assertIn('/selector/delta', self._paths({'selector': {'delta': -1}}))

    def test_sampling_period_not_multiple_of_base_step(self):
        self.assertIn('/pid/ts', self._paths({'pid': {'ts': 1.5}}))

    def test_section_must_be_mapping(self):
        self.assertIn('/mpc', self._paths({'mpc': 5}))

    def test_unknown_key_is_a_warning(self):
        result = validate_config({'selector': {'n_c': 20, 'colour': 'red'}})
        self.assertTrue(result.ok())
        self.assertIn('/selector/colour', self._paths({'selector': {'colour': 'red'}}, 'warn'))

    def test_wide_unclamped_spread_warns(self):
        warned = self._paths({'uncertainty': {'variant': 'published'}}, 'warn')
        self.assertIn('/uncertainty/propofol/v3', warned)
        self.assertEqual(self._paths({'uncertainty': {'variant': 'clamped'}}, 'warn'), [])

    def test_config_error_carries_issues(self):
        with self.assertRaises(ConfigError) as ctx:
            config_from_mapping({'selector': {'delta': -1}, 'mpc': {'gtol': 0}})
        paths = [i.path for i in ctx.exception.issues]
        self.assertEqual(sorted(paths), ['/mpc/gtol', '/selector/delta'])

    def test_unknown_key_surfaces_as_user_warning(self):
        with self.assertWarns(UserWarning):
            cfg = config_from_mapping({'bogus': 1})
        self.assertEqual(cfg.pid, PidConfig())


class TestFiles(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = pathlib.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_yaml_file(self):
        path = self.tmp / 'lab.yaml'
        path.write_text('pid:\n  kp: 0.05\nscenario:\n  duration: 300\n', encoding='utf-8')
        cfg = load_config(path)
        self.assertEqual(cfg.pid.kp, 0.05)
        self.assertEqual(cfg.scenario.duration, 300.0)
        self.assertEqual(cfg.source, str(path))

    def test_json_file(self):
        path = self.tmp / 'lab.json'
        path.write_text(json.dumps({'montecarlo': {'n_patients': 5}}), encoding='utf-8')
        self.assertEqual(load_config(path).montecarlo.n_patients, 5)

    def test_empty_yaml_is_defaults(self):
        path = self.tmp / 'empty.yml'
        path.write_text('', encoding='utf-8')
        self.assertEqual(load_config(path).pid, PidConfig())

    def test_unreadable_inputs(self):
        with self.assertRaises(ConfigError):
            load_config(self.tmp / 'missing.yaml')
        bad_suffix = self.tmp / 'lab.toml'
        bad_suffix.write_text('x = 1', encoding='utf-8')
        with self.assertRaises(ConfigError):
            load_config(bad_suffix)
        broken = self.tmp / 'broken.yaml'
        broken.write_text('mpc: [1, 2\n', encoding='utf-8')
        with self.assertRaises(ConfigError):
            load_config(broken)
        scalar = self.tmp / 'scalar.json'
        scalar.write_text('42', encoding='utf-8')
        with self.assertRaises(ConfigError):
            load_config(scalar)

    def test_written_defaults_load_back(self):
        path = write_default_config(self.tmp / 'out' / 'tivalab.yaml')
        self.assertTrue(path.is_file())
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UserWarning)
            cfg = load_config(path)
        self.assertEqual(cfg.pid, PidConfig())
        self.assertEqual(cfg.grid, GridSpec())
        self.assertEqual(cfg.montecarlo.controllers, ('pid', 'nmpc', 'mmpc'))


if __name__ == '__main__':
    unittest.main()
