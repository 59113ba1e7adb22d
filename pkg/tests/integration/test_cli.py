#!/usr/bin/env python3
import json
import os
import pathlib
import subprocess
import sys
import tempfile
import unittest

import pandas as pd
import yaml

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
SRC_PATH = os.path.join(PROJECT_ROOT, 'src')

SMALL = {
    'scenario': {'duration': 60},
    'montecarlo': {'n_patients': 2, 'controllers': ['pid', 'nmpc']},
    'tuning': {'n_samples': 1, 'refine_passes': 0, 'n_patients': 1},
}


class TestCli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = pathlib.Path(self._tmp.name)
        self.small = self._write_json('small.json', SMALL)

    def tearDown(self):
        self._tmp.cleanup()

    def _write_json(self, name, data):
        path = self.tmp / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return path

    def _run_cli(self, args, expect_code=0):
        cmd = [sys.executable, '-m', 'tivalab.cli'] + args
        env = os.environ.copy()
        env['PYTHONPATH'] = SRC_PATH + os.pathsep + env.get('PYTHONPATH', '')
        res = subprocess.run(cmd, cwd=PROJECT_ROOT, env=env, capture_output=True, text=True)
        if res.returncode != expect_code:
            self.fail(
                f"Command {cmd} exited {res.returncode}, expected {expect_code}\n"
                f"STDOUT:\n{res.stdout}\nSTDERR:\n{res.stderr}"
            )
        return res

    def test_config_then_validate(self):
        target = self.tmp / 'tivalab.yaml'
        self._run_cli(['config', '-o', str(target)])
        self.assertEqual(yaml.safe_load(target.read_text(encoding='utf-8'))['mpc']['n'], 30)
        self._run_cli(['config', '-o', str(target)], expect_code=1)
        res = self._run_cli(['validate', str(target)])
        self.assertIn('Config valid: no errors', res.stdout)
        self.assertIn('WARN: /uncertainty/propofol/v3', res.stdout)

    def test_validate_reports_errors(self):
        bad = self._write_json('bad.json', {'mpc': {'n': 10, 'n_u': 20}})
        res = self._run_cli(['validate', str(bad)], expect_code=1)
        self.assertIn('ERROR: /mpc/n_u', res.stdout)

    def test_invalid_config_exit_code(self):
        bad = self._write_json('bad.json', {'selector': {'delta': -1}})
        res = self._run_cli(['run', '--config', str(bad), '--out-dir', str(self.tmp)], expect_code=2)
        self.assertIn('/selector/delta', res.stderr)

    def test_run_nominal_pid(self):
        out = self.tmp / 'out'
        res = self._run_cli(
            ['run', '--config', str(self.small), '--controller', 'pid', '--nominal', '--out-dir', str(out)]
        )
        self.assertIn('Trace:', res.stdout)
        frame = pd.read_csv(out / 'trace_pid_0000.csv')
        self.assertEqual(len(frame), 60)
        self.assertEqual(frame['bis_true'].iloc[0], 97.4)

    def test_montecarlo(self):
        out = self.tmp / 'mc'
        res = self._run_cli(
            ['montecarlo', '--config', str(self.small), '--out-dir', str(out), '--no-progress']
        )
        self.assertIn('NMPC', res.stdout)
        metrics = pd.read_csv(out / 'metrics.csv')
        self.assertEqual(len(metrics), 4)
        self.assertEqual(sorted(metrics['controller'].unique()), ['nmpc', 'pid'])
        self.assertTrue((out / 'summary.json').is_file())
        self.assertTrue((out / 'bis_envelope.csv').is_file())

    def test_montecarlo_flags_override_config(self):
        out = self.tmp / 'mc1'
        self._run_cli(
            [
                'montecarlo', '--config', str(self.small), '--out-dir', str(out),
                '--controller', 'pid', '--n-patients', '1', '--no-progress',
            ]
        )
        metrics = pd.read_csv(out / 'metrics.csv')
        self.assertEqual(list(metrics['controller']), ['pid'])

    def test_tune_pid(self):
        out = self.tmp / 'tune'
        res = self._run_cli(['tune-pid', '--config', str(self.small), '--out-dir', str(out)])
        self.assertIn('Tuned PID', res.stdout)
        tuned = yaml.safe_load((out / 'pid_tuned.yaml').read_text(encoding='utf-8'))
        self.assertEqual(set(tuned['pid']), {'kp', 'ti', 'td', 'n_filter', 'ratio', 'ts'})


if __name__ == '__main__':
    unittest.main()
