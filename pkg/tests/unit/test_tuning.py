#!/usr/bin/env python3
import os
import sys
import unittest
from types import SimpleNamespace

import numpy as np

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.control.pid import PidConfig
from tivalab.control.tuning import (
    TuningConfig,
    TuningSpace,
    induction_objective,
    search_pid_gains,
    tune_pid,
)
from tivalab.errors import ParameterDomainError
from tivalab.population import UncertaintySpec, sample_cohort
from tivalab.simulation.closed_loop import ScenarioConfig

COHORT = sample_cohort(2, UncertaintySpec.published(), 7)
SCENARIO = ScenarioConfig(controller='pid', duration=120.0, control_ts=1.0)
DEFAULT = PidConfig()


class TestObjective(unittest.TestCase):
    def test_tracking_error_plus_undershoot(self):
        trace = SimpleNamespace(bis_measured=np.array([60.0, 40.0]))
        self.assertAlmostEqual(induction_objective(trace, 50.0, 45.0, 10.0), 10.0 + 10.0 * 5.0)

    def test_no_undershoot_inside_band(self):
        trace = SimpleNamespace(bis_measured=np.array([52.0, 48.0]))
        self.assertAlmostEqual(induction_objective(trace), 2.0)


class TestSearch(unittest.TestCase):
    def test_degenerate_box_returns_its_point(self):
        space = TuningSpace(
            kp=(DEFAULT.kp, DEFAULT.kp), ti=(DEFAULT.ti, DEFAULT.ti), td=(DEFAULT.td, DEFAULT.td)
        )
        tuned = tune_pid(
            COHORT,
            tuning=TuningConfig(space=space, n_samples=2, refine_passes=1),
            scenario=SCENARIO,
        )
        self.assertAlmostEqual(tuned.kp, DEFAULT.kp, places=9)
        self.assertAlmostEqual(tuned.ti, DEFAULT.ti, places=6)
        self.assertAlmostEqual(tuned.td, DEFAULT.td, places=9)
        self.assertEqual(tuned.ratio, DEFAULT.ratio)

    def test_never_worse_than_starting_gains(self):
        result = search_pid_gains(
            COHORT, tuning=TuningConfig(n_samples=3, refine_passes=1), scenario=SCENARIO
        )
        base_score = result.history[0][3]
        self.assertEqual(result.history[0][:3], (DEFAULT.kp, DEFAULT.ti, DEFAULT.td))
        self.assertLessEqual(result.score, base_score)

    def test_deterministic_for_seed(self):
        tuning = TuningConfig(n_samples=2, refine_passes=0, seed=3)
        first = tune_pid(COHORT, tuning=tuning, scenario=SCENARIO)
        second = tune_pid(COHORT, tuning=tuning, scenario=SCENARIO)
        self.assertEqual(first, second)

    def test_custom_objective(self):
        result = search_pid_gains(
            COHORT,
            objective=lambda trace: 1.0,
            tuning=TuningConfig(n_samples=1, refine_passes=0),
            scenario=SCENARIO,
        )
        self.assertAlmostEqual(result.score, 1.5)
        self.assertEqual(result.evaluations, 2)

    def test_empty_cohort(self):
        with self.assertRaises(ParameterDomainError):
            tune_pid([], scenario=SCENARIO)


if __name__ == '__main__':
    unittest.main()
