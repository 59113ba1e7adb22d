#!/usr/bin/env python3
"""Reduced-cohort induction study across the three controllers."""

import os
import sys
import unittest

import numpy as np

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.config import default_lab_config
from tivalab.pkpd import U_MAX_PROPOFOL, U_MAX_REMIFENTANIL
from tivalab.simulation.closed_loop import scenario_for
from tivalab.simulation.monte_carlo import run_monte_carlo

LAB = default_lab_config()
KINDS = ('mmpc', 'nmpc', 'pid')
# BIS units of slack on the cohort-mean undershoot ordering
US_SLACK = 1.0


class TestInductionStudy(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        scenarios = [scenario_for(kind, LAB, duration=420.0) for kind in KINDS]
        cls.result = run_monte_carlo(
            8, scenarios, 2024, parallelism=2, config=LAB, progress=False, emit_traces=True
        )

    def _mean_us(self, kind):
        return float(np.mean([r.metrics.us for r in self.result.for_controller(kind)]))

    def test_every_run_completes(self):
        self.assertEqual(self.result.failures, [])
        for kind in KINDS:
            self.assertEqual(len(self.result.for_controller(kind)), 8)
            for run in self.result.for_controller(kind):
                self.assertEqual(run.trace.solver_failures, 0)

    def test_undershoot_ordering(self):
        mmpc, nmpc, pid = (self._mean_us(kind) for kind in KINDS)
        self.assertLessEqual(mmpc, nmpc + US_SLACK, (mmpc, nmpc, pid))
        self.assertLessEqual(nmpc, pid + US_SLACK, (mmpc, nmpc, pid))

    def test_inputs_never_leave_bounds(self):
        for run in self.result.results:
            trace = run.trace
            self.assertTrue(np.all((trace.u_p >= 0.0) & (trace.u_p <= U_MAX_PROPOFOL)), run.controller)
            self.assertTrue(np.all((trace.u_r >= 0.0) & (trace.u_r <= U_MAX_REMIFENTANIL)), run.controller)

    def test_solver_wall_time_budget(self):
        for kind in ('mmpc', 'nmpc'):
            worst = max(r.max_solve_ms for r in self.result.for_controller(kind))
            self.assertLessEqual(worst, 500.0, kind)


if __name__ == '__main__':
    unittest.main()
