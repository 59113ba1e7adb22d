#!/usr/bin/env python3
import os
import sys
import unittest

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.control.governor import GovernorConfig, ReferenceGovernor, governor_step
from tivalab.errors import ParameterDomainError


class TestGovernor(unittest.TestCase):
    def test_inactive_during_induction(self):
        gov = ReferenceGovernor(y_ref=42.0, k_i=0.1, bis_target=50.0)
        self.assertEqual(governor_step(gov, 70.0, 60.0), 50.0)
        self.assertEqual(governor_step(gov, 70.0, 119.9), 50.0)

    def test_integrates_target_error(self):
        gov = ReferenceGovernor.start(50.0, 0.1)
        self.assertAlmostEqual(governor_step(gov, 60.0, 130.0), 49.0)
        self.assertAlmostEqual(governor_step(gov, 40.0, 130.0), 51.0)

    def test_fixed_point_at_target(self):
        gov = GovernorConfig(k_i=0.5).start(50.0)
        for k in range(10):
            gov = gov.advance(50.0, 120.0 + 2.0 * k)
        self.assertEqual(gov.y_ref, 50.0)

    def test_offset_accumulates(self):
        gov = GovernorConfig(k_i=0.02).start(50.0)
        for k in range(5):
            gov = gov.advance(52.0, 120.0 + 2.0 * k)
        self.assertAlmostEqual(gov.y_ref, 50.0 - 5 * 0.04)

    def test_clamped_to_bis_range(self):
        low = ReferenceGovernor(y_ref=1.0, k_i=1.0, bis_target=50.0)
        self.assertEqual(governor_step(low, 100.0, 200.0), 0.0)
        self.assertGreater(low.advance(100.0, 200.0).y_ref, 0.0)
        high = ReferenceGovernor(y_ref=99.0, k_i=1.0, bis_target=50.0)
        self.assertEqual(governor_step(high, 0.0, 200.0), 100.0)

    def test_domain(self):
        with self.assertRaises(ParameterDomainError):
            ReferenceGovernor(y_ref=0.0, k_i=0.1, bis_target=50.0)
        with self.assertRaises(ParameterDomainError):
            GovernorConfig(k_i=-0.1)


if __name__ == '__main__':
    unittest.main()
