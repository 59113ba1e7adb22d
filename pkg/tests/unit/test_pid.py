#!/usr/bin/env python3
import os
import sys
import unittest

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.control.pid import PidConfig, PidController, PidState, pid_step
from tivalab.errors import ParameterDomainError


class TestPidStep(unittest.TestCase):
    def test_zero_error_gives_zero_input(self):
        decision, state = pid_step(PidState(), 50.0, 50.0, PidConfig())
        self.assertEqual(decision.u_p, 0.0)
        self.assertEqual(decision.u_r, 0.0)
        self.assertEqual(state.last_bis, 50.0)

    def test_first_step_is_proportional_plus_integral(self):
        config = PidConfig()
        decision, state = pid_step(PidState(), 60.0, 50.0, config)
        integral = config.ts / config.ti * 10.0
        self.assertAlmostEqual(state.integral, integral)
        self.assertEqual(state.derivative, 0.0)
        self.assertAlmostEqual(decision.u_p, config.kp * (10.0 + integral))

    def test_remifentanil_follows_ratio(self):
        config = PidConfig(ratio=2.0)
        decision, _ = pid_step(PidState(), 70.0, 50.0, config)
        self.assertGreater(decision.u_p, 0.0)
        self.assertAlmostEqual(decision.u_r, 2.0 * decision.u_p)

    def test_constant_measurement_has_no_derivative(self):
        config = PidConfig()
        state = PidState()
        for _ in range(5):
            _, state = pid_step(state, 55.0, 50.0, config)
        self.assertEqual(state.derivative, 0.0)
        self.assertAlmostEqual(state.integral, 5 * config.ts / config.ti * 5.0)

    def test_saturation_freezes_integral(self):
        config = PidConfig(kp=1.0)
        state = PidState()
        for _ in range(20):
            decision, state = pid_step(state, 97.4, 50.0, config)
            self.assertEqual(decision.u_p, 6.67)
            self.assertEqual(decision.u_r, 16.67)
        self.assertEqual(state.integral, 0.0)

    def test_persistent_error_saturates_both_channels(self):
        config = PidConfig()
        state = PidState()
        for _ in range(3000):
            decision, state = pid_step(state, 97.4, 50.0, config)
        self.assertEqual(decision.u_p, 6.67)
        self.assertAlmostEqual(decision.u_r, 16.67)
        # integral stops where the slaved remifentanil channel reaches its bound
        self.assertAlmostEqual(state.integral, 16.67 / config.ratio / config.kp - 47.4, places=6)

    def test_no_windup_after_saturation(self):
        controller = PidController(PidConfig(kp=1.0))
        for _ in range(50):
            controller.step(97.4, 50.0)
        for _ in range(10):
            decision = controller.step(50.0, 50.0)
        self.assertEqual(decision.u_p, 0.0)
        self.assertEqual(decision.u_r, 0.0)

    def test_reset(self):
        controller = PidController(PidConfig())
        controller.step(80.0, 50.0)
        controller.reset()
        self.assertEqual(controller.state, PidState())

    def test_config_domain(self):
        with self.assertRaises(ParameterDomainError):
            PidConfig(ti=0.0)
        with self.assertRaises(ParameterDomainError):
            PidConfig(ratio=0.0)


if __name__ == '__main__':
    unittest.main()
