#!/usr/bin/env python3
import os
import sys
import unittest

import numpy as np

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..', '..')
sys.path.insert(0, os.path.join(PROJECT_ROOT, 'src'))
from tivalab.errors import ParameterDomainError
from tivalab.population import (
    PD_TABLE,
    PK_KEYS,
    PROPOFOL_PK_TABLE,
    REMIFENTANIL_PK_TABLE,
    UncertaintySpec,
    nominal_patient,
    patient_seed,
    sample_cohort,
    sample_patient,
)


class TestSampling(unittest.TestCase):
    def test_same_seed_same_patient(self):
        spec = UncertaintySpec.published()
        self.assertEqual(sample_patient(spec, 42), sample_patient(spec, 42))
        self.assertNotEqual(sample_patient(spec, 42).pk_p, sample_patient(spec, 43).pk_p)

    def test_zero_spread_gives_table_nominal(self):
        patient = nominal_patient()
        for key in PK_KEYS:
            self.assertAlmostEqual(getattr(patient.pk_p, key), PROPOFOL_PK_TABLE[key][0])
            self.assertAlmostEqual(getattr(patient.pk_r, key), REMIFENTANIL_PK_TABLE[key][0])
        self.assertAlmostEqual(patient.theta.c50p, 4.47)
        self.assertAlmostEqual(patient.theta.c50r, 19.3)
        self.assertAlmostEqual(patient.theta.gamma, 1.43)

    def test_e0_is_fixed(self):
        for p in sample_cohort(20, UncertaintySpec.published(), master_seed=3):
            self.assertEqual(p.pd.e0, PD_TABLE['e0'][0])

    def test_clamped_variant_bounds_draws(self):
        spec = UncertaintySpec.clamped(3.0)
        for p in sample_cohort(200, spec, master_seed=11):
            for key in PK_KEYS:
                nominal, sigma = PROPOFOL_PK_TABLE[key]
                value = getattr(p.pk_p, key)
                self.assertLessEqual(value, nominal * np.exp(3 * sigma) * (1 + 1e-12))
                self.assertGreaterEqual(value, nominal * np.exp(-3 * sigma) * (1 - 1e-12))

    def test_cohort_median_near_nominal(self):
        cohort = sample_cohort(400, UncertaintySpec.published(), master_seed=7)
        median = np.median([p.theta.c50p for p in cohort])
        self.assertAlmostEqual(median / 4.47, 1.0, delta=0.05)

    def test_demographics_in_range(self):
        for p in sample_cohort(50, UncertaintySpec.published(), master_seed=1):
            self.assertTrue(18 <= p.demographics.age <= 70)
            self.assertTrue(150 <= p.demographics.height <= 190)
            self.assertTrue(50 <= p.demographics.weight <= 100)
            self.assertIn(p.demographics.sex, ('male', 'female'))


class TestCohort(unittest.TestCase):
    def test_indices_and_seeds(self):
        cohort = sample_cohort(5, UncertaintySpec.published(), master_seed=99)
        self.assertEqual([p.index for p in cohort], list(range(5)))
        self.assertEqual(cohort[3].seed, patient_seed(99, 3))
        self.assertEqual(len({p.seed for p in cohort}), 5)

    def test_cohort_prefix_is_stable(self):
        small = sample_cohort(3, UncertaintySpec.published(), master_seed=5)
        large = sample_cohort(10, UncertaintySpec.published(), master_seed=5)
        self.assertEqual(small, large[:3])

    def test_empty_cohort_rejected(self):
        with self.assertRaises(ParameterDomainError):
            sample_cohort(0, UncertaintySpec.published(), master_seed=1)

    def test_random_e0_rejected(self):
        pd = dict(PD_TABLE)
        pd['e0'] = (97.4, 0.1)
        with self.assertRaises(ParameterDomainError):
            UncertaintySpec(pd=pd)


if __name__ == '__main__':
    unittest.main()
