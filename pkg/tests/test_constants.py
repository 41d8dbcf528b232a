import json
import unittest

import numpy as np

from PeriodicDiracFock.constants import (
    admissible_set, c0_bound, c_ge_m_bound, c_le_m_ell, c_star_lower, c_star_sampled,
    c_star_upper, cg_constant, check_assumption, constants_report, cube_inverse_square_integral,
    cube_power_integral, ee_constants, free_band_edges, free_level_count, hardy_coefficients,
    hardy_cube_validate, kappa, lattice_sum_inv4, partial_sum_inv4, rank_margin, sweep_assumption,
    zone_inverse_square_average)
from PeriodicDiracFock.errors import ModelFailureError, ValidationError
from PeriodicDiracFock.lattice import CrystalParams



class TestLatticeSums(unittest.TestCase):

    def test_first_shell(self):
        self.assertAlmostEqual(partial_sum_inv4(1), 6 + 12 / 4 + 8 / 9)
        self.assertEqual(partial_sum_inv4(0), 0.0)

    def test_full_sum(self):
        self.assertAlmostEqual(lattice_sum_inv4(), 16.5323, delta=2e-4)

    def test_tail(self):
        self.assertAlmostEqual(lattice_sum_inv4(m=2), lattice_sum_inv4() - partial_sum_inv4(1), places=10)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            partial_sum_inv4(-1)
        with self.assertRaises(ValidationError):
            lattice_sum_inv4(tol=0)



class TestCubeIntegrals(unittest.TestCase):

    def test_inverse_square(self):
        self.assertAlmostEqual(cube_inverse_square_integral(), 15.3482, delta=1e-3)

    def test_methods_agree(self):
        for s in (1.0, 2.0, 8 / 3):
            with self.subTest(s=s):
                self.assertAlmostEqual(
                    cube_power_integral(s, 'product') / cube_power_integral(s, 'spherical'), 1.0, places=5)

    def test_volume(self):
        self.assertAlmostEqual(cube_power_integral(0.0), 8.0)

    def test_zone_average(self):
        self.assertAlmostEqual(zone_inverse_square_average(), 1.4088, delta=1e-3)
        self.assertAlmostEqual(zone_inverse_square_average(nodes=16), zone_inverse_square_average(), places=10)
        # below the average over [-1, 1]^3 around a fixed centre, I / 8
        self.assertLess(zone_inverse_square_average(), cube_inverse_square_integral() / 8)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            cube_power_integral(3.0)
        with self.assertRaises(ValidationError):
            cube_power_integral(1.0, method='trapezoid')



class TestCoulombConstants(unittest.TestCase):

    def test_c0(self):
        c0, radius = c0_bound()
        self.assertAlmostEqual(c0, 5.02, delta=0.02)
        self.assertGreater(radius, 0.45)

    def test_cg(self):
        c0, _ = c0_bound()
        self.assertAlmostEqual(cg_constant(1000), 2.01305, delta=1e-3)
        self.assertAlmostEqual(cg_constant(1), 6 * (1 + c0))
        self.assertAlmostEqual(cg_constant(1e9), 2.0, delta=1e-3)
        with self.assertRaises(ValidationError):
            cg_constant(0)



class TestExchangeConstants(unittest.TestCase):

    def test_split_bounds(self):
        self.assertAlmostEqual(c_ge_m_bound(2), 17.185, delta=0.05)
        self.assertAlmostEqual(c_le_m_ell(2, 1000), 0.00733, delta=1e-5)
        with self.assertRaises(ValidationError):
            c_ge_m_bound(1)

    def test_ee(self):
        ee = ee_constants(1000)
        self.assertAlmostEqual(ee.C_EE, 2.0376, delta=2e-3)
        self.assertEqual(ee.C_EE, ee.C_W)
        self.assertAlmostEqual(ee.C_EE_dblprime, 0.0346, delta=2e-3)
        self.assertLessEqual(ee.C_ell, ee.C_ell_m2)
        self.assertGreater(ee.C_EE, cg_constant(1000))

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            ee_constants(1000, splits=(1, 2))



class TestFreeBands(unittest.TestCase):

    def test_c_star_upper(self):
        self.assertAlmostEqual(c_star_upper(17, 1000), 1.006375, delta=2e-5)
        self.assertAlmostEqual(c_star_upper(1, 2 * np.pi), np.sqrt(5))
        with self.assertRaises(ValidationError):
            c_star_upper(0, 10)

    def test_band_edges_at_gamma(self):
        edges = free_band_edges(np.zeros(3), 2 * np.pi, 8)
        np.testing.assert_allclose(edges, [1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2), np.sqrt(2),
                                           np.sqrt(2), np.sqrt(2)])

    def test_sampled_bounds_bracket(self):
        for k in (1, 2, 5):
            with self.subTest(k=k):
                self.assertLessEqual(c_star_lower(k, 10), c_star_sampled(k, 10))
                self.assertLessEqual(c_star_sampled(k, 10), c_star_upper(k, 10) + 1e-12)

    def test_level_count(self):
        self.assertEqual(free_level_count(np.zeros(3), 2 * np.pi, 0.5), 0)
        self.assertEqual(free_level_count(np.zeros(3), 2 * np.pi, 1.0), 2)
        self.assertEqual(free_level_count(np.zeros(3), 2 * np.pi, 1.5), 14)



class TestAssumption(unittest.TestCase):

    def test_holds_at_q17(self):
        check = check_assumption(CrystalParams(ell=1000, z=17, q=17))
        self.assertTrue(check.feasible)
        self.assertAlmostEqual(check.cond1, 0.63, delta=0.01)
        self.assertAlmostEqual(check.cond2, 0.97, delta=0.02)
        self.assertTrue(check.holds)

    def test_fails_at_q18(self):
        check = check_assumption(CrystalParams(ell=1000, z=18, q=18))
        self.assertTrue(check.cond1_holds)
        self.assertFalse(check.cond2_holds)
        self.assertFalse(check.holds)

    def test_sweep_monotone(self):
        sweep = sweep_assumption(range(1, 21))
        cond1 = [c.cond1 for _, c in sweep]
        cond2 = [c.cond2 for _, c in sweep]
        self.assertTrue(np.all(np.diff(cond1) > 0))
        self.assertTrue(np.all(np.diff(cond2) > 0))
        self.assertEqual(max(q for q, c in sweep if c.holds), 17)

    def test_free_model(self):
        params = CrystalParams(ell=10, z=3, q=2, alpha=0.0)
        self.assertEqual(kappa(params), 0.0)
        check = check_assumption(params)
        self.assertTrue(check.holds)
        self.assertEqual(check.lambda0, 1.0)
        self.assertEqual(admissible_set(params, check).contraction, 0.0)

    def test_infeasible(self):
        params = CrystalParams(ell=1, z=100, q=100, alpha=0.5)
        check = check_assumption(params)
        self.assertFalse(check.feasible)
        self.assertFalse(check.holds)
        with self.assertRaises(ModelFailureError):
            admissible_set(params, check)
        with self.assertRaises(ModelFailureError):
            rank_margin(params)

    def test_penalized(self):
        params = CrystalParams(ell=1000, z=17, q=17)
        check = check_assumption(params, eps_P=1.0)
        self.assertLess(check.cond2_penalized, check.cond2)
        self.assertTrue(check.cond2_penalized_holds)

    def test_admissible_set(self):
        params = CrystalParams(ell=1000, z=17, q=17)
        admissible = admissible_set(params)
        self.assertGreater(admissible.tau, 1)
        self.assertLess(admissible.tau, 1 / (2 * admissible.A))
        self.assertLess(admissible.contraction, 1)
        self.assertGreaterEqual(admissible.weight, 1)

    def test_rank_margin(self):
        self.assertGreaterEqual(rank_margin(CrystalParams(ell=1000, z=17, q=17)), 2)

    def test_rank_margin_covers_zone_boundary(self):
        params = CrystalParams(ell=10, z=2, q=2, alpha=1 / 137)
        k = kappa(params)
        energy = c_star_upper(3, 10) / (1 - k)**2
        margin = rank_margin(params)
        for xi in (np.full(3, np.pi / 10), np.array([np.pi / 10, 0, 0]), np.array([np.pi / 10, np.pi / 10, 0])):
            with self.subTest(xi=xi):
                self.assertGreaterEqual(margin, free_level_count(xi, 10, energy) - 2 + 1)
        self.assertGreaterEqual(margin, rank_margin(params, samples=3))



class TestReport(unittest.TestCase):

    def test_report(self):
        report = constants_report(CrystalParams(ell=1000, z=17, q=17))
        self.assertEqual(report.assumption_holds, (True, True))
        self.assertIsNotNone(report.admissible)
        table = report.table()
        self.assertIn('cond1', table)
        self.assertIn('C_EE', table)
        json.dumps(report.to_dict())



class TestHardy(unittest.TestCase):

    def test_coefficients(self):
        np.testing.assert_allclose(hardy_coefficients(12), (6.0, 7 / 3))
        np.testing.assert_allclose(hardy_coefficients(12, proof=True), (5.0, 7 / 6))

    def test_validate(self):
        report = hardy_cube_validate(10, trial_count=100, modes=1, nodes=24)
        self.assertEqual(report.trials, 100)
        self.assertTrue(report.holds)
        self.assertGreater(report.worst_ratio, 0)
        self.assertLessEqual(report.worst_ratio, report.worst_ratio_proof)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            hardy_cube_validate(10, trial_count=0)



if __name__ == '__main__':
    unittest.main()
