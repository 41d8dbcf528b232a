import unittest

import numpy as np
import numpy.testing as npt

from PeriodicDiracFock.errors import ResourceError, ValidationError
from PeriodicDiracFock.lattice import CrystalParams, build_basis, build_kgrid



class TestCrystalParams(unittest.TestCase):

    def test_defaults(self):
        params = CrystalParams(ell=1000, z=17, q=17)
        self.assertAlmostEqual(params.alpha, 1 / 137)
        self.assertEqual(params.q_plus, 17)
        self.assertEqual(params.cell_volume, 1e9)

    def test_q_plus_below_one(self):
        self.assertEqual(CrystalParams(ell=10, z=0, q=0.5).q_plus, 1.0)

    def test_invalid(self):
        for kwargs in [
            dict(ell=0, z=1, q=1), dict(ell=10, z=-1, q=1),
            dict(ell=10, z=1, q=0), dict(ell=10, z=1, q=1, alpha=1.0),
        ]:
            with self.subTest(**kwargs), self.assertRaises(ValidationError):
                CrystalParams(**kwargs)



class TestPlaneWaveBasis(unittest.TestCase):

    def test_sizes(self):
        basis = build_basis(1)
        self.assertEqual(basis.n_pw, 27)
        self.assertEqual(basis.dim, 108)
        self.assertEqual(basis.fft_shape, (5, 5, 5))
        self.assertEqual(len(basis.transfers), 125)

    def test_index_of(self):
        basis = build_basis(1)
        self.assertEqual(basis.index_of([0, 0, 0]), 13)
        self.assertIsNone(basis.index_of([2, 0, 0]))
        for n, k in enumerate(basis.indices):
            self.assertEqual(basis.index_of(k), n)

    def test_difference_index(self):
        basis = build_basis(1)
        diff = basis.transfers[basis.difference_index]
        npt.assert_array_equal(diff, basis.indices[:, None, :] - basis.indices[None, :, :])

    def test_shift_index(self):
        basis = build_basis(1)
        t = basis.transfer_index([1, 0, 0])
        row = basis.shift_index[t]
        origin = basis.index_of([0, 0, 0])
        self.assertEqual(row[origin], basis.index_of([1, 0, 0]))
        self.assertEqual(row[basis.index_of([1, 0, 0])], basis.n_pw)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            build_basis(-1)
        with self.assertRaises(ValidationError):
            build_basis(1.5)

    def test_memory_budget(self):
        with self.assertRaises(ResourceError):
            build_basis(2, memory_budget=1000)



class TestKGrid(unittest.TestCase):

    def test_shifted_even_grid_avoids_gamma(self):
        grid = build_kgrid(10, 2, shifted=True)
        self.assertEqual(len(grid), 8)
        npt.assert_allclose(np.abs(grid.points), np.pi / 20)
        self.assertIsNone(grid.index_of([0, 0, 0]))

    def test_unshifted_even_grid_contains_gamma(self):
        grid = build_kgrid(10, 2)
        self.assertIsNotNone(grid.index_of([0, 0, 0]))
        self.assertIsNotNone(grid.index_of([-np.pi / 10] * 3))

    def test_single_point_grids(self):
        npt.assert_allclose(build_kgrid(10, 1, shifted=True).points, [[0, 0, 0]])
        npt.assert_allclose(build_kgrid(10, 1).points, [[-np.pi / 10] * 3])

    def test_weights(self):
        grid = build_kgrid(7, 3, shifted=True)
        self.assertAlmostEqual(float(np.sum(grid.weights)), 1.0)
        self.assertTrue(np.all(grid.weights == grid.weights[0]))
        self.assertAlmostEqual(grid.spacing, 2 * np.pi / 21)

    def test_points_in_reciprocal_cell(self):
        for shifted in (False, True):
            grid = build_kgrid(5, 4, shifted)
            self.assertTrue(np.all(grid.points >= -np.pi / 5 - 1e-15))
            self.assertTrue(np.all(grid.points < np.pi / 5))

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            build_kgrid(10, 0)



if __name__ == '__main__':
    unittest.main()
