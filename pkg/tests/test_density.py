import unittest

import numpy as np
import numpy.testing as npt

from PeriodicDiracFock.density import (
    BlochDensityMatrix, EnergyBreakdown, combine, density_fourier, difference_norms,
    half_weighted_trace_norm, idempotency_defect, kernel_at, mix, norms,
    trace_per_cell, validate_charge)
from PeriodicDiracFock.errors import ValidationError
from PeriodicDiracFock.lattice import build_basis, build_kgrid


ELL = 10.0



def unit(basis, k, s=0):
    """
    Basis vector of plane wave k, spinor component s.
    """
    v = np.zeros(basis.dim, dtype=complex)
    v[4 * basis.index_of(k) + s] = 1
    return v


def gamma_point_state(orbitals, occupations):
    basis = build_basis(1)
    kgrid = build_kgrid(ELL, 1, shifted=True)
    return BlochDensityMatrix(basis, kgrid, [np.stack(orbitals, axis=1)], [np.array(occupations)])



class TestBlochDensityMatrix(unittest.TestCase):

    def setUp(self):
        self.basis = build_basis(1)
        self.gamma = gamma_point_state(
            [unit(self.basis, [0, 0, 0]), unit(self.basis, [0, 0, 0], 1)], [1.0, 0.5])

    def test_zeros(self):
        zero = BlochDensityMatrix.zeros(self.basis, build_kgrid(ELL, 2))
        self.assertEqual(zero.ranks, (0,) * 8)
        self.assertEqual(trace_per_cell(zero), 0.0)
        self.assertEqual(norms(zero).S11, 0.0)

    def test_trace_and_charge(self):
        self.assertAlmostEqual(trace_per_cell(self.gamma), 1.5)
        self.assertAlmostEqual(validate_charge(self.gamma, 2), 1.5)
        with self.assertRaises(ValidationError):
            validate_charge(self.gamma, 1)

    def test_idempotency(self):
        self.assertAlmostEqual(idempotency_defect(self.gamma), 0.25)

    def test_dense(self):
        dense = self.gamma.dense(0)
        self.assertAlmostEqual(np.trace(dense).real, 1.5)
        origin = 4 * self.basis.index_of([0, 0, 0])
        self.assertAlmostEqual(dense[origin + 1, origin + 1].real, 0.5)

    def test_invalid_occupations(self):
        with self.assertRaises(ValidationError):
            gamma_point_state([unit(self.basis, [0, 0, 0])], [1.5])
        with self.assertRaises(ValidationError):
            gamma_point_state([unit(self.basis, [0, 0, 0])], [-0.1])

    def test_signed_occupations_allowed_unchecked(self):
        kgrid = build_kgrid(ELL, 1, shifted=True)
        h = BlochDensityMatrix(
            self.basis, kgrid, [unit(self.basis, [0, 0, 0])[:, None]], [np.array([-0.3])], check=False)
        self.assertAlmostEqual(norms(h).S11, 0.3)

    def test_non_orthonormal(self):
        v = unit(self.basis, [0, 0, 0])
        with self.assertRaises(ValidationError):
            gamma_point_state([v, v], [0.5, 0.5])

    def test_fiber_count(self):
        with self.assertRaises(ValidationError):
            BlochDensityMatrix(self.basis, build_kgrid(ELL, 2), [], [])

    def test_from_dense(self):
        rebuilt = BlochDensityMatrix.from_dense(self.basis, self.gamma.kgrid, [self.gamma.dense(0)])
        self.assertEqual(rebuilt.ranks, (2,))
        npt.assert_allclose(rebuilt.dense(0), self.gamma.dense(0), atol=1e-14)



class TestCombinations(unittest.TestCase):

    def setUp(self):
        basis = build_basis(1)
        self.gamma = gamma_point_state([unit(basis, [0, 0, 0]), unit(basis, [1, 0, 0])], [1.0, 1.0])
        self.other = gamma_point_state([unit(basis, [0, 0, 0], 2)], [1.0])

    def test_difference_of_equal_states(self):
        self.assertEqual(combine([(1.0, self.gamma), (-1.0, self.gamma)], check=False).ranks, (0,))
        self.assertLess(difference_norms(self.gamma, self.gamma).S11, 1e-14)

    def test_difference_norms(self):
        diff = difference_norms(self.gamma, self.other)
        self.assertAlmostEqual(diff.S11, 3.0)
        self.assertAlmostEqual(diff.Y, 1.0)

    def test_mix(self):
        mixed = mix(self.gamma, self.other, 0.25)
        self.assertAlmostEqual(trace_per_cell(mixed), 0.75 * 2 + 0.25)
        npt.assert_allclose(mixed.dense(0), 0.75 * self.gamma.dense(0) + 0.25 * self.other.dense(0),
                            atol=1e-14)
        with self.assertRaises(ValidationError):
            mix(self.gamma, self.other, 1.5)

    def test_combine_empty(self):
        with self.assertRaises(ValidationError):
            combine([])



class TestNorms(unittest.TestCase):

    def test_positive_state(self):
        basis = build_basis(1)
        gamma = gamma_point_state([unit(basis, [0, 0, 0]), unit(basis, [1, 0, 0])], [1.0, 0.5])
        n = norms(gamma)
        self.assertAlmostEqual(n.S11, 1.5)
        self.assertAlmostEqual(n.S1inf, 1.5)
        self.assertAlmostEqual(n.Y, 1.0)
        # |D_0| is 1 on k = 0 and sqrt(1 + (2 pi / ell)^2) on k = (1, 0, 0)
        d1 = np.sqrt(1 + (2 * np.pi / ELL)**2)
        self.assertAlmostEqual(n.X, 1.0 + 0.5 * d1)
        self.assertAlmostEqual(half_weighted_trace_norm(gamma), 1.0 + 0.5 * np.sqrt(d1))



class TestDensity(unittest.TestCase):

    def test_single_plane_wave(self):
        basis = build_basis(1)
        rho = density_fourier(gamma_point_state([unit(basis, [0, 0, 0])], [1.0]))
        self.assertAlmostEqual(rho.coefficient([0, 0, 0]).real, 1 / ELL**3)
        self.assertAlmostEqual(abs(rho.coefficient([1, 0, 0])), 0.0)
        self.assertEqual(rho.coefficient([5, 0, 0]), 0j)
        points = np.array([[0.0, 0.0, 0.0], [1.0, -2.0, 3.3]])
        npt.assert_allclose(rho.realspace(points), 1 / ELL**3)

    def test_two_plane_waves(self):
        basis = build_basis(1)
        u = (unit(basis, [0, 0, 0]) + unit(basis, [1, 0, 0])) / np.sqrt(2)
        gamma = gamma_point_state([u], [1.0])
        rho = density_fourier(gamma)
        self.assertAlmostEqual(rho.coefficient([1, 0, 0]), 0.5 / ELL**3)
        self.assertAlmostEqual(rho.coefficient([-1, 0, 0]), 0.5 / ELL**3)
        self.assertAlmostEqual(abs(rho.coefficient([0, 1, 0])), 0.0)

        x = np.array([2.5, 0.0, 0.0])
        expected = (1 + np.cos(2 * np.pi * x[0] / ELL)) / ELL**3
        self.assertAlmostEqual(rho.realspace(x), expected)
        self.assertAlmostEqual(np.trace(kernel_at(gamma, x, x)).real, expected)

    def test_charge_is_mean_density(self):
        basis = build_basis(1)
        kgrid = build_kgrid(ELL, 2, shifted=True)
        rng = np.random.default_rng(3)
        orbitals, occupations = [], []
        for _ in range(len(kgrid)):
            m = rng.standard_normal((basis.dim, 2)) + 1j * rng.standard_normal((basis.dim, 2))
            q, _ = np.linalg.qr(m)
            orbitals.append(q)
            occupations.append(rng.uniform(0, 1, 2))
        gamma = BlochDensityMatrix(basis, kgrid, orbitals, occupations)
        rho = density_fourier(gamma)
        self.assertAlmostEqual(rho.coefficient([0, 0, 0]).real * ELL**3, trace_per_cell(gamma))
        p = basis.transfers[7]
        self.assertAlmostEqual(rho.coefficient(-p), np.conj(rho.coefficient(p)))



class TestEnergyBreakdown(unittest.TestCase):

    def test_from_terms(self):
        e = EnergyBreakdown.from_terms(2.0, -0.5, 0.25, -0.125, eps_P=3.0, trace=2.0)
        self.assertAlmostEqual(e.total, 1.625)
        self.assertAlmostEqual(e.penalized, 1.625 - 6.0)
        self.assertEqual(set(e.to_dict()), {
            'kinetic', 'nuclear', 'hartree', 'exchange', 'total', 'penalized', 'eps_P', 'trace'})



if __name__ == '__main__':
    unittest.main()
