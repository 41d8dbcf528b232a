import json
import os
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from PeriodicDiracFock.checkpoint import (
    FORMAT_VERSION, check_compatible, load_checkpoint, save_checkpoint)
from PeriodicDiracFock.density import BlochDensityMatrix
from PeriodicDiracFock.errors import DataMismatchError
from PeriodicDiracFock.lattice import CrystalParams, build_basis, build_kgrid



def random_state(basis, kgrid, rank=2, seed=0):
    rng = np.random.default_rng(seed)
    orbitals, occupations = [], []
    for _ in range(len(kgrid)):
        m = rng.standard_normal((basis.dim, rank)) + 1j * rng.standard_normal((basis.dim, rank))
        q, _ = np.linalg.qr(m)
        orbitals.append(q)
        occupations.append(rng.uniform(0, 1, rank))
    return BlochDensityMatrix(basis, kgrid, orbitals, occupations)



class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'state.npz')
        self.basis = build_basis(1)
        self.kgrid = build_kgrid(10.0, 2, shifted=True)
        self.gamma = random_state(self.basis, self.kgrid)

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_load(self):
        save_checkpoint(self.path, self.gamma, {'run': 'abc', 'z': 2.0, 'q': 2.0, 'alpha': 0.01})
        gamma, metadata = load_checkpoint(self.path)

        self.assertEqual(metadata['format_version'], FORMAT_VERSION)
        self.assertEqual(metadata['run'], 'abc')
        self.assertEqual(metadata['n_k'], 8)
        self.assertEqual(metadata['dim'], 108)
        self.assertEqual(gamma.ranks, self.gamma.ranks)
        for i in range(len(self.kgrid)):
            npt.assert_array_equal(gamma.orbitals[i], self.gamma.orbitals[i])
            npt.assert_array_equal(gamma.occupations[i], self.gamma.occupations[i])
        npt.assert_array_equal(gamma.kgrid.points, self.kgrid.points)

    def test_empty_fibers(self):
        save_checkpoint(self.path, BlochDensityMatrix.zeros(self.basis, self.kgrid))
        gamma, _ = load_checkpoint(self.path)
        self.assertEqual(gamma.ranks, (0,) * 8)

    def _rewrite_metadata(self, **changes):
        with np.load(self.path) as data:
            arrays = {key: data[key] for key in data.files}
        metadata = json.loads(str(arrays['metadata']))
        metadata.update(changes)
        arrays['metadata'] = np.array(json.dumps(metadata))
        with open(self.path, 'wb') as f:
            np.savez(f, **arrays)

    def test_unknown_version(self):
        save_checkpoint(self.path, self.gamma)
        self._rewrite_metadata(format_version=FORMAT_VERSION + 1)
        with self.assertRaises(DataMismatchError):
            load_checkpoint(self.path)

    def test_grid_mismatch(self):
        save_checkpoint(self.path, self.gamma)
        self._rewrite_metadata(kgrid_shifted=False)
        with self.assertRaises(DataMismatchError):
            load_checkpoint(self.path)

    def test_compatible(self):
        save_checkpoint(self.path, self.gamma, {'z': 2.0, 'q': 2.0, 'alpha': 0.01})
        _, metadata = load_checkpoint(self.path)
        params = CrystalParams(ell=10.0, z=2.0, q=2.0, alpha=0.01)
        check_compatible(metadata, self.basis, self.kgrid, params)

        with self.assertRaises(DataMismatchError):
            check_compatible(metadata, basis=build_basis(2))
        with self.assertRaises(DataMismatchError):
            check_compatible(metadata, kgrid=build_kgrid(10.0, 3, shifted=True))
        with self.assertRaises(DataMismatchError) as cm:
            check_compatible(metadata, params=CrystalParams(ell=10.0, z=3.0, q=2.0, alpha=0.01))
        self.assertIn('z', str(cm.exception))



if __name__ == '__main__':
    unittest.main()
