"""
Versioned density-matrix checkpoints.

A checkpoint is a single `.npz` archive. The entry `metadata` holds a JSON
document (format version, geometry, run information); the entries
`orbitals_<i>` / `occupations_<i>` hold fiber i of the density matrix, and
`kpoints` the grid it was stored on.
"""
import json
import numpy as np

from .density import BlochDensityMatrix
from .errors import DataMismatchError
from .lattice import build_basis, build_kgrid


FORMAT_VERSION = 1



def save_checkpoint(path, gamma, metadata=None):
    """
    Write gamma and metadata to path.

    Arguments:
        - path: output file (written as given, no suffix is appended)
        - gamma: BlochDensityMatrix
        - metadata: JSON-serializable dictionary (run id, params, energies, ...)
    """
    kgrid = gamma.kgrid
    header = {
        **(metadata or {}),
        'format_version': FORMAT_VERSION,
        'ell': float(kgrid.ell),
        'kmax': int(gamma.basis.kmax),
        'kgrid_n': int(kgrid.n_per_axis),
        'kgrid_shifted': bool(kgrid.shifted),
        'n_k': len(kgrid),
        'dim': int(gamma.basis.dim),
    }

    arrays = {'metadata': np.array(json.dumps(header)), 'kpoints': kgrid.points}
    for i, (u, lam) in enumerate(zip(gamma.orbitals, gamma.occupations)):
        arrays[f'orbitals_{i}'] = u
        arrays[f'occupations_{i}'] = lam

    with open(path, 'wb') as f:
        np.savez(f, **arrays)


def load_checkpoint(path):
    """
    Read a checkpoint. Returns (gamma, metadata).

    Raises DataMismatchError for an unknown format version or when the stored
    k-points disagree with the grid the metadata describes.
    """
    with np.load(path, allow_pickle=False) as data:
        try:
            metadata = json.loads(str(data['metadata']))
        except (KeyError, ValueError) as e:
            raise DataMismatchError(f"{path} has no readable metadata: {e}") from e

        version = metadata.get('format_version')
        if version != FORMAT_VERSION:
            raise DataMismatchError(
                f"{path} has checkpoint format {version}, expected {FORMAT_VERSION}")

        basis = build_basis(metadata['kmax'])
        kgrid = build_kgrid(metadata['ell'], metadata['kgrid_n'], metadata['kgrid_shifted'])
        if len(kgrid) != metadata['n_k'] or not np.allclose(data['kpoints'], kgrid.points, atol=1e-12):
            raise DataMismatchError(f"{path}: stored k-points do not match the described grid")

        orbitals = [data[f'orbitals_{i}'] for i in range(len(kgrid))]
        occupations = [data[f'occupations_{i}'] for i in range(len(kgrid))]

    return BlochDensityMatrix(basis, kgrid, orbitals, occupations), metadata


def check_compatible(metadata, basis=None, kgrid=None, params=None):
    """
    Raise DataMismatchError unless the checkpoint metadata matches the given
    basis, k-grid and crystal.
    """
    problems = []
    if basis is not None and basis.kmax != metadata['kmax']:
        problems.append(f"kmax {metadata['kmax']} != {basis.kmax}")
    if kgrid is not None:
        if kgrid.n_per_axis != metadata['kgrid_n'] or bool(kgrid.shifted) != metadata['kgrid_shifted']:
            problems.append(
                f"k-grid {metadata['kgrid_n']} (shifted={metadata['kgrid_shifted']}) != "
                f"{kgrid.n_per_axis} (shifted={kgrid.shifted})")
        if abs(kgrid.ell - metadata['ell']) > 1e-12 * kgrid.ell:
            problems.append(f"grid ell {metadata['ell']} != {kgrid.ell}")
    if params is not None:
        if abs(params.ell - metadata['ell']) > 1e-12 * params.ell:
            problems.append(f"ell {metadata['ell']} != {params.ell}")
        for key in ('z', 'q', 'alpha'):
            if key in metadata and metadata[key] != getattr(params, key):
                problems.append(f"{key} {metadata[key]} != {getattr(params, key)}")

    if problems:
        raise DataMismatchError("Checkpoint does not match: " + '; '.join(problems))
