"""
Cell geometry, plane-wave index sets and Brillouin-zone sampling.

Units are hbar = m = c = 1. The cell is the cube Q = [-ell/2, ell/2)^3 and
the reciprocal cell is Q* = [-pi/ell, pi/ell)^3.
"""
import itertools
import numpy as np

from dataclasses import dataclass
from functools import cached_property

from .errors import ResourceError, ValidationError


DEFAULT_ALPHA = 1.0 / 137.0

# Bytes allowed for one dense complex fiber matrix
DEFAULT_MEMORY_BUDGET = 2 * 2**30



@dataclass(frozen=True)
class CrystalParams:
    """
    Physical inputs of the periodic Dirac-Fock model.

    Attributes:
        - ell: cell edge length
        - z: nuclear charge per cell
        - q: number of electrons per cell
        - alpha: fine structure constant
    """

    ell: float
    z: float
    q: float
    alpha: float = DEFAULT_ALPHA


    def __post_init__(self):
        if not self.ell > 0:
            raise ValidationError(f"Cell length must be positive, got ell={self.ell}")
        if not self.z >= 0:
            raise ValidationError(f"Nuclear charge must be non-negative, got z={self.z}")
        if not self.q > 0:
            raise ValidationError(f"Electron number must be positive, got q={self.q}")
        if not 0 <= self.alpha < 1:
            raise ValidationError(f"Coupling must satisfy 0 <= alpha < 1, got alpha={self.alpha}")


    @property
    def q_plus(self):
        """
        Returns max(q, 1).
        """
        return max(self.q, 1.0)


    @property
    def cell_volume(self):
        return self.ell**3


    @property
    def reciprocal_cell_volume(self):
        return (2 * np.pi / self.ell)**3



@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """
    Truncated reciprocal lattice {k in Z^3 : |k|_inf <= kmax} tensored with C^4.

    Spinor index layout is plane-wave major: basis function (g, s) sits at
    position 4*g + s, so the free Dirac operator is block diagonal with 4x4
    blocks and multiplication operators are kron(M, I_4).

    Attributes:
        - kmax: truncation K
        - indices: (n_pw, 3) integer array, lexicographically sorted
    """

    kmax: int
    indices: np.ndarray


    @property
    def n_pw(self):
        return len(self.indices)


    @property
    def dim(self):
        return 4 * self.n_pw


    @property
    def side(self):
        """
        Number of plane waves per axis, 2K+1.
        """
        return 2 * self.kmax + 1


    @property
    def fft_shape(self):
        """
        Grid on which orbital autocorrelations are free of wrap-around.
        """
        return (4 * self.kmax + 1,) * 3


    def index_of(self, k):
        """
        Returns the position of the integer triple k, or None if it lies outside.
        """
        k = np.asarray(k, dtype=int)
        if np.any(np.abs(k) > self.kmax):
            return None
        s = self.side
        return int(((k[0] + self.kmax) * s + (k[1] + self.kmax)) * s + (k[2] + self.kmax))


    def momenta(self, xi, ell):
        """
        Returns the (n_pw, 3) array of momenta xi + 2*pi*k/ell.
        """
        return np.asarray(xi, dtype=float)[None, :] + (2 * np.pi / ell) * self.indices


    @cached_property
    def transfers(self):
        """
        All momentum transfers p with |p|_inf <= 2K, lexicographically sorted.
        These are every difference k - k' of two basis indices.
        """
        r = range(-2 * self.kmax, 2 * self.kmax + 1)
        return np.array(list(itertools.product(r, r, r)), dtype=int)


    def transfer_index(self, p):
        """
        Returns the row of `transfers` holding p (no bounds check).
        """
        p = np.asarray(p, dtype=int) + 2 * self.kmax
        s = 4 * self.kmax + 1
        return (p[..., 0] * s + p[..., 1]) * s + p[..., 2]


    @cached_property
    def shift_index(self):
        """
        (n_transfers, n_pw) table: position of k + p in the basis, or n_pw when
        k + p falls outside the truncation (a zero row is appended by callers).
        """
        shifted = self.indices[None, :, :] + self.transfers[:, None, :]
        inside = np.all(np.abs(shifted) <= self.kmax, axis=-1)
        s = self.side
        local = shifted + self.kmax
        position = (local[..., 0] * s + local[..., 1]) * s + local[..., 2]
        return np.where(inside, position, self.n_pw)


    @cached_property
    def difference_index(self):
        """
        (n_pw, n_pw) table: row of `transfers` holding k_a - k_b.
        """
        diff = self.indices[:, None, :] - self.indices[None, :, :]
        return self.transfer_index(diff)


    @cached_property
    def fft_positions(self):
        """
        Per-axis positions of the basis indices on the `fft_shape` grid.
        """
        return tuple(np.mod(self.indices[:, j], self.fft_shape[j]) for j in range(3))



@dataclass(frozen=True, eq=False)
class KGrid:
    """
    Uniform sampling of the reciprocal cell with equal quadrature weights.

    Attributes:
        - ell: cell edge length the grid was built for
        - n_per_axis: N_k
        - shifted: whether the grid is offset by half a step
        - points: (N_k^3, 3) quasi-momenta in [-pi/ell, pi/ell)^3
        - weights: (N_k^3,) weights summing to 1
    """

    ell: float
    n_per_axis: int
    shifted: bool
    points: np.ndarray
    weights: np.ndarray


    def __len__(self):
        return len(self.points)


    @property
    def spacing(self):
        """
        Grid step 2*pi/(ell*N_k); also the edge of the cell owned by each point.
        """
        return 2 * np.pi / (self.ell * self.n_per_axis)


    def index_of(self, xi, tol=1e-12):
        """
        Returns the index of the grid point equal to xi (within tol), or None.
        """
        dist = np.max(np.abs(self.points - np.asarray(xi, dtype=float)[None, :]), axis=1)
        i = int(np.argmin(dist))
        return i if dist[i] <= tol * max(1.0, self.spacing) else None



def build_basis(kmax, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Build the plane-wave basis |k|_inf <= kmax.

    Arguments:
        - kmax: truncation K >= 0
        - memory_budget: bytes allowed for a single dense fiber matrix
    """
    if int(kmax) != kmax or kmax < 0:
        raise ValidationError(f"kmax must be a non-negative integer, got {kmax}")
    kmax = int(kmax)

    dim = 4 * (2 * kmax + 1)**3
    required = 16 * dim**2
    if required > memory_budget:
        raise ResourceError(
            f"kmax={kmax} needs {required / 2**20:.0f} MiB per fiber matrix, "
            f"budget is {memory_budget / 2**20:.0f} MiB")

    r = range(-kmax, kmax + 1)
    indices = np.array(list(itertools.product(r, r, r)), dtype=int)
    return PlaneWaveBasis(kmax=kmax, indices=indices)


def build_kgrid(ell, n_per_axis, shifted=False):
    """
    Build the uniform N_k^3 grid on [-pi/ell, pi/ell)^3.

    The unshifted grid starts at -pi/ell on each axis. The shifted grid is offset
    by half a step, which removes xi = 0 when N_k is even.

    Arguments:
        - ell: cell edge length
        - n_per_axis: N_k >= 1
        - shifted: offset by half a grid step
    """
    if int(n_per_axis) != n_per_axis or n_per_axis < 1:
        raise ValidationError(f"n_per_axis must be a positive integer, got {n_per_axis}")
    n = int(n_per_axis)

    step = 2 * np.pi / (ell * n)
    axis = -np.pi / ell + step * np.arange(n)
    if shifted:
        axis = axis + step / 2

    points = np.array(list(itertools.product(axis, axis, axis)), dtype=float)
    weights = np.full(len(points), 1.0 / len(points))
    return KGrid(ell=float(ell), n_per_axis=n, shifted=bool(shifted), points=points, weights=weights)
