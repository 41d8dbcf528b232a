"""
Periodic Coulomb potential G_ell and the quasi-periodic exchange kernel
W_ell(eta, x) as Fourier data, plus truncated real-space sums used to
validate the analytic bounds.

    G_ell(x)      = (1 / (pi ell)) sum_{p != 0} e^{2 i pi p.x / ell} / |p|^2
    W_ell(eta, x) = (4 pi / ell^3) sum_k e^{i (2 pi k / ell - eta).x} / |2 pi k / ell - eta|^2
"""
import numpy as np

from collections import namedtuple
from dataclasses import dataclass

from .errors import ValidationError


SINGULAR_RTOL = 1e-6

RealspaceValue = namedtuple('RealspaceValue', ['value', 'singular'])



class PeriodicCoulomb:
    """
    Fourier coefficients of the zero-mean periodic Coulomb potential.

    Attributes:
        - ell: cell edge length
    """

    def __init__(self, ell):
        self.ell = float(ell)


    def __repr__(self):
        return f"PeriodicCoulomb(ell={self.ell})"


    def fourier(self, p):
        """
        Returns 1 / (pi ell |p|^2) for integer triples p, and 0 at p = 0.

        Arguments:
            - p: integer triple or (..., 3) array of triples
        """
        p = np.asarray(p, dtype=float)
        norm2 = np.sum(p**2, axis=-1)
        with np.errstate(divide='ignore'):
            values = np.where(norm2 > 0, 1.0 / (np.pi * self.ell * norm2), 0.0)
        return values if values.ndim else float(values)



class ExchangeKernel:
    """
    Fourier coefficients of W_ell and its split at |k|_inf = msplit.

    Attributes:
        - ell: cell edge length
        - msplit: split index m >= 2; W_ge collects |k|_inf >= m, W_lt the rest
    """

    def __init__(self, ell, msplit=2):
        if msplit < 2:
            raise ValidationError(f"msplit must be >= 2, got {msplit}")
        self.ell = float(ell)
        self.msplit = int(msplit)


    def __repr__(self):
        return f"ExchangeKernel(ell={self.ell}, msplit={self.msplit})"


    def coefficient(self, k, eta):
        """
        Returns (4 pi / ell^3) / |2 pi k / ell - eta|^2, or inf where the
        denominator vanishes.

        Arguments:
            - k: integer triple or (..., 3) array of triples
            - eta: momentum (broadcast against k)
        """
        q = (2 * np.pi / self.ell) * np.asarray(k, dtype=float) - np.asarray(eta, dtype=float)
        norm2 = np.sum(q**2, axis=-1)
        with np.errstate(divide='ignore'):
            values = np.where(norm2 > 0, (4 * np.pi / self.ell**3) / norm2, np.inf)
        return values if values.ndim else float(values)


    def long_range(self, k):
        """
        Returns True where |k|_inf >= msplit, i.e. the term belongs to W_ge.
        """
        return np.max(np.abs(np.asarray(k)), axis=-1) >= self.msplit



@dataclass(frozen=True, eq=False)
class ExchangeTable:
    """
    Exchange kernel coefficients over (xi, xi', p) for a k-grid and basis.

    values[i, j, t] = (4 pi / ell^3) / |2 pi p_t / ell - (xi_i - xi'_j)|^2, with
    the singular entries (xi = xi', p = 0) set to 0 and flagged in `singular`.
    Regularization of the flagged entries is left to the mean-field assembly.

    Attributes:
        - transfers: (n_p, 3) momentum transfers (basis.transfers)
        - values: (n_k, n_k, n_p) coefficients
        - singular: (n_k, n_k, n_p) boolean flags
        - long_range: (n_p,) True where |p|_inf >= msplit
        - probe_constant: value given to the singular entries by the
            'probe-correction' scheme (see probe_constant)
    """

    transfers: np.ndarray
    values: np.ndarray
    singular: np.ndarray
    long_range: np.ndarray
    probe_constant: float



def coulomb_matrix(basis, ell):
    """
    Matrix of the multiplication operator by G_ell: entry (k, k') is
    G^(k - k') tensored with I_4, so the diagonal vanishes.
    """
    coulomb = PeriodicCoulomb(ell)
    table = coulomb.fourier(basis.transfers)
    return np.kron(table[basis.difference_index], np.eye(4))


def exchange_row(xi, kgrid, basis, kernel):
    """
    Kernel coefficients between an arbitrary quasi-momentum xi and every grid
    point xi'.

    Entries whose momentum 2 pi p / ell - (xi - xi') falls inside the grid cell
    around 0 (|.|_inf < h/2) are flagged and set to 0. For xi on the grid that
    is exactly the singular entry xi = xi', p = 0.

    Returns (values, flagged), both of shape (n_k, n_p).
    """
    xi = np.asarray(xi, dtype=float)
    q = ((2 * np.pi / kernel.ell) * basis.transfers[None, :, :]
         - (xi[None, None, :] - kgrid.points[:, None, :]))
    flagged = np.max(np.abs(q), axis=-1) < 0.5 * kgrid.spacing
    norm2 = np.sum(q**2, axis=-1)
    with np.errstate(divide='ignore'):
        values = np.where(flagged, 0.0, (4 * np.pi / kernel.ell**3) / norm2)
    return values, flagged


def zone_kernel_average(ell, zone_average):
    """
    Returns the mean of the p = 0 kernel (4 pi / ell^3) / |xi - xi'|^2 over
    xi, xi' in the zone [-pi/ell, pi/ell)^3, which is 4 D / (pi ell).

    Arguments:
        - ell: cell edge length
        - zone_average: D, the mean of 1/|x - y|^2 over [-1, 1]^3
    """
    return 4 * zone_average / (np.pi * ell)


def probe_constant(kgrid, zone_average):
    """
    Probe-charge value of the singular exchange entries.

    A single constant s is given to every singular (xi = xi', p = 0) entry so
    that the grid double sum of the p = 0 kernel,
        s * sum_i w_i^2 + sum_{i != j} w_i w_j (4 pi / ell^3) / |xi_i - xi_j|^2,
    equals its zone average. States whose orbital overlaps vary slowly over
    the zone then get the continuum exchange on every grid size.

    Arguments:
        - kgrid: KGrid
        - zone_average: D, the mean of 1/|x - y|^2 over [-1, 1]^3
    """
    ell, w = kgrid.ell, kgrid.weights
    diff = kgrid.points[:, None, :] - kgrid.points[None, :, :]
    norm2 = np.sum(diff**2, axis=-1)
    np.fill_diagonal(norm2, np.inf)
    pairs = float(w @ ((4 * np.pi / ell**3) / norm2) @ w)
    return (zone_kernel_average(ell, zone_average) - pairs) / float(np.sum(w**2))


def exchange_coefficients(kgrid, basis, ell, msplit=2, zone_average=None):
    """
    Build the ExchangeTable for every pair of grid points.

    Arguments:
        - kgrid: KGrid
        - basis: PlaneWaveBasis
        - ell: cell edge length
        - msplit: split index for the long-range flag
        - zone_average: mean of 1/|x - y|^2 over [-1, 1]^3 (computed if omitted)
    """
    if zone_average is None:
        from .constants import zone_inverse_square_average
        zone_average = zone_inverse_square_average()

    kernel = ExchangeKernel(ell, msplit)
    rows = [exchange_row(xi, kgrid, basis, kernel) for xi in kgrid.points]
    return ExchangeTable(
        transfers=basis.transfers,
        values=np.array([r[0] for r in rows]),
        singular=np.array([r[1] for r in rows]),
        long_range=kernel.long_range(basis.transfers),
        probe_constant=probe_constant(kgrid, zone_average),
    )


def _lattice_sum(points, ell, grid):
    """
    Evaluates sum_k grid[k] e^{2 i pi k.x / ell} for |k|_inf <= P at each point,
    using separable phase factors.
    """
    size = grid.shape[0]
    k = np.arange(size) - (size - 1) // 2
    out = np.empty(len(points), dtype=complex)
    for n, x in enumerate(points):
        phase = np.exp(2j * np.pi * np.outer(x, k) / ell)
        partial = np.tensordot(phase[0], grid, axes=(0, 0))
        out[n] = phase[1] @ partial @ phase[2]
    return out


def _near_lattice(points, ell):
    offset = points - ell * np.round(points / ell)
    return np.linalg.norm(offset, axis=-1) < SINGULAR_RTOL * ell


def coulomb_realspace(x, ell, pmax):
    """
    Truncated Fourier sum of G_ell at one or more points.

    Returns RealspaceValue(value, singular); `singular` flags points within
    1e-6 ell of a lattice point, where the truncated sum is meaningless.

    Arguments:
        - x: point (3,) or points (n, 3)
        - ell: cell edge length
        - pmax: truncation |p|_inf <= pmax
    """
    if pmax < 1:
        raise ValidationError(f"pmax must be >= 1, got {pmax}")
    points = np.atleast_2d(np.asarray(x, dtype=float))

    r = np.arange(-pmax, pmax + 1)
    p = np.stack(np.meshgrid(r, r, r, indexing='ij'), axis=-1)
    grid = PeriodicCoulomb(ell).fourier(p)

    values = _lattice_sum(points, ell, grid).real
    singular = _near_lattice(points, ell)
    if np.ndim(x) == 1:
        return RealspaceValue(float(values[0]), bool(singular[0]))
    return RealspaceValue(values, singular)


def exchange_realspace(eta, x, ell, pmax, msplit=2, part='full'):
    """
    Truncated Fourier sum of W_ell(eta, x) or of one of its parts.

    Arguments:
        - eta: momentum (3,)
        - x: point (3,) or points (n, 3)
        - ell: cell edge length
        - pmax: truncation |k|_inf <= pmax
        - msplit: split index m
        - part: 'full', 'ge' (|k|_inf >= m) or 'lt' (|k|_inf < m)
    """
    if part not in {'full', 'ge', 'lt'}:
        raise ValidationError(f"Unknown kernel part '{part}'")

    kernel = ExchangeKernel(ell, msplit)
    eta = np.asarray(eta, dtype=float)
    points = np.atleast_2d(np.asarray(x, dtype=float))

    r = np.arange(-pmax, pmax + 1)
    k = np.stack(np.meshgrid(r, r, r, indexing='ij'), axis=-1)
    grid = kernel.coefficient(k, eta)
    if part == 'ge':
        grid = np.where(kernel.long_range(k), grid, 0.0)
    elif part == 'lt':
        grid = np.where(kernel.long_range(k), 0.0, grid)

    values = np.exp(-1j * points @ eta) * _lattice_sum(points, ell, grid)
    return values[0] if np.ndim(x) == 1 else values
