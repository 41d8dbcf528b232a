"""
Discrete periodic one-particle density matrices.

A BlochDensityMatrix stores gamma = (average over xi) gamma_xi on a k-grid as
per-fiber orbitals U_i (orthonormal columns) and occupations lambda_i, so
gamma_xi_i = U_i diag(lambda_i) U_i*.
"""
import numpy as np
import scipy.linalg

from dataclasses import asdict, dataclass

from .dirac import free_symbol
from .errors import ValidationError


ORTHONORMAL_TOL = 1e-10
OCCUPATION_TOL = 1e-12
RANK_TOL = 1e-14



@dataclass(frozen=True)
class EnergyBreakdown:
    """
    Terms of the Dirac-Fock energy per unit cell.

    Attributes:
        - kinetic, nuclear, hartree, exchange: energy terms
        - total: kinetic + nuclear + hartree + exchange
        - penalized: total - eps_P * trace
        - eps_P: penalty parameter
        - trace: trace per unit cell of the state
    """

    kinetic: float
    nuclear: float
    hartree: float
    exchange: float
    total: float
    penalized: float
    eps_P: float
    trace: float


    @classmethod
    def from_terms(cls, kinetic, nuclear, hartree, exchange, eps_P, trace):
        total = kinetic + nuclear + hartree + exchange
        return cls(
            kinetic=float(kinetic), nuclear=float(nuclear),
            hartree=float(hartree), exchange=float(exchange),
            total=float(total), penalized=float(total - eps_P * trace),
            eps_P=float(eps_P), trace=float(trace),
        )


    def to_dict(self):
        return asdict(self)



@dataclass(frozen=True)
class DensityNorms:
    """
    Diagnostic norms of a density matrix (or of a difference of two).

    Attributes:
        - S11: average over xi of the fiber trace norms
        - S1inf: largest fiber trace norm
        - X: average trace norm of |D_xi|^{1/2} gamma_xi |D_xi|^{1/2}
        - Y: largest operator norm over the fibers
    """

    S11: float
    S1inf: float
    X: float
    Y: float



class BlochDensityMatrix:
    """
    Low-rank storage of a density matrix on a k-grid.

    With `check=True` the orbitals must be orthonormal and the occupations lie
    in [0, 1] (values within 1e-12 of the interval are clipped). With
    `check=False` the occupations are arbitrary real weights, which is how
    directions h and differences of density matrices are represented.

    Attributes:
        - basis: PlaneWaveBasis
        - kgrid: KGrid
        - orbitals: tuple of (dim, r_i) arrays
        - occupations: tuple of (r_i,) arrays
    """

    def __init__(self, basis, kgrid, orbitals, occupations, check=True):
        if len(orbitals) != len(kgrid) or len(occupations) != len(kgrid):
            raise ValidationError(
                f"Expected {len(kgrid)} fibers, got {len(orbitals)} orbital sets "
                f"and {len(occupations)} occupation sets")

        self.basis = basis
        self.kgrid = kgrid
        self.checked = check

        orbs, occs = [], []
        for i, (u, lam) in enumerate(zip(orbitals, occupations)):
            u = np.asarray(u, dtype=complex).reshape(basis.dim, -1)
            lam = np.asarray(lam, dtype=float).reshape(-1)
            if u.shape[1] != len(lam):
                raise ValidationError(
                    f"Fiber {i}: {u.shape[1]} orbitals but {len(lam)} occupations")

            if u.shape[1]:
                defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1])))
                if defect > ORTHONORMAL_TOL:
                    raise ValidationError(
                        f"Fiber {i}: orbitals are not orthonormal (defect {defect:.2e})")

            if check:
                if np.any(lam < -OCCUPATION_TOL) or np.any(lam > 1 + OCCUPATION_TOL):
                    raise ValidationError(
                        f"Fiber {i}: occupations must lie in [0, 1], got range "
                        f"[{lam.min():.3e}, {lam.max():.3e}]")
                lam = np.clip(lam, 0.0, 1.0)

            orbs.append(u)
            occs.append(lam)

        self.orbitals = tuple(orbs)
        self.occupations = tuple(occs)


    def __repr__(self):
        return (f"<BlochDensityMatrix: n_k={len(self.kgrid)}, dim={self.basis.dim}, "
                f"ranks={list(self.ranks)}>")


    @classmethod
    def zeros(cls, basis, kgrid):
        """
        Returns the zero density matrix.
        """
        empty = [np.zeros((basis.dim, 0), dtype=complex)] * len(kgrid)
        return cls(basis, kgrid, empty, [np.zeros(0)] * len(kgrid))


    @classmethod
    def from_dense(cls, basis, kgrid, matrices, check=True, rank_tol=RANK_TOL):
        """
        Build from dense Hermitian fiber matrices, dropping eigenvalues
        with magnitude below rank_tol.
        """
        orbitals, occupations = [], []
        for m in matrices:
            values, vectors = scipy.linalg.eigh(0.5 * (m + m.conj().T))
            keep = np.abs(values) > rank_tol
            orbitals.append(vectors[:, keep])
            occupations.append(values[keep])
        return cls(basis, kgrid, orbitals, occupations, check=check)


    @property
    def ranks(self):
        return tuple(len(lam) for lam in self.occupations)


    def fiber(self, i):
        """
        Returns (orbitals, occupations) of fiber i.
        """
        return self.orbitals[i], self.occupations[i]


    def dense(self, i):
        """
        Returns the dense matrix U diag(lambda) U* of fiber i.
        """
        u, lam = self.fiber(i)
        return (u * lam[None, :]) @ u.conj().T


    def spinor_coefficients(self, i):
        """
        Returns fiber i's orbitals reshaped to (n_pw, 4, r).
        """
        u = self.orbitals[i]
        return u.reshape(self.basis.n_pw, 4, u.shape[1])



def combine(terms, check=True, rank_tol=RANK_TOL):
    """
    Low-rank linear combination sum_j c_j gamma_j, fiber by fiber.

    The stacked orbitals are orthonormalized by QR, the small weighted Gram
    matrix is diagonalized, and eigenvalues below rank_tol in magnitude are dropped.

    Arguments:
        - terms: list of (coefficient, BlochDensityMatrix) pairs on the same grid
        - check: validate the result as a density matrix (0 <= lambda <= 1)
        - rank_tol: truncation threshold for the result's occupations
    """
    if not terms:
        raise ValidationError("Cannot combine an empty list of density matrices")
    basis, kgrid = terms[0][1].basis, terms[0][1].kgrid

    orbitals, occupations = [], []
    for i in range(len(kgrid)):
        stacked = [g.orbitals[i] for _, g in terms]
        weights = np.concatenate([c * g.occupations[i] for c, g in terms])
        u = np.concatenate(stacked, axis=1)
        if u.shape[1] == 0:
            orbitals.append(np.zeros((basis.dim, 0), dtype=complex))
            occupations.append(np.zeros(0))
            continue

        q, r = scipy.linalg.qr(u, mode='economic')
        gram = (r * weights[None, :]) @ r.conj().T
        values, vectors = scipy.linalg.eigh(0.5 * (gram + gram.conj().T))
        keep = np.abs(values) > rank_tol
        orbitals.append(q @ vectors[:, keep])
        occupations.append(values[keep])

    return BlochDensityMatrix(basis, kgrid, orbitals, occupations, check=check)


def mix(gamma, other, beta):
    """
    Convex combination (1 - beta) gamma + beta other; stays a density matrix.
    """
    if not 0 <= beta <= 1:
        raise ValidationError(f"Mixing parameter must lie in [0, 1], got {beta}")
    return combine([(1 - beta, gamma), (beta, other)])


def trace_per_cell(gamma):
    """
    Returns the trace per unit cell sum_i w_i sum_n lambda_{i,n}.
    """
    return float(sum(w * np.sum(lam) for w, lam in zip(gamma.kgrid.weights, gamma.occupations)))


def validate_charge(gamma, q, tol=1e-10):
    """
    Raise ValidationError unless trace_per_cell(gamma) <= q (membership of the
    charge-constrained set).
    """
    charge = trace_per_cell(gamma)
    if charge > q + tol:
        raise ValidationError(f"Density matrix carries charge {charge!r} > q = {q}")
    return charge


def idempotency_defect(gamma):
    """
    Returns max_i ||gamma_i^2 - gamma_i||_F (0 for projections).
    """
    return max((float(np.linalg.norm(lam**2 - lam)) for lam in gamma.occupations), default=0.0)



class DensityFourier:
    """
    Fourier coefficients rho^(p) of the electronic density, with
    rho(x) = sum_p rho^(p) e^{2 i pi p.x / ell}.

    Attributes:
        - transfers: (n_p, 3) integer triples, |p|_inf <= 2K
        - values: (n_p,) complex coefficients
        - ell: cell edge length
    """

    def __init__(self, transfers, values, ell):
        self.transfers = transfers
        self.values = values
        self.ell = ell
        self._kmax2 = int(np.max(np.abs(transfers))) if len(transfers) else 0


    def coefficient(self, p):
        """
        Returns rho^(p), 0 outside the stored range.
        """
        p = np.asarray(p, dtype=int)
        if np.any(np.abs(p) > self._kmax2):
            return 0j
        s = 2 * self._kmax2 + 1
        local = p + self._kmax2
        return complex(self.values[(local[0] * s + local[1]) * s + local[2]])


    def realspace(self, x):
        """
        Returns rho(x) at one point (3,) or many points (n, 3).
        """
        points = np.atleast_2d(np.asarray(x, dtype=float))
        phases = np.exp(2j * np.pi * points @ self.transfers.T / self.ell)
        values = (phases @ self.values).real
        return float(values[0]) if np.ndim(x) == 1 else values



def density_fourier(gamma):
    """
    Fourier coefficients of rho_gamma:
    rho^(p) = sum_i w_i sum_n lambda_n (1/ell^3) sum_k u_n(k)* . u_n(k + p).

    Each fiber's orbitals are placed on a (4K+1)^3 grid, so the circular
    autocorrelation from the FFT equals the linear one for |p|_inf <= 2K.
    """
    basis, kgrid = gamma.basis, gamma.kgrid
    shape = basis.fft_shape
    spectrum = np.zeros(shape)

    for i, w in enumerate(kgrid.weights):
        lam = gamma.occupations[i]
        if len(lam) == 0:
            continue
        grid = np.zeros(shape + (4, len(lam)), dtype=complex)
        grid[basis.fft_positions] = gamma.spinor_coefficients(i)
        f = np.fft.fftn(grid, axes=(0, 1, 2))
        spectrum += w * np.einsum('abcsn,n->abc', np.abs(f)**2, lam)

    corr = np.fft.ifftn(spectrum)
    p = basis.transfers
    n = shape[0]
    values = corr[p[:, 0] % n, p[:, 1] % n, p[:, 2] % n] / kgrid.ell**3

    # rho^(-p) = conj rho^(p)
    mirrored = values[basis.transfer_index(-p)]
    values = 0.5 * (values + mirrored.conj())
    return DensityFourier(p, values, kgrid.ell)


def density_realspace(gamma, x):
    """
    Returns rho_gamma at one or more points, reconstructed from its Fourier series.
    """
    return density_fourier(gamma).realspace(x)


def _orbital_values(gamma, i, x):
    """
    Returns the (4, r) spinor values u_n(x) of fiber i's orbitals.
    """
    basis, ell = gamma.basis, gamma.kgrid.ell
    momenta = basis.momenta(gamma.kgrid.points[i], ell)
    phases = np.exp(1j * momenta @ np.asarray(x, dtype=float)) / ell**1.5
    return np.einsum('g,gsn->sn', phases, gamma.spinor_coefficients(i))


def kernel_at(gamma, x, y):
    """
    Returns the 4x4 kernel gamma(x, y) = sum_i w_i sum_n lambda_n u_n(x) u_n(y)*.
    """
    kernel = np.zeros((4, 4), dtype=complex)
    for i, w in enumerate(gamma.kgrid.weights):
        lam = gamma.occupations[i]
        if len(lam) == 0:
            continue
        ux = _orbital_values(gamma, i, x)
        uy = _orbital_values(gamma, i, y)
        kernel += w * (ux * lam[None, :]) @ uy.conj().T
    return kernel


def norms(gamma):
    """
    Returns the DensityNorms of gamma. Signed weights (differences,
    directions) are handled exactly through a small Gram eigenproblem.
    """
    basis, kgrid = gamma.basis, gamma.kgrid
    traces, x_terms, y_terms = [], [], []

    for i in range(len(kgrid)):
        u, lam = gamma.fiber(i)
        if len(lam) == 0:
            traces.append(0.0)
            x_terms.append(0.0)
            y_terms.append(0.0)
            continue

        weight = np.repeat(free_symbol(basis, kgrid.points[i], kgrid.ell), 4)
        traces.append(float(np.sum(np.abs(lam))))
        y_terms.append(float(np.max(np.abs(lam))))

        if np.all(lam >= 0):
            expectation = np.sum(weight[:, None] * np.abs(u)**2, axis=0)
            x_terms.append(float(np.sum(lam * expectation)))
        else:
            b = np.sqrt(weight)[:, None] * u
            _, r = scipy.linalg.qr(b, mode='economic')
            gram = (r * lam[None, :]) @ r.conj().T
            x_terms.append(float(np.sum(np.abs(scipy.linalg.eigvalsh(0.5 * (gram + gram.conj().T))))))

    w = kgrid.weights
    return DensityNorms(
        S11=float(np.dot(w, traces)),
        S1inf=float(max(traces)),
        X=float(np.dot(w, x_terms)),
        Y=float(max(y_terms)),
    )


def difference_norms(gamma, other):
    """
    Returns the DensityNorms of gamma - other.
    """
    return norms(combine([(1.0, gamma), (-1.0, other)], check=False))


def half_weighted_trace_norm(gamma):
    """
    Returns the average over xi of ||gamma_xi |D_xi|^{1/2}||_tr.
    """
    basis, kgrid = gamma.basis, gamma.kgrid
    total = 0.0
    for i, w in enumerate(kgrid.weights):
        u, lam = gamma.fiber(i)
        if len(lam) == 0:
            continue
        root = np.sqrt(np.repeat(free_symbol(basis, kgrid.points[i], kgrid.ell), 4))
        small = lam[:, None] * (root[:, None] * u).conj().T
        total += w * float(np.sum(scipy.linalg.svdvals(small)))
    return total
