"""
Dirac matrices, the free Bloch Dirac operator D_xi in the plane-wave spinor
basis, its closed-form spectrum, and dense diagonalization.
"""
import numpy as np
import scipy.linalg

from dataclasses import dataclass

from .errors import NumericError, SpectralAmbiguityError, ValidationError


SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

ALPHA = np.array([
    np.block([[np.zeros((2, 2)), s], [s, np.zeros((2, 2))]]) for s in SIGMA
], dtype=complex)

BETA = np.diag([1, 1, -1, -1]).astype(complex)

HERMITIAN_TOL = 1e-12
DEGENERACY_RTOL = 1e-9


def clifford_defect():
    """
    Returns the largest entry of the anticommutation relations
    alpha_j alpha_k + alpha_k alpha_j - 2 delta_jk, alpha_j beta + beta alpha_j,
    beta^2 - 1. The matrices are integer valued so this is exactly 0.
    """
    eye = np.eye(4)
    defect = np.max(np.abs(BETA @ BETA - eye))
    for j in range(3):
        defect = max(defect, np.max(np.abs(ALPHA[j] @ BETA + BETA @ ALPHA[j])))
        for k in range(3):
            anti = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            defect = max(defect, np.max(np.abs(anti - 2 * (j == k) * eye)))
    return float(defect)


if clifford_defect() != 0:
    raise ValidationError("Dirac matrices violate the anticommutation relations")



@dataclass(frozen=True, eq=False)
class FiberOperator:
    """
    A Hermitian operator on one Bloch fiber, in the PlaneWaveBasis x C^4 basis.

    Attributes:
        - xi: quasi-momentum
        - matrix: (dim, dim) complex Hermitian matrix
    """

    xi: np.ndarray
    matrix: np.ndarray


    def hermiticity_defect(self):
        """
        Returns ||M - M*||_F relative to max(1, ||M||_F).
        """
        m = self.matrix
        return np.linalg.norm(m - m.conj().T) / max(1.0, np.linalg.norm(m))



@dataclass(frozen=True, eq=False)
class FiberEigensystem:
    """
    Eigen-decomposition of a FiberOperator.

    Attributes:
        - xi: quasi-momentum
        - eigenvalues: ascending real array
        - eigenvectors: unitary matrix, one eigenvector per column
        - scale: largest |eigenvalue|, the reference for degeneracy tolerances
    """

    xi: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    scale: float = 1.0


    def tolerance(self, degeneracy_tol=None):
        """
        Returns the absolute degeneracy tolerance, defaulting to 1e-9 * ||matrix||.
        """
        if degeneracy_tol is not None:
            return degeneracy_tol
        return DEGENERACY_RTOL * max(1.0, self.scale)


    def subspace(self, interval, degeneracy_tol=None):
        """
        Returns (eigenvalues, eigenvectors) with eigenvalue in [a, b).

        Raises SpectralAmbiguityError if an eigenvalue sits within the
        degeneracy tolerance of a finite endpoint.
        """
        a, b = interval
        if not a < b:
            raise ValidationError(f"Empty spectral interval [{a}, {b})")

        tol = self.tolerance(degeneracy_tol)
        for endpoint in (a, b):
            if np.isfinite(endpoint):
                near = np.abs(self.eigenvalues - endpoint) <= tol
                if np.any(near):
                    value = float(self.eigenvalues[near][0])
                    raise SpectralAmbiguityError(
                        f"Eigenvalue {value!r} is within {tol:.1e} of projector endpoint {endpoint}",
                        eigenvalue=value)

        mask = (self.eigenvalues >= a) & (self.eigenvalues < b)
        return self.eigenvalues[mask], self.eigenvectors[:, mask]



def dirac_blocks(momenta):
    """
    Returns the (n, 4, 4) stack of symbols sum_j p_j alpha_j + beta.
    """
    return np.einsum('nj,jab->nab', np.asarray(momenta, dtype=float), ALPHA) + BETA


def free_symbol(basis, xi, ell):
    """
    Returns sqrt(1 + |xi + 2 pi k / ell|^2) per plane wave, the symbol of |D_xi|.
    """
    p = basis.momenta(xi, ell)
    return np.sqrt(1 + np.sum(p**2, axis=1))


def assemble_free_dirac(basis, xi, ell):
    """
    Assemble the free Bloch Dirac operator D_xi.

    The matrix is block diagonal in the plane-wave index with block
    sum_j (2 pi k_j / ell + xi_j) alpha_j + beta for plane wave k.

    Arguments:
        - basis: PlaneWaveBasis
        - xi: quasi-momentum in the reciprocal cell
        - ell: cell edge length
    """
    xi = np.asarray(xi, dtype=float)
    blocks = dirac_blocks(basis.momenta(xi, ell))

    n = basis.n_pw
    matrix = np.zeros((n, 4, n, 4), dtype=complex)
    g = np.arange(n)
    matrix[g, :, g, :] = blocks
    return FiberOperator(xi=xi, matrix=matrix.reshape(basis.dim, basis.dim))


def free_spectrum(basis, xi, ell):
    """
    Closed-form spectrum of D_xi: one entry (k, sqrt(1 + |xi + 2 pi k/ell|^2))
    per plane wave. Each value occurs with both signs, each twofold.
    """
    energies = free_symbol(basis, xi, ell)
    return [(tuple(int(c) for c in k), float(e)) for k, e in zip(basis.indices, energies)]


def free_eigenvalues(basis, xi, ell):
    """
    Returns the full ascending free spectrum with multiplicities.
    """
    e = free_symbol(basis, xi, ell)
    return np.sort(np.concatenate([-e, -e, e, e]))


def diagonalize(op, degeneracy_tol=None, hermitian_tol=HERMITIAN_TOL):
    """
    Diagonalize a Hermitian fiber operator.

    Degenerate eigenspaces are given a fixed gauge: the basis vectors picked by
    pivoted QR of the eigenspace are projected onto it and orthonormalized,
    and every eigenvector's largest component is made real and positive.
    Identical inputs therefore give identical eigenvectors.

    Arguments:
        - op: FiberOperator
        - degeneracy_tol: absolute tolerance for grouping eigenvalues,
            defaults to 1e-9 * ||matrix||
        - hermitian_tol: relative Hermiticity tolerance
    """
    matrix = op.matrix
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("Fiber operator has non-finite entries")

    defect = op.hermiticity_defect()
    if defect > hermitian_tol:
        raise ValidationError(f"Fiber operator is not Hermitian (relative defect {defect:.2e})")

    try:
        values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"Eigensolver failed: {e}") from e

    scale = float(np.max(np.abs(values))) if len(values) else 1.0
    eig = FiberEigensystem(xi=op.xi, eigenvalues=values, eigenvectors=vectors, scale=scale)
    _fix_gauge(values, vectors, eig.tolerance(degeneracy_tol))
    return eig


def _fix_gauge(values, vectors, tol):
    """
    In-place deterministic gauge of degenerate groups and of column phases.
    """
    start = 0
    n = len(values)
    while start < n:
        stop = start + 1
        while stop < n and values[stop] - values[stop - 1] <= tol:
            stop += 1

        m = stop - start
        if m > 1:
            block = vectors[:, start:stop]
            _, _, pivots = scipy.linalg.qr(block.conj().T, pivoting=True, mode='economic')
            picked = block @ block[pivots[:m], :].conj().T
            q, _ = scipy.linalg.qr(picked, mode='economic')
            vectors[:, start:stop] = q
        start = stop

    if n:
        lead = np.argmax(np.abs(vectors), axis=0)
        phase = vectors[lead, np.arange(vectors.shape[1])]
        vectors *= (phase.conj() / np.abs(phase))[None, :]


def eigen_residuals(op, eig):
    """
    Returns max_n ||D v_n - lambda_n v_n|| and the unitarity defect ||V*V - I||.
    """
    v = eig.eigenvectors
    residual = op.matrix @ v - v * eig.eigenvalues[None, :]
    unitarity = v.conj().T @ v - np.eye(v.shape[1])
    return float(np.max(np.linalg.norm(residual, axis=0))), float(np.max(np.abs(unitarity)))


def spectral_projector(eig, interval, degeneracy_tol=None):
    """
    Returns the spectral projector sum_{lambda in [a, b)} v v*.

    Arguments:
        - eig: FiberEigensystem
        - interval: (a, b) with a < b; infinite endpoints allowed
        - degeneracy_tol: absolute tolerance for the endpoint ambiguity check
    """
    _, v = eig.subspace(interval, degeneracy_tol)
    return v @ v.conj().T
