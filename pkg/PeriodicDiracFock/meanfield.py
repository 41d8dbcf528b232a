"""
The self-consistent operator D_gamma = D^0 - alpha z G + alpha (rho_gamma * G - W_gamma)
on each Bloch fiber, and the Dirac-Fock energy of a density matrix.
"""
import numpy as np

from dataclasses import dataclass

from .density import (
    BlochDensityMatrix, EnergyBreakdown, combine, density_fourier, trace_per_cell, validate_charge)
from .dirac import FiberOperator, assemble_free_dirac, diagonalize, dirac_blocks, free_symbol
from .errors import ConfigError, ValidationError
from .potentials import (
    ExchangeKernel, PeriodicCoulomb, probe_constant,
    coulomb_matrix, exchange_coefficients, exchange_row)
from .utils import fiber_map


SCHEMES = ('omit', 'probe-correction')
DEFAULT_SCHEME = 'probe-correction'



def check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ConfigError(f"Unknown exchange scheme '{scheme}', expected one of {SCHEMES}")
    return scheme


def _check_geometry(gamma, params):
    if abs(gamma.kgrid.ell - params.ell) > 1e-12 * params.ell:
        raise ValidationError(
            f"Density matrix lives on a cell of length {gamma.kgrid.ell}, crystal has ell={params.ell}")


def nuclear_matrix(params, basis):
    """
    Returns -alpha z G as a matrix on the basis.
    """
    return -params.alpha * params.z * coulomb_matrix(basis, params.ell)


def hartree_matrix(source, basis, ell):
    """
    Matrix of the multiplication operator by rho * G (without the factor alpha).

    Its entry between plane waves k and k' is ell^3 rho^(k - k') G^(k - k').

    Arguments:
        - source: BlochDensityMatrix, or the DensityFourier of its density
        - basis: PlaneWaveBasis
        - ell: cell edge length
    """
    rho = density_fourier(source) if isinstance(source, BlochDensityMatrix) else source
    table = ell**3 * rho.values * PeriodicCoulomb(ell).fourier(rho.transfers)
    return np.kron(table[basis.difference_index], np.eye(4))


def regularize(values, flagged, constant, scheme):
    """
    Returns the kernel coefficients with the flagged (singular) entries set to
    0 ('omit') or to the probe constant ('probe-correction').
    """
    check_scheme(scheme)
    fill = constant if scheme == 'probe-correction' else 0.0
    return np.where(flagged, fill, values)


def exchange_sources(gamma):
    """
    Returns per fiber j the pair (V_j, lambda_j), where the columns of V_j are
    the shifted orbitals G -> c_n(G + p), ordered p-major, zero outside the basis.
    """
    basis = gamma.basis
    sources = []
    for j in range(len(gamma.kgrid)):
        u, lam = gamma.fiber(j)
        r = len(lam)
        coeffs = np.zeros((basis.n_pw + 1, 4, r), dtype=complex)
        coeffs[:-1] = u.reshape(basis.n_pw, 4, r)
        shifted = coeffs[basis.shift_index]
        columns = shifted.transpose(1, 2, 0, 3).reshape(basis.dim, -1)
        sources.append((columns, lam))
    return sources


def _column_weights(weight, coefficients, lam):
    return (weight * coefficients[:, None] * lam[None, :]).reshape(-1)


def _exchange_matrix(sources, weights, row, dim):
    """
    Sum over fibers j of V_j diag(w_j * kernel * lambda) V_j*.

    Arguments:
        - sources: output of exchange_sources
        - weights: k-grid weights
        - row: (n_k, n_p) regularized kernel coefficients for the target fiber
        - dim: fiber dimension
    """
    out = np.zeros((dim, dim), dtype=complex)
    for (columns, lam), w, coefficients in zip(sources, weights, row):
        if len(lam) == 0:
            continue
        scale = _column_weights(w, coefficients, lam)
        out += (columns * scale[None, :]) @ columns.conj().T
    return 0.5 * (out + out.conj().T)


def exchange_apply(gamma, xi_index, scheme=DEFAULT_SCHEME, table=None, sources=None):
    """
    Exchange matrix W_gamma on grid fiber `xi_index` (without the factor alpha).

    Entry ((G', s'), (G, s)) is
        sum_j w_j sum_n lambda_n sum_p K(xi, xi_j, p) c_n(G' + p, s') c_n(G + p, s)*
    with K = (4 pi / ell^3) / |2 pi p / ell - (xi - xi_j)|^2 regularized by `scheme`.

    Arguments:
        - gamma: BlochDensityMatrix
        - xi_index: index of the target fiber on gamma's grid
        - scheme: 'omit' or 'probe-correction'
        - table: precomputed ExchangeTable (optional)
        - sources: precomputed exchange_sources(gamma) (optional)
    """
    check_scheme(scheme)
    basis, kgrid = gamma.basis, gamma.kgrid
    if table is None:
        table = exchange_coefficients(kgrid, basis, kgrid.ell)
    if sources is None:
        sources = exchange_sources(gamma)

    row = regularize(table.values[xi_index], table.singular[xi_index], table.probe_constant, scheme)
    return _exchange_matrix(sources, kgrid.weights, row, basis.dim)


def exchange_energy(gamma, alpha, scheme=DEFAULT_SCHEME, table=None, sources=None):
    """
    Returns -(alpha/2) sum_i w_i Tr[W_i gamma_i], evaluated through the
    overlaps V_j* U_i instead of the dense exchange matrices.
    """
    check_scheme(scheme)
    basis, kgrid = gamma.basis, gamma.kgrid
    if table is None:
        table = exchange_coefficients(kgrid, basis, kgrid.ell)
    if sources is None:
        sources = exchange_sources(gamma)
    effective = regularize(table.values, table.singular, table.probe_constant, scheme)

    total = 0.0
    for i, w_i in enumerate(kgrid.weights):
        u, mu = gamma.fiber(i)
        if len(mu) == 0:
            continue
        for j, ((columns, lam), w_j) in enumerate(zip(sources, kgrid.weights)):
            if len(lam) == 0:
                continue
            overlap = np.abs(columns.conj().T @ u)**2
            scale = _column_weights(w_j, effective[i, j], lam)
            total += w_i * float(np.sum(scale[:, None] * overlap * mu[None, :]))
    return -0.5 * alpha * total


def kinetic_energy(gamma):
    """
    Returns sum_i w_i sum_n lambda_n <u_n, D_xi_i u_n>.
    """
    basis, kgrid = gamma.basis, gamma.kgrid
    total = 0.0
    for i, w in enumerate(kgrid.weights):
        lam = gamma.occupations[i]
        if len(lam) == 0:
            continue
        c = gamma.spinor_coefficients(i)
        blocks = dirac_blocks(basis.momenta(kgrid.points[i], kgrid.ell))
        expectation = np.einsum('gan,gab,gbn->n', c.conj(), blocks, c).real
        total += w * float(np.dot(lam, expectation))
    return total



@dataclass(eq=False)
class MeanFieldOperator:
    """
    The operators D_gamma_xi on every fiber of a k-grid.

    Attributes:
        - params: CrystalParams
        - basis: PlaneWaveBasis
        - kgrid: KGrid
        - scheme: exchange singularity scheme
        - nuclear: -alpha z G matrix (xi independent)
        - hartree: rho * G matrix, without alpha (xi independent)
        - exchange: tuple of per-fiber exchange matrices, without alpha
        - fibers: tuple of FiberOperator holding the assembled D_gamma_xi
    """

    params: object
    basis: object
    kgrid: object
    scheme: str
    nuclear: np.ndarray
    hartree: np.ndarray
    exchange: tuple
    fibers: tuple


    def __len__(self):
        return len(self.fibers)


    def matrix(self, i):
        return self.fibers[i].matrix


    def diagonalize(self, threads=1, degeneracy_tol=None):
        """
        Returns the FiberEigensystem of every fiber, in grid order.
        """
        return fiber_map(lambda op: diagonalize(op, degeneracy_tol), self.fibers, threads)


    def trace_with(self, h):
        """
        Returns sum_i w_i Tr[D_gamma_xi_i h_i] for a (possibly signed) BlochDensityMatrix h.
        """
        total = 0.0
        for i, w in enumerate(self.kgrid.weights):
            u, lam = h.fiber(i)
            if len(lam) == 0:
                continue
            expectation = np.einsum('an,ab,bn->n', u.conj(), self.matrix(i), u).real
            total += w * float(np.dot(lam, expectation))
        return total



def assemble_meanfield(gamma, params, basis=None, kgrid=None, scheme=DEFAULT_SCHEME,
                       threads=1, table=None):
    """
    Assemble D_xi - alpha z G + alpha (rho_gamma * G - W_gamma_xi) on every fiber.

    States built with check=True must carry charge <= max(q, 1).

    Arguments:
        - gamma: BlochDensityMatrix
        - params: CrystalParams
        - basis, kgrid: must match gamma's (defaults to them)
        - scheme: exchange singularity scheme
        - threads: worker threads over fibers
        - table: precomputed ExchangeTable (optional)
    """
    check_scheme(scheme)
    _check_geometry(gamma, params)
    basis = basis or gamma.basis
    kgrid = kgrid or gamma.kgrid
    if basis.kmax != gamma.basis.kmax or len(kgrid) != len(gamma.kgrid):
        raise ValidationError("Density matrix does not live on the requested basis / grid")
    if gamma.checked:
        validate_charge(gamma, params.q_plus)

    if table is None:
        table = exchange_coefficients(kgrid, basis, params.ell)
    sources = exchange_sources(gamma)

    nuclear = nuclear_matrix(params, basis)
    hartree = hartree_matrix(gamma, basis, params.ell)
    static = nuclear + params.alpha * hartree

    def build(i):
        exchange = exchange_apply(gamma, i, scheme, table, sources)
        free = assemble_free_dirac(basis, kgrid.points[i], params.ell).matrix
        matrix = free + static - params.alpha * exchange
        return exchange, FiberOperator(xi=kgrid.points[i], matrix=0.5 * (matrix + matrix.conj().T))

    built = fiber_map(build, range(len(kgrid)), threads)
    return MeanFieldOperator(
        params=params, basis=basis, kgrid=kgrid, scheme=scheme,
        nuclear=nuclear, hartree=hartree,
        exchange=tuple(b[0] for b in built), fibers=tuple(b[1] for b in built))


def assemble_fiber(gamma, params, xi, scheme=DEFAULT_SCHEME, zone_average=None):
    """
    Assemble D_gamma_xi at an arbitrary quasi-momentum xi (band paths).

    Kernel momenta inside the grid cell around 0 get the grid's probe
    constant ('probe-correction') or are dropped ('omit').
    """
    check_scheme(scheme)
    _check_geometry(gamma, params)
    basis, kgrid = gamma.basis, gamma.kgrid
    if zone_average is None:
        from .constants import zone_inverse_square_average
        zone_average = zone_inverse_square_average()

    values, flagged = exchange_row(xi, kgrid, basis, ExchangeKernel(params.ell))
    row = regularize(values, flagged, probe_constant(kgrid, zone_average), scheme)
    exchange = _exchange_matrix(exchange_sources(gamma), kgrid.weights, row, basis.dim)

    matrix = (assemble_free_dirac(basis, xi, params.ell).matrix
              + nuclear_matrix(params, basis)
              + params.alpha * (hartree_matrix(gamma, basis, params.ell) - exchange))
    return FiberOperator(xi=np.asarray(xi, dtype=float), matrix=0.5 * (matrix + matrix.conj().T))


def energy(gamma, params, eps_P=0.0, scheme=DEFAULT_SCHEME, table=None):
    """
    Evaluate the Dirac-Fock energy per unit cell and its penalized value.

        kinetic  = sum_i w_i Tr[D_xi gamma_i]
        nuclear  = -alpha z ell^3 sum_p G^(p) conj rho^(p)
        hartree  = (alpha/2) ell^6 sum_p G^(p) |rho^(p)|^2
        exchange = -(alpha/2) sum_i w_i Tr[W_i gamma_i]

    Arguments:
        - gamma: BlochDensityMatrix
        - params: CrystalParams
        - eps_P: penalty parameter
        - scheme: exchange singularity scheme
        - table: precomputed ExchangeTable (optional)
    """
    _check_geometry(gamma, params)
    ell, alpha = params.ell, params.alpha

    rho = density_fourier(gamma)
    coulomb = PeriodicCoulomb(ell).fourier(rho.transfers)
    nuclear = -alpha * params.z * ell**3 * float(np.sum(coulomb * rho.values.conj()).real)
    hartree = 0.5 * alpha * ell**6 * float(np.sum(coulomb * np.abs(rho.values)**2))

    return EnergyBreakdown.from_terms(
        kinetic=kinetic_energy(gamma),
        nuclear=nuclear,
        hartree=hartree,
        exchange=exchange_energy(gamma, alpha, scheme, table),
        eps_P=eps_P,
        trace=trace_per_cell(gamma),
    )



@dataclass(frozen=True)
class DerivativeReport:
    """
    Finite-difference check of dE(gamma)[h] = sum_i w_i Tr[D_gamma_xi_i h_i].

    Attributes:
        - t_values: step sizes
        - errors: |(E(gamma + t h) - E(gamma))/t - derivative| per step
        - orders: observed convergence orders between consecutive steps
        - derivative: the operator-side value
    """

    t_values: tuple
    errors: tuple
    orders: tuple
    derivative: float



def directional_derivative_check(gamma, h, t_list, params, scheme=DEFAULT_SCHEME, table=None):
    """
    Compare the difference quotients of the energy along h with the trace of
    D_gamma against h. For the quadratic energy the error is exactly linear in t.

    Arguments:
        - gamma: BlochDensityMatrix
        - h: direction, a BlochDensityMatrix built with check=False
        - t_list: step sizes
        - params: CrystalParams
        - scheme: exchange singularity scheme
        - table: precomputed ExchangeTable (optional)
    """
    if table is None:
        table = exchange_coefficients(gamma.kgrid, gamma.basis, params.ell)

    meanfield = assemble_meanfield(gamma, params, scheme=scheme, table=table)
    derivative = meanfield.trace_with(h)
    base = energy(gamma, params, scheme=scheme, table=table).total

    t_values = tuple(float(t) for t in t_list)
    errors = []
    for t in t_values:
        moved = combine([(1.0, gamma), (t, h)], check=False)
        quotient = (energy(moved, params, scheme=scheme, table=table).total - base) / t
        errors.append(abs(quotient - derivative))

    orders = []
    for (t0, e0), (t1, e1) in zip(zip(t_values, errors), zip(t_values[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and t0 != t1:
            orders.append(float(np.log(e0 / e1) / np.log(t0 / t1)))
        else:
            orders.append(float('nan'))

    return DerivativeReport(
        t_values=t_values, errors=tuple(errors), orders=tuple(orders), derivative=derivative)



@dataclass(frozen=True)
class GapReport:
    """
    Attributes:
        - min_abs_eigenvalue: smallest |eigenvalue| over all fibers
        - lambda0: lower bound from the constants
        - floor: 1 - kappa
        - holds: min_abs_eigenvalue >= max(lambda0, floor) - slack
    """

    min_abs_eigenvalue: float
    lambda0: float
    floor: float
    holds: bool



def gap_check(eigensystems, check, slack=1e-10):
    """
    Check min |eig(D_gamma_xi)| >= lambda0 and >= 1 - kappa.

    Arguments:
        - eigensystems: FiberEigensystem per fiber
        - check: AssumptionCheck of the crystal
    """
    smallest = min(float(np.min(np.abs(e.eigenvalues))) for e in eigensystems)
    if not check.feasible:
        return GapReport(min_abs_eigenvalue=smallest, lambda0=None, floor=1 - check.kappa, holds=False)
    floor = 1 - check.kappa
    holds = smallest >= max(check.lambda0, floor) - slack
    return GapReport(min_abs_eigenvalue=smallest, lambda0=check.lambda0, floor=floor, holds=bool(holds))



@dataclass(frozen=True)
class BandIntervalReport:
    """
    Attributes:
        - bands: number of positive bands checked per fiber
        - fiber_holds: (1-kappa) d_k(xi) <= lambda_k(xi) <= d_k(xi) / (1-kappa) on every fiber
        - global_holds: (1-kappa) c_*(k) <= lambda_k(xi) <= c*(k) / (1-kappa)
        - worst_violation: largest amount by which any bound is exceeded (<= 0 if none)
    """

    bands: int
    fiber_holds: bool
    global_holds: bool
    worst_violation: float



def band_interval_check(eigensystems, kgrid, basis, check, bands, slack=1e-6):
    """
    Check the positive eigenvalues of D_gamma against the free band edges.

    The per-fiber form compares with the free eigenvalues d_k(xi) of the same
    basis; the global form uses c_*(k) (sampled) and the closed-form upper bound on c*(k).

    Arguments:
        - eigensystems: FiberEigensystem per grid fiber
        - kgrid: KGrid
        - basis: PlaneWaveBasis
        - check: AssumptionCheck (must be feasible)
        - bands: number of positive bands to check
        - slack: absolute tolerance
    """
    from .constants import c_star_lower, c_star_upper

    if not check.feasible:
        raise ValidationError("Band intervals need kappa < 1")
    shrink = 1 - check.kappa

    lower_global = np.array([c_star_lower(k, kgrid.ell) for k in range(1, bands + 1)])
    upper_global = np.array([c_star_upper(k, kgrid.ell) for k in range(1, bands + 1)])

    worst_fiber, worst_global = -np.inf, -np.inf
    for eig, xi in zip(eigensystems, kgrid.points):
        positive = eig.eigenvalues[eig.eigenvalues >= 0][:bands]
        n = len(positive)
        if n == 0:
            continue
        free = np.repeat(np.sort(free_symbol(basis, xi, kgrid.ell)), 2)[:n]
        worst_fiber = max(worst_fiber, float(np.max(np.concatenate([
            shrink * free - positive, positive - free / shrink]))))
        worst_global = max(worst_global, float(np.max(np.concatenate([
            shrink * lower_global[:n] - positive, positive - upper_global[:n] / shrink]))))

    return BandIntervalReport(
        bands=int(bands),
        fiber_holds=bool(worst_fiber <= slack),
        global_holds=bool(worst_global <= slack),
        worst_violation=max(worst_fiber, worst_global),
    )
