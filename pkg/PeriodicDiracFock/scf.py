"""
The penalized ground-state solver.

Each SCF iteration diagonalizes D_gamma on every fiber, fills the positive
spectrum in increasing order up to the Fermi level (the linear subproblem),
mixes the result into the iterate and optionally pulls the iterate back onto
the positive spectral subspace of its own operator (the retraction).
"""
import itertools
import numpy as np
import scipy.linalg

from collections import deque
from dataclasses import dataclass, field, replace

from .config import ScfConfig, auto_eps_P
from .constants import admissible_set, check_assumption, rank_margin
from .density import (
    BlochDensityMatrix, difference_norms, half_weighted_trace_norm, mix, norms, trace_per_cell)
from .dirac import FiberOperator
from .errors import (
    ModelFailureError, NonConvergenceError, SpectralAmbiguityError, ValidationError)
from .lattice import build_basis, build_kgrid
from .meanfield import (
    DEFAULT_SCHEME, MeanFieldOperator, assemble_meanfield, check_scheme, energy, gap_check)
from .potentials import exchange_coefficients
from .records import ConvergenceRecord, IterationRecord, RetractionRecord
from .utils import Loggable, uid


FERMI_MAX_STEPS = 200
FERMI_TOL = 1e-12
SVD_DROP = 1e-14
BRUTEFORCE_MAX_LEVELS = 12



def _weights(kgrid):
    return np.asarray(getattr(kgrid, 'weights', kgrid), dtype=float)


def counting_function(spectra, kgrid, s):
    """
    Returns C(s) = sum_i w_i #{n : 0 <= lambda_n(xi_i) <= s}.

    Arguments:
        - spectra: FiberEigensystem per fiber
        - kgrid: KGrid, or the array of fiber weights
        - s: level
    """
    return float(sum(
        w * np.count_nonzero((e.eigenvalues >= 0) & (e.eigenvalues <= s))
        for w, e in zip(_weights(kgrid), spectra)))


def _check_zero(spectra, degeneracy_tol=None):
    for e in spectra:
        tol = e.tolerance(degeneracy_tol)
        near = np.abs(e.eigenvalues) <= tol
        if np.any(near):
            value = float(e.eigenvalues[near][0])
            raise SpectralAmbiguityError(
                f"Eigenvalue {value!r} is within {tol:.1e} of 0: the positive subspace is ambiguous",
                eigenvalue=value)


def fermi_level(spectra, kgrid, q, max_steps=FERMI_MAX_STEPS, tol=FERMI_TOL):
    """
    Returns nu_1, the smallest eigenvalue with C(nu_1) >= q.

    The level is bracketed by bisection on the counting function and then
    snapped to the eigenvalue it converged to. Returns inf when all positive
    bands together hold less than q.

    Arguments:
        - spectra: FiberEigensystem per fiber
        - kgrid: KGrid, or the array of fiber weights
        - q: charge to accommodate
        - max_steps: bisection step cap
        - tol: absolute slack on the charge comparison
    """
    positive = np.concatenate([e.eigenvalues[e.eigenvalues > 0] for e in spectra])
    if len(positive) == 0:
        raise ModelFailureError("D_gamma has no positive eigenvalues")

    hi = float(np.max(positive))
    if counting_function(spectra, kgrid, hi) < q - tol:
        return np.inf

    lo = 0.0
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if counting_function(spectra, kgrid, mid) >= q - tol:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            break

    return float(np.min(positive[positive > lo]))



@dataclass(frozen=True, eq=False)
class AufbauFilling:
    """
    Attributes:
        - occupations: per fiber, occupation of every eigenvalue (aligned with the eigensystem)
        - shells: per fiber, boolean mask of the nu_1-shell
        - nu: min(nu_1, eps_P)
        - nu1: Fermi level of the counting function (inf if q cannot be reached)
        - fraction: common occupation of the shell
    """

    occupations: tuple
    shells: tuple
    nu: float
    nu1: float
    fraction: float



def aufbau_occupations(spectra, kgrid, q, eps_P, degeneracy_tol=None):
    """
    Aufbau filling of the positive spectrum.

    Eigenvalues in (0, nu) get occupation 1 with nu = min(nu_1, eps_P). When
    nu = nu_1 the remaining charge is spread uniformly over the nu_1-shell
    (eigenvalues within the degeneracy tolerance of nu_1, on every fiber).

    Arguments:
        - spectra: FiberEigensystem per fiber
        - kgrid: KGrid, or the array of fiber weights
        - q: electron number per cell
        - eps_P: penalty parameter
        - degeneracy_tol: absolute shell tolerance (defaults to the eigensystem's)
    """
    _check_zero(spectra, degeneracy_tol)
    weights = _weights(kgrid)
    nu1 = fermi_level(spectra, weights, q)
    nu = min(nu1, eps_P)

    occupations, shells = [], []
    for e in spectra:
        values = e.eigenvalues
        if np.isfinite(nu1) and nu1 <= eps_P:
            tol = e.tolerance(degeneracy_tol)
            shell = (values > 0) & (np.abs(values - nu1) <= tol)
            below = (values > 0) & (values < nu1 - tol)
        else:
            shell = np.zeros(len(values), dtype=bool)
            below = (values > 0) & (values < nu)
        occupations.append(below.astype(float))
        shells.append(shell)

    fraction = 0.0
    shell_charge = sum(w * np.count_nonzero(s) for w, s in zip(weights, shells))
    if shell_charge > 0:
        below_charge = sum(w * np.sum(o) for w, o in zip(weights, occupations))
        fraction = float(np.clip((q - below_charge) / shell_charge, 0.0, 1.0))
        for o, s in zip(occupations, shells):
            o[s] = fraction

    return AufbauFilling(
        occupations=tuple(occupations), shells=tuple(shells),
        nu=float(nu), nu1=float(nu1), fraction=fraction)



@dataclass(frozen=True, eq=False)
class LinearSolveResult:
    """
    Minimizer of the penalized linear problem Tr[(D_gamma - eps_P) gamma'] over
    0 <= gamma' <= 1, Tr gamma' <= q.

    Attributes:
        - gamma_new: the aufbau density matrix
        - nu: Fermi level min(nu_1, eps_P)
        - nu1: smallest level whose counting function reaches q
        - filled_charge: trace per unit cell of gamma_new
        - delta_occupations: per fiber, the occupations of the nu_1-shell
        - shell_fraction: common occupation of the nu_1-shell
        - spectra: FiberEigensystem per fiber
    """

    gamma_new: BlochDensityMatrix
    nu: float
    nu1: float
    filled_charge: float
    delta_occupations: tuple
    shell_fraction: float
    spectra: tuple



def linear_solve(meanfield, q, eps_P, threads=1, spectra=None, degeneracy_tol=None):
    """
    Solve the linear subproblem for a mean-field operator.

    Arguments:
        - meanfield: MeanFieldOperator
        - q: electron number per cell
        - eps_P: penalty parameter
        - threads: worker threads over fibers
        - spectra: precomputed FiberEigensystem per fiber (optional)
        - degeneracy_tol: absolute shell tolerance (defaults to the eigensystem's)
    """
    spectra = tuple(spectra or meanfield.diagonalize(threads, degeneracy_tol))
    filling = aufbau_occupations(spectra, meanfield.kgrid, q, eps_P, degeneracy_tol)

    orbitals, kept = [], []
    for e, occ in zip(spectra, filling.occupations):
        keep = occ > 0
        orbitals.append(e.eigenvectors[:, keep])
        kept.append(occ[keep])

    gamma = BlochDensityMatrix(meanfield.basis, meanfield.kgrid, orbitals, kept)
    return LinearSolveResult(
        gamma_new=gamma, nu=filling.nu, nu1=filling.nu1, filled_charge=trace_per_cell(gamma),
        delta_occupations=tuple(occ[shell] for occ, shell in zip(filling.occupations, filling.shells)),
        shell_fraction=filling.fraction, spectra=spectra)



@dataclass(frozen=True)
class AufbauVerdict:
    """
    Attributes:
        - aufbau_value: sum (lambda - eps_P) occ of the aufbau filling
        - minimum: smallest value over all 0/1 fillings with at most q states
        - best: indices (into the positive eigenvalues) of a minimizing filling
        - optimal: aufbau_value <= minimum up to rounding
    """

    aufbau_value: float
    minimum: float
    best: tuple
    optimal: bool



def aufbau_optimality_bruteforce(source, q, eps_P=None, tol=1e-12):
    """
    Compare the aufbau filling with an exhaustive search over 0/1 fillings.

    Arguments:
        - source: single-fiber MeanFieldOperator, or a sequence holding one FiberEigensystem
        - q: integer electron number
        - eps_P: penalty parameter (defaults to the largest eigenvalue + 1)
        - tol: relative tolerance of the comparison
    """
    spectra = source.diagonalize() if isinstance(source, MeanFieldOperator) else list(source)
    if len(spectra) != 1:
        raise ValidationError(f"Brute force works on a single fiber, got {len(spectra)}")
    if int(q) != q or q < 0:
        raise ValidationError(f"Brute force needs an integer q >= 0, got {q}")
    q = int(q)

    values = spectra[0].eigenvalues
    positive = values[values > 0]
    if len(positive) > BRUTEFORCE_MAX_LEVELS:
        raise ValidationError(
            f"{len(positive)} positive levels exceed the brute force limit {BRUTEFORCE_MAX_LEVELS}")
    if eps_P is None:
        eps_P = float(np.max(values)) + 1

    filling = aufbau_occupations(spectra, np.ones(1), q, eps_P)
    aufbau_value = float(np.dot(values - eps_P, filling.occupations[0]))

    minimum, best = 0.0, ()
    shifted = positive - eps_P
    for size in range(1, min(q, len(positive)) + 1):
        for subset in itertools.combinations(range(len(positive)), size):
            value = float(np.sum(shifted[list(subset)]))
            if value < minimum:
                minimum, best = value, subset

    scale = max(1.0, abs(minimum))
    return AufbauVerdict(
        aufbau_value=aufbau_value, minimum=minimum, best=best,
        optimal=bool(aufbau_value <= minimum + tol * scale))



def _project_positive(gamma, spectra, degeneracy_tol=None):
    """
    Returns P+ gamma P+ fiber by fiber, with P+ the projector onto the
    positive eigenvectors in `spectra`.
    """
    orbitals, occupations = [], []
    for i, e in enumerate(spectra):
        _, positive = e.subspace((0.0, np.inf), degeneracy_tol)
        u, lam = gamma.fiber(i)
        if len(lam) == 0 or positive.shape[1] == 0:
            orbitals.append(np.zeros((gamma.basis.dim, 0), dtype=complex))
            occupations.append(np.zeros(0))
            continue

        b = (positive.conj().T @ u) * np.sqrt(lam)[None, :]
        w, s, _ = scipy.linalg.svd(b, full_matrices=False)
        keep = s**2 > SVD_DROP
        orbitals.append(positive @ w[:, keep])
        occupations.append(s[keep]**2)

    return BlochDensityMatrix(gamma.basis, gamma.kgrid, orbitals, occupations)


def retract_T(gamma, params, scheme=DEFAULT_SCHEME, table=None, threads=1,
              meanfield=None, degeneracy_tol=None):
    """
    Returns T(gamma) = P+_gamma gamma P+_gamma, with P+_gamma the projector onto
    the positive spectral subspace of D_gamma on each fiber.

    The result is stored with rank no larger than gamma's.

    Arguments:
        - gamma: BlochDensityMatrix with occupations in [0, 1]
        - params: CrystalParams
        - scheme: exchange singularity scheme
        - table: precomputed ExchangeTable (optional)
        - threads: worker threads over fibers
        - meanfield: precomputed D_gamma (optional)
        - degeneracy_tol: ambiguity tolerance at 0
    """
    if any(np.any(lam < 0) for lam in gamma.occupations):
        raise ValidationError("The retraction needs a non-negative density matrix")
    if meanfield is None:
        meanfield = assemble_meanfield(gamma, params, scheme=scheme, threads=threads, table=table)
    return _project_positive(gamma, meanfield.diagonalize(threads, degeneracy_tol), degeneracy_tol)



@dataclass(frozen=True)
class RetractionReport:
    """
    Attributes:
        - steps: number of applications of T that moved the state
        - final_residual: max(S11, Y) distance between the last state and its image
        - residuals: the distance at every step
        - ratios: consecutive residual ratios (measured contraction)
        - bound: theoretical contraction bound 2 A tau (None if unavailable)
        - admissible_value: max(||gamma |D0|^1/2||_S11, ||gamma||_Y) + M ||T(gamma) - gamma||
        - admissible: admissible_value < tau (None if not tested)
    """

    steps: int
    final_residual: float
    residuals: tuple
    ratios: tuple
    bound: float = None
    admissible_value: float = None
    admissible: bool = None


    @property
    def measured_ratio(self):
        """
        Returns the largest measured ratio, or None before two steps.
        """
        return max(self.ratios) if self.ratios else None



def retract_theta(gamma, params, tol=1e-10, max_iter=50, scheme=DEFAULT_SCHEME, table=None,
                  threads=1, admissible=None, meanfield=None, degeneracy_tol=None):
    """
    Iterate T until the state stops moving.

    Returns (theta(gamma), RetractionReport, D_theta(gamma)). Raises
    NonConvergenceError (carrying the last state and the report) when
    max_iter applications do not reach tol.

    Arguments:
        - gamma: BlochDensityMatrix
        - params: CrystalParams
        - tol: stopping threshold on max(S11, Y) of T(gamma) - gamma
        - max_iter: cap on the number of moves
        - scheme, table, threads: mean-field assembly settings
        - admissible: AdmissibleSet to test the input against (optional)
        - meanfield: precomputed D_gamma (optional)
        - degeneracy_tol: ambiguity tolerance at 0
    """
    if table is None:
        table = exchange_coefficients(gamma.kgrid, gamma.basis, params.ell)

    current = gamma
    if meanfield is None:
        meanfield = assemble_meanfield(current, params, scheme=scheme, threads=threads, table=table)

    residuals = []
    admissible_value, admissible_ok = None, None
    bound = admissible.contraction if admissible is not None else None

    def report(steps):
        ratios = tuple(b / a for a, b in zip(residuals, residuals[1:]) if a > 0)
        return RetractionReport(
            steps=steps, final_residual=residuals[-1], residuals=tuple(residuals),
            ratios=ratios, bound=bound, admissible_value=admissible_value,
            admissible=admissible_ok)

    for steps in range(max_iter + 1):
        image = retract_T(
            current, params, scheme, table, threads, meanfield=meanfield,
            degeneracy_tol=degeneracy_tol)
        diff = difference_norms(image, current)
        residuals.append(max(diff.S11, diff.Y))

        if steps == 0 and admissible is not None:
            size = max(half_weighted_trace_norm(current), norms(current).Y)
            admissible_value = float(size + admissible.weight * max(diff.X, diff.Y))
            admissible_ok = bool(admissible_value < admissible.tau)

        if residuals[-1] < tol:
            return current, report(steps), meanfield

        if steps == max_iter:
            break
        current = image
        meanfield = assemble_meanfield(current, params, scheme=scheme, threads=threads, table=table)

    r = report(max_iter)
    raise NonConvergenceError(
        f"Retraction did not reach {tol:.1e} in {max_iter} steps (residual {r.final_residual:.3e})",
        state=current, report=r)



class AndersonMixer:
    """
    Extrapolation of the mean-field operator from a short history of
    (D_gamma, D_gamma gamma - gamma D_gamma) pairs. Coefficients c minimize
    ||sum c_j e_j|| subject to sum c_j = 1.
    """

    def __init__(self, depth=4):
        self.depth = depth
        self.history = deque(maxlen=depth)


    def __len__(self):
        return len(self.history)


    def push(self, meanfield, gamma):
        errors = []
        for i in range(len(meanfield)):
            f, g = meanfield.matrix(i), gamma.dense(i)
            errors.append(f @ g - g @ f)
        self.history.append((meanfield, errors))


    def error_norm(self):
        """
        Returns the weighted Frobenius norm of the latest commutator.
        """
        if not self.history:
            return None
        meanfield, errors = self.history[-1]
        return float(np.sqrt(sum(w * np.vdot(e, e).real for w, e in zip(meanfield.kgrid.weights, errors))))


    def coefficients(self):
        """
        Returns the extrapolation coefficients, or None when fewer than two
        entries are stored or the bordered system is singular.
        """
        n = len(self.history)
        if n < 2:
            return None

        weights = self.history[-1][0].kgrid.weights
        b = np.empty((n + 1, n + 1))
        b[-1, :] = 1
        b[:, -1] = 1
        b[-1, -1] = 0
        for i, (_, ei) in enumerate(self.history):
            for j, (_, ej) in enumerate(self.history):
                b[i, j] = sum(w * np.vdot(x, y).real for w, x, y in zip(weights, ei, ej))

        scale = np.max(np.abs(np.diag(b)[:-1]))
        if scale > 0:
            b[:-1, :-1] /= scale
        rhs = np.zeros(n + 1)
        rhs[-1] = 1

        try:
            c = scipy.linalg.solve(b, rhs)
        except (scipy.linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(c)):
            return None
        return c[:-1]


    def extrapolate(self):
        """
        Returns the extrapolated MeanFieldOperator, or None (see coefficients()).
        """
        c = self.coefficients()
        if c is None:
            return None

        latest = self.history[-1][0]
        fibers = []
        for i, op in enumerate(latest.fibers):
            matrix = sum(cj * mf.matrix(i) for cj, (mf, _) in zip(c, self.history))
            fibers.append(FiberOperator(xi=op.xi, matrix=0.5 * (matrix + matrix.conj().T)))
        return replace(latest, fibers=tuple(fibers))



@dataclass(eq=False)
class ScfState:
    """
    State of the SCF loop.

    Attributes:
        - iterate: BlochDensityMatrix
        - energy: EnergyBreakdown of the iterate
        - residual_fixedpoint: ||gamma - aufbau(D_gamma)||_S11 of the last iteration
        - residual_retraction: final residual of the last retraction (None if not run)
        - iteration: iterations done
        - nu: Fermi level of the last linear solve
        - charge: trace per unit cell of the iterate
        - history: IterationRecord per iteration
        - meanfield: D_gamma of the iterate
        - converged: whether both stopping criteria were met
        - checks: final-state checks (filled on convergence)
    """

    iterate: BlochDensityMatrix
    energy: object
    residual_fixedpoint: float = np.inf
    residual_retraction: float = None
    iteration: int = 0
    nu: float = None
    charge: float = 0.0
    history: list = field(default_factory=list)
    meanfield: MeanFieldOperator = None
    converged: bool = False
    checks: dict = field(default_factory=dict)



class ScfSolver(Loggable):
    """
    Fixed-point solver for the penalized Dirac-Fock problem on a k-grid.

    Records (IterationRecord, RetractionRecord, ConvergenceRecord) are handed
    to every observer's `_receive_record(record)` and, with a bridge attached,
    published on the given channel.

    Methods:
        - add_observer(observer)
        - initial_guess()
        - solve(gamma=None)
        - final_checks(state)
    """

    def __init__(self, params, basis, kgrid, eps_P, config=None, name=None,
                 observers=(), bridge=None, channel=None):
        """
        Arguments:
            - params: CrystalParams
            - basis: PlaneWaveBasis
            - kgrid: KGrid (built for params.ell)
            - eps_P: penalty parameter
            - config: ScfConfig
            - name: run identifier (random if not given)
            - observers: objects with a `_receive_record(record)` method
            - bridge: ProgressBridge to publish records through
            - channel: channel to publish on (required with a bridge)
        """
        if abs(kgrid.ell - params.ell) > 1e-12 * params.ell:
            raise ValidationError(f"k-grid built for ell={kgrid.ell}, crystal has ell={params.ell}")
        if bridge is not None and channel is None:
            raise ValueError("A channel is required to publish through a bridge")

        self.params = params
        self.basis = basis
        self.kgrid = kgrid
        self.eps_P = float(eps_P)
        self.config = config or ScfConfig()
        self.run = name or uid()
        self._observers = list(observers)
        self._bridge = bridge
        self._channel = channel

        check_scheme(self.config.exchange_scheme)
        self.check = check_assumption(params, eps_P=self.eps_P)
        self.admissible = None
        if self.check.feasible and 2 * self.check.A < 1:
            self.admissible = admissible_set(params, self.check)

        self._table = None


    def __str__(self):
        return f"[{self.__class__.__name__} - run {self.run}]"


    @property
    def table(self):
        """
        Exchange coefficients of the grid, computed on first use.
        """
        if self._table is None:
            self._table = exchange_coefficients(self.kgrid, self.basis, self.params.ell)
        return self._table


    def add_observer(self, observer):
        self._observers.append(observer)


    def _emit(self, record):
        for observer in self._observers:
            try:
                observer._receive_record(record)
            except Exception as e:
                self.logger.error(f"{self}:  Exception in observer {observer} receiving record.")
                self.logger.exception(f"{self}:  {e}")
        if self._bridge is not None:
            self._bridge.send(record, self._channel)


    def _assemble(self, gamma):
        cfg = self.config
        return assemble_meanfield(
            gamma, self.params, self.basis, self.kgrid, cfg.exchange_scheme,
            threads=cfg.threads, table=self.table)


    def _energy(self, gamma):
        return energy(gamma, self.params, self.eps_P, self.config.exchange_scheme, self.table)


    def _linear_solve(self, meanfield):
        result = linear_solve(meanfield, self.params.q, self.eps_P, threads=self.config.threads)
        if not np.isfinite(result.nu1):
            self.logger.warning(
                f"{self}:  The basis holds only {result.filled_charge:.6g} positive states "
                f"per cell, fewer than q = {self.params.q}")
        return result


    def initial_guess(self):
        """
        Returns the aufbau filling of D^0 - alpha z G.
        """
        zero = BlochDensityMatrix.zeros(self.basis, self.kgrid)
        return self._linear_solve(self._assemble(zero)).gamma_new


    def _retract(self, gamma, iteration):
        cfg = self.config
        try:
            gamma, report, meanfield = retract_theta(
                gamma, self.params, tol=cfg.retract_tol, max_iter=cfg.retract_max_iter,
                scheme=cfg.exchange_scheme, table=self.table, threads=cfg.threads,
                admissible=self.admissible)
        except NonConvergenceError as e:
            self.logger.warning(f"{self}:  {e}; keeping the unretracted iterate")
            return gamma, None, e.report

        if report.admissible is False:
            self.logger.warning(
                f"{self}:  Iterate is outside the admissible set of the retraction "
                f"({report.admissible_value:.4g} >= tau = {self.admissible.tau:.4g})")

        self._emit(RetractionRecord(
            self.run, iteration, report.steps, report.final_residual, report.ratios,
            bound=report.bound, admissible=report.admissible))
        return gamma, meanfield, report


    def solve(self, gamma=None):
        """
        Run the SCF loop from gamma (default: initial_guess()).

        Returns the converged ScfState; raises NonConvergenceError (carrying
        the last state and the iteration history) after max_iter iterations.
        """
        cfg, params = self.config, self.params
        if self.check.eps_P_threshold is None or self.eps_P <= self.check.eps_P_threshold:
            self.logger.warning(
                f"{self}:  eps_P = {self.eps_P:.6g} does not exceed (1 - kappa)^-1 c*(q+1) "
                f"= {self.check.eps_P_threshold}; the minimizer may carry charge below q")

        self.logger.info(
            f"{self}:  Starting SCF: ell={params.ell}, z={params.z}, q={params.q}, "
            f"alpha={params.alpha:.6g}, {len(self.kgrid)} k-points, dim={self.basis.dim}")

        gamma = gamma if gamma is not None else self.initial_guess()
        meanfield = self._assemble(gamma)
        state = ScfState(iterate=gamma, energy=self._energy(gamma), meanfield=meanfield,
                         charge=trace_per_cell(gamma))
        mixer = AndersonMixer(cfg.anderson_depth) if cfg.mixing == 'anderson' else None

        for iteration in range(1, cfg.max_iter + 1):
            result = self._linear_solve(state.meanfield)
            residual = difference_norms(state.iterate, result.gamma_new).S11

            extrapolated = None
            if mixer is not None:
                mixer.push(state.meanfield, state.iterate)
                extrapolated = mixer.extrapolate()
            if extrapolated is not None:
                new = self._linear_solve(extrapolated).gamma_new
            else:
                new = mix(state.iterate, result.gamma_new, cfg.mixing_beta)

            new_meanfield, retraction = None, None
            if cfg.retract_every and iteration % cfg.retract_every == 0:
                new, new_meanfield, retraction = self._retract(new, iteration)
            if new_meanfield is None:
                new_meanfield = self._assemble(new)

            new_energy = self._energy(new)
            delta_E = abs(new_energy.penalized - state.energy.penalized)

            state.iterate, state.energy, state.meanfield = new, new_energy, new_meanfield
            state.residual_fixedpoint = residual
            state.residual_retraction = retraction.final_residual if retraction else None
            state.iteration = iteration
            state.nu = result.nu
            state.charge = trace_per_cell(new)

            record = IterationRecord(
                self.run, iteration, new_energy.total, new_energy.penalized,
                residual, delta_E, result.nu, state.charge)
            state.history.append(record)
            self._emit(record)
            self.logger.debug(
                f"{self}:  iteration {iteration} residual {residual:.3e} dE {delta_E:.3e} "
                f"E {new_energy.total:.12g}")

            if residual < cfg.tol_scf and delta_E < cfg.tol_E:
                state.converged = True
                break

        if not state.converged:
            self._emit(ConvergenceRecord(
                self.run, False, state.iteration, state.energy.to_dict(), state.charge,
                state.nu, {}))
            e = NonConvergenceError(
                f"SCF did not converge in {cfg.max_iter} iterations "
                f"(residual {state.residual_fixedpoint:.3e})",
                state=state, history=state.history)
            self.logger.error(f"{self}:  {e}")
            raise e

        state.checks = self.final_checks(state)
        self.logger.info(
            f"{self}:  Converged in {state.iteration} iterations: E = {state.energy.total:.12g}, "
            f"charge = {state.charge:.12g}, nu = {state.nu:.12g}")
        self._emit(ConvergenceRecord(
            self.run, True, state.iteration, state.energy.to_dict(), state.charge,
            state.nu, state.checks))
        return state


    def final_checks(self, state):
        """
        Diagnostics of a converged state: charge saturation, the Fermi level
        bound, the self-consistency residual, the S1inf ball, the fiber ranks
        and the spectral gap.
        """
        params, check = self.params, self.check
        result = self._linear_solve(state.meanfield)
        residual = difference_norms(state.iterate, result.gamma_new).S11
        state.nu = result.nu

        checks = {
            'charge': state.charge,
            'charge_saturated': bool(abs(state.charge - params.q) <= 1e-8),
            'self_consistency': residual,
            'self_consistent': bool(residual <= 10 * self.config.tol_scf),
            'max_rank': int(max(state.iterate.ranks)),
            'S1inf': norms(state.iterate).S1inf,
        }

        if check.feasible:
            threshold = check.eps_P_threshold
            margin = rank_margin(params)
            gap = gap_check(result.spectra, check)
            checks.update({
                'nu_threshold': threshold,
                'nu_bound': bool(result.nu <= threshold + 1e-12),
                'R0': params.q + margin,
                'ball': bool(checks['S1inf'] <= params.q + margin + 1e-10),
                'rank_bound': bool(checks['max_rank'] <= params.q + margin),
                'min_abs_eigenvalue': gap.min_abs_eigenvalue,
                'gap_holds': gap.holds,
            })
            if self.eps_P > threshold and not checks['charge_saturated']:
                self.logger.warning(
                    f"{self}:  Final charge {state.charge:.12g} differs from q = {params.q}")
        else:
            self.logger.warning(f"{self}:  kappa = {check.kappa:.6g} >= 1: bounds not checked")

        return checks



def solve_penalized(params, config=None, eps_P=None, basis=None, kgrid=None, kmax=1,
                    kgrid_n=2, kgrid_shifted=True, initial=None, **solver_kwargs):
    """
    Solve the penalized problem and return (final ScfState, EnergyBreakdown).

    Arguments:
        - params: CrystalParams
        - config: ScfConfig
        - eps_P: penalty parameter; defaults to 1.05 (1 - kappa)^-1 c*(q+1)
        - basis, kgrid: discretization (built from kmax / kgrid_n / kgrid_shifted if not given)
        - initial: starting BlochDensityMatrix (default: aufbau of D^0 - alpha z G)
        - solver_kwargs: forwarded to ScfSolver (name, observers, bridge, channel)
    """
    if eps_P is None:
        eps_P = auto_eps_P(params)

    basis = basis or build_basis(kmax)
    kgrid = kgrid or build_kgrid(params.ell, kgrid_n, kgrid_shifted)
    solver = ScfSolver(params, basis, kgrid, eps_P, config=config, **solver_kwargs)
    state = solver.solve(initial)
    return state, state.energy
