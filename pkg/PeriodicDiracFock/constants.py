"""
Explicit constants of the periodic Dirac-Fock existence theory and the
feasibility check built on them.

Everything here is a pure function of (ell, z, q, alpha). The values follow
the closed formulas; where those formulas are minimized over a radius R or
an integer split m, the minimization is done numerically.
"""
import itertools
import numpy as np
import scipy.integrate
import scipy.optimize

from dataclasses import asdict, dataclass, field
from functools import lru_cache

from .errors import ModelFailureError, NumericError, ValidationError


DEFAULT_SPLITS = tuple(range(2, 9))

# Bracket for the minimizations over R
RADIUS_BRACKET = (1e-3, 0.5 - 1e-6)
RADIUS_TOL = 1e-6

GAUSS_NODES = 64



def partial_sum_inv4(n):
    """
    Returns sum_{0 < |k|_inf <= n} 1/|k|^4.

    Arguments:
        - n: shell index, n >= 0
    """
    if n < 0:
        raise ValidationError(f"Shell index must be non-negative, got {n}")
    r = np.arange(-n, n + 1, dtype=float)
    plane = r[:, None]**2 + r[None, :]**2

    total = 0.0
    for k3 in range(0, n + 1):
        d = plane + k3**2
        if k3 == 0:
            d = np.where(d > 0, d, np.inf)
        total += (1.0 if k3 == 0 else 2.0) * float(np.sum(1.0 / d**2))
    return total


@lru_cache(maxsize=None)
def _face_integral(power, nodes=GAUSS_NODES):
    """
    Returns 6 * integral over [-1, 1]^2 of (1 + a^2 + b^2)^{-power}.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = np.meshgrid(x, x, indexing='ij')
    return 6.0 * float(np.sum(np.outer(w, w) * (1 + a**2 + b**2)**(-power)))


@lru_cache(maxsize=None)
def lattice_sum_inv4(tol=1e-6, m=1):
    """
    Returns sum over |k|_inf >= m of 1/|k|^4 (all of Z^3 \\ {0} for m = 1).

    Shells up to n are summed exactly; the remainder is the integral of
    |x|^-4 outside the cube |x|_inf <= n + 1/2, which is J / (n + 1/2) with
    J = 6 * integral over [-1, 1]^2 of (1 + a^2 + b^2)^-2. The remainder's own
    error decays like n^-3, so n is chosen from tol accordingly.

    Arguments:
        - tol: target accuracy, tol > 0
        - m: first shell kept, m >= 1
    """
    if not tol > 0:
        raise ValidationError(f"Tolerance must be positive, got {tol}")
    if m < 1:
        raise ValidationError(f"First shell must be >= 1, got {m}")

    n = int(np.clip(np.ceil((1.0 / (3 * tol))**(1 / 3)), 16, 400))
    n = max(n, m)
    total = partial_sum_inv4(n) + _face_integral(2) / (n + 0.5)
    return total - partial_sum_inv4(m - 1)


def _spherical_inner(phi, s):
    """
    Integral over the polar angle of rho(theta, phi)^{3-s} / (3-s) sin(theta),
    rho being the distance from the origin to the boundary of [-1, 1]^3.
    """
    theta_star = np.arctan(1.0 / np.cos(phi))
    if s == 2:
        return -np.log(np.cos(theta_star)) + (0.5 * np.pi - theta_star) / np.cos(phi)

    e = 3.0 - s
    top, _ = scipy.integrate.quad(lambda t: np.sin(t) / np.cos(t)**e, 0.0, theta_star)
    side, _ = scipy.integrate.quad(
        lambda t: np.sin(t) / (np.sin(t) * np.cos(phi))**e, theta_star, 0.5 * np.pi)
    return (top + side) / e


@lru_cache(maxsize=None)
def cube_power_integral(s, method='product'):
    """
    Returns the integral of |x|^{-s} over [-1, 1]^3, for 0 <= s < 3.

    Two independent schemes:
        - 'product': radial integration done in closed form on every face,
            6/(3-s) * int_{[-1,1]^2} (1+a^2+b^2)^{-s/2}, by tensor Gauss-Legendre
        - 'spherical': integration in spherical coordinates over 1/48 of the
            cube, split where the ray leaves through the top face instead of a side
    """
    if not 0 <= s < 3:
        raise ValidationError(f"Exponent must satisfy 0 <= s < 3, got {s}")

    if method == 'product':
        return _face_integral(0.5 * s) / (3.0 - s)

    if method == 'spherical':
        value, err = scipy.integrate.quad(_spherical_inner, 0.0, 0.25 * np.pi, args=(s,))
        value *= 16.0
        if not np.isfinite(value) or 16.0 * err > 1e-6 * abs(value):
            raise NumericError(f"Spherical quadrature of |x|^-{s} did not converge (error {err:.2e})")
        return value

    raise ValidationError(f"Unknown quadrature method '{method}'")


def cube_inverse_square_integral(method='product'):
    """
    Returns I = integral of 1/|x|^2 over [-1, 1]^3 (about 15.348).
    """
    return cube_power_integral(2.0, method)


def _pyramid_radial(s, t):
    # integral over r in [0, 1] of (1 - r)(1 - r s)(1 - r t)
    return 0.5 - (s + t) / 6.0 + s * t / 12.0


@lru_cache(maxsize=None)
def zone_inverse_square_average(nodes=GAUSS_NODES):
    """
    Returns D = mean of 1/|x - y|^2 over x, y in [-1, 1]^3 (about 1.409).

    D = 2 * integral over [0, 1]^3 of prod(1 - v_i) / |v|^2. Each of the three
    pyramids of [0, 1]^3 with apex at 0 is parametrized as v = r (1, s, t), so
    the radial integral is a polynomial in (s, t) and the remaining face
    integral is smooth and done by tensor Gauss-Legendre.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    s, t = np.meshgrid(x, x, indexing='ij')
    face = np.outer(w, w) * _pyramid_radial(s, t) / (1.0 + s**2 + t**2)
    return 6.0 * float(np.sum(face))



def _radius_tail(R, lattice_sum):
    volume = 4 * np.pi * R**3 / 3
    return (3 / (4 * np.pi**2 * R**3)) * min(np.sqrt(volume), np.sqrt(max(1 - volume, 0.0))) * np.sqrt(lattice_sum)


def c0_objective(R, lattice_sum=None):
    """
    The bound on sup |G_1(x) - 1/|x|| for a splitting radius 0 < R < 1/2.
    """
    if lattice_sum is None:
        lattice_sum = lattice_sum_inv4()
    return 3 / (2 * R) + 2 * np.pi * R**2 / 5 + _radius_tail(R, lattice_sum)


def _minimize_radius(objective):
    """
    Minimize a function of R over RADIUS_BRACKET: a dense scan locates the
    basin (the min{.,.} factor makes the objective non-smooth), then a bounded
    scalar search refines it. Returns (value, argmin).
    """
    lo, hi = RADIUS_BRACKET
    grid = np.linspace(lo, hi, 2001)
    values = np.array([objective(R) for R in grid])
    i = int(np.argmin(values))

    left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best_R, best = grid[i], values[i]
    if right > left:
        result = scipy.optimize.minimize_scalar(
            objective, bounds=(left, right), method='bounded', options={'xatol': RADIUS_TOL})
        if result.success and result.fun < best:
            best_R, best = float(result.x), float(result.fun)
    return float(best), float(best_R)


@lru_cache(maxsize=None)
def c0_bound():
    """
    Returns (C0, R) minimizing the bound on the regular part of the periodic
    Coulomb potential at ell = 1. The infimum sits at the edge R -> 1/2.
    """
    lattice_sum = lattice_sum_inv4()
    return _minimize_radius(lambda R: c0_objective(R, lattice_sum))


def cg_constant(ell):
    """
    Returns C_G = 2 (1 + C0/ell) max(sqrt(1 + 3/ell), sqrt(3/ell + 6/ell^2)).
    C_H is taken equal to C_G.
    """
    if not ell > 0:
        raise ValidationError(f"Cell length must be positive, got ell={ell}")
    c0, _ = c0_bound()
    return 2 * (1 + c0 / ell) * max(np.sqrt(1 + 3 / ell), np.sqrt(3 / ell + 6 / ell**2))


def c_ge_m_objective(R, m, tail_sum=None, lattice_sum=None):
    if tail_sum is None:
        tail_sum = lattice_sum_inv4(m=m)
    if lattice_sum is None:
        lattice_sum = lattice_sum_inv4()
    first = (np.sqrt(3) / (2 * (np.pi * R)**1.5)) * (m**2 + 2) / (m - 1)**2 * np.sqrt(tail_sum)
    second = 2 * np.pi * ((2 * m - 1)**3 + 1) * R**2 / 5
    return first + second + _radius_tail(R, lattice_sum)


@lru_cache(maxsize=None)
def c_ge_m_bound(m):
    """
    Returns the bound C_{>=m} on sup |W_{>=m} - G| (times ell), minimized over R.

    Arguments:
        - m: split index, m >= 2
    """
    if int(m) != m or m < 2:
        raise ValidationError(f"Split index must be an integer >= 2, got {m}")
    m = int(m)
    tail_sum, lattice_sum = lattice_sum_inv4(m=m), lattice_sum_inv4()
    value, _ = _minimize_radius(lambda R: c_ge_m_objective(R, m, tail_sum, lattice_sum))
    return value


def c_le_m_ell(m, ell):
    """
    Returns C_{<=m,ell} = (2m - 1) I / (2 pi ell), I the [-1, 1]^3 integral of 1/|x|^2.
    """
    if m < 2 or not ell > 0:
        raise ValidationError(f"Need m >= 2 and ell > 0, got m={m}, ell={ell}")
    return (2 * m - 1) * cube_inverse_square_integral() / (2 * np.pi * ell)


def c_le_m_ell_prime(m, ell):
    """
    Returns C'_{<=m,ell} = 2^{3/4} (2m - 1) I'^{3/4} / (2 pi ell), with I' the
    [-1, 1]^3 integral of |x|^{-8/3}. It bounds the short-range exchange by
    ||gamma||_{S1,inf}^{3/4} ||gamma||_{S1,1}^{1/4}.
    """
    if m < 2 or not ell > 0:
        raise ValidationError(f"Need m >= 2 and ell > 0, got m={m}, ell={ell}")
    return 2**0.75 * (2 * m - 1) * cube_power_integral(8 / 3)**0.75 / (2 * np.pi * ell)



@dataclass(frozen=True)
class ExchangeConstants:
    """
    Bounds of the exchange operator at a given ell.

    Attributes:
        - ell: cell edge length
        - m_best, m_best_prime: split indices realizing C_ell and C_ell'
        - C_ell_m2: the m = 2 value of C_ell
        - C_ell, C_ell_prime: infima over the searched splits
        - C_W, C_W_prime, C_W_dblprime: operator bounds
        - C_EE, C_EE_prime, C_EE_dblprime: energy bounds
    """

    ell: float
    m_best: int
    m_best_prime: int
    C_ell_m2: float
    C_ell: float
    C_ell_prime: float
    C_W: float
    C_W_prime: float
    C_W_dblprime: float
    C_EE: float
    C_EE_prime: float
    C_EE_dblprime: float



def ee_constants(ell, splits=DEFAULT_SPLITS):
    """
    Returns the ExchangeConstants at ell, with C_ell and C_ell' minimized over `splits`.
    """
    if not ell > 0:
        raise ValidationError(f"Cell length must be positive, got ell={ell}")
    splits = tuple(splits)
    if not splits or min(splits) < 2:
        raise ValidationError(f"Split indices must be >= 2, got {splits}")

    c_g = cg_constant(ell)
    c_h = c_g
    c0, _ = c0_bound()

    c_ell = {m: c_ge_m_bound(m) / ell + c_le_m_ell(m, ell) for m in splits}
    c_ell_prime = {m: c_ge_m_bound(m) / ell + c_le_m_ell_prime(m, ell) for m in splits}
    m_best = min(c_ell, key=c_ell.get)
    m_best_prime = min(c_ell_prime, key=c_ell_prime.get)
    C_ell, C_ell_prime = c_ell[m_best], c_ell_prime[m_best_prime]

    return ExchangeConstants(
        ell=float(ell),
        m_best=m_best,
        m_best_prime=m_best_prime,
        C_ell_m2=c_ge_m_bound(2) / ell + c_le_m_ell(2, ell),
        C_ell=C_ell,
        C_ell_prime=C_ell_prime,
        C_W=c_h + C_ell,
        C_W_prime=c_g + C_ell,
        C_W_dblprime=c_h + C_ell_prime,
        C_EE=c_h + C_ell,
        C_EE_prime=c_g + C_ell,
        C_EE_dblprime=2 * c0 / ell + C_ell,
    )



def c_star_upper(k, ell):
    """
    Returns the closed-form upper bound sqrt(1 + 4 pi^2 (k+1)^2 / ell^2) on c*(k).
    """
    if k < 1 or not ell > 0:
        raise ValidationError(f"Need k >= 1 and ell > 0, got k={k}, ell={ell}")
    return float(np.sqrt(1 + 4 * np.pi**2 * (k + 1)**2 / ell**2))


def free_band_edges(xi, ell, count):
    """
    Returns the `count` smallest positive eigenvalues of the free D_xi on the
    full (untruncated) lattice, with multiplicity.
    """
    xi = np.asarray(xi, dtype=float)
    shift = xi * ell / (2 * np.pi)
    needed = (count + 1) // 2

    P = int(np.ceil((3 * needed / (4 * np.pi))**(1 / 3))) + 2
    while True:
        r = np.arange(-P, P + 1)
        p = np.array(list(itertools.product(r, r, r)), dtype=float)
        radius = np.sort(np.linalg.norm(p + shift[None, :], axis=1))[:needed]
        # the cube |p|_inf <= P holds every lattice point within P - 1/2 of -shift
        if radius[-1] < P - 0.5:
            break
        P *= 2

    energies = np.sqrt(1 + (2 * np.pi / ell)**2 * radius**2)
    return np.repeat(energies, 2)[:count]


def _reduced_zone(ell, samples):
    axis = np.linspace(0.0, np.pi / ell, max(int(samples), 1))
    return np.array(list(itertools.product(axis, axis, axis)))


def c_star_lower(k, ell, samples=5):
    """
    Returns c_*(k) = inf over xi of the k-th free positive eigenvalue, sampled
    over the reduced zone [0, pi/ell]^3.
    """
    return float(min(free_band_edges(xi, ell, k)[-1] for xi in _reduced_zone(ell, samples)))


def c_star_sampled(k, ell, samples=5):
    """
    Returns c*(k) = sup over xi of the k-th free positive eigenvalue, sampled
    over the reduced zone [0, pi/ell]^3.
    """
    return float(max(free_band_edges(xi, ell, k)[-1] for xi in _reduced_zone(ell, samples)))


def free_level_count(xi, ell, energy):
    """
    Returns the number of free positive eigenvalues of D_xi in [0, energy],
    with multiplicity, counting lattice points column by column.
    """
    if energy < 1:
        return 0
    c = np.asarray(xi, dtype=float) * ell / (2 * np.pi)
    radius2 = (energy**2 - 1) * (ell / (2 * np.pi))**2
    radius = np.sqrt(radius2)

    r1 = np.arange(np.floor(-c[0] - radius), np.ceil(-c[0] + radius) + 1)
    r2 = np.arange(np.floor(-c[1] - radius), np.ceil(-c[1] + radius) + 1)
    rest = radius2 - (r1[:, None] + c[0])**2 - (r2[None, :] + c[1])**2
    ok = rest >= 0
    half = np.sqrt(np.where(ok, rest, 0.0))
    column = np.floor(-c[2] + half) - np.ceil(-c[2] - half) + 1
    return 2 * int(np.sum(np.where(ok, np.maximum(column, 0), 0), dtype=np.int64))



@dataclass(frozen=True)
class AssumptionCheck:
    """
    Evaluation of the two smallness conditions of the existence theory.

    kappa, lambda0 and A are None when the model is infeasible (kappa >= 1
    or lambda0 <= 0). The penalized fields are set only when eps_P is given.

    Attributes:
        - kappa, lambda0, A: coupling parameter, spectral gap bound, contraction prefactor
        - cond1, cond2: values that must both be < 1
        - cond1_holds, cond2_holds: verdicts
        - feasible: kappa < 1 and lambda0 > 0
        - eps_P: penalty parameter the penalized condition was evaluated at
        - eps_P_threshold: (1 - kappa)^-1 c*(q+1), the penalty saturation level
        - cond2_penalized, cond2_penalized_holds: second condition with eps_P
    """

    kappa: float
    lambda0: float
    A: float
    cond1: float
    cond2: float
    cond1_holds: bool
    cond2_holds: bool
    feasible: bool
    eps_P: float = None
    eps_P_threshold: float = None
    cond2_penalized: float = None
    cond2_penalized_holds: bool = None


    @property
    def holds(self):
        return bool(self.feasible and self.cond1_holds and self.cond2_holds)



def kappa(params, ee=None):
    """
    Returns kappa = alpha (C_G z + C_EE' q+).
    """
    ee = ee or ee_constants(params.ell)
    return params.alpha * (cg_constant(params.ell) * params.z + ee.C_EE_prime * params.q_plus)


def lambda0(params, ee=None):
    """
    Returns the lower bound 1 - alpha max(C_H z + C_EE'' q+, C0 z/ell + C_EE q+)
    on |D_gamma| for gamma in the charge-constrained set.
    """
    ee = ee or ee_constants(params.ell)
    c_h = cg_constant(params.ell)
    c0, _ = c0_bound()
    return 1 - params.alpha * max(
        c_h * params.z + ee.C_EE_dblprime * params.q_plus,
        c0 * params.z / params.ell + ee.C_EE * params.q_plus)


def check_assumption(params, eps_P=None, ee=None):
    """
    Evaluate the smallness conditions for the given crystal.

        kappa  = alpha (C_G z + C_EE' q+)
        A      = (alpha/2) C_EE (1 - kappa)^-1/2 lambda0^-1/2
        cond1  = kappa + (alpha/2) C_EE q+
        cond2  = 2A sqrt(max((1 - cond1)^-1 (1 - kappa)^-1 c*(q+1) q, 1) q+)

    With eps_P given, the penalized second condition replaces
    (1 - kappa)^-1 c*(q+1) by eps_P.

    Arguments:
        - params: CrystalParams
        - eps_P: penalty parameter (optional)
        - ee: precomputed ExchangeConstants (optional)
    """
    ee = ee or ee_constants(params.ell)
    q, q_plus, alpha = params.q, params.q_plus, params.alpha

    k = kappa(params, ee)
    lam0 = lambda0(params, ee)
    cond1 = k + 0.5 * alpha * ee.C_EE * q_plus

    if k >= 1 or lam0 <= 0:
        return AssumptionCheck(
            kappa=k, lambda0=None, A=None, cond1=cond1, cond2=None,
            cond1_holds=False, cond2_holds=False, feasible=False, eps_P=eps_P)

    A = 0.5 * alpha * ee.C_EE / np.sqrt(1 - k) / np.sqrt(lam0)
    threshold = c_star_upper(q + 1, params.ell) / (1 - k)

    def second(level):
        if cond1 >= 1:
            return np.inf
        return 2 * A * np.sqrt(max(level * q / (1 - cond1), 1.0) * q_plus)

    cond2 = second(threshold)
    penalized = second(eps_P) if eps_P is not None else None
    return AssumptionCheck(
        kappa=float(k), lambda0=float(lam0), A=float(A),
        cond1=float(cond1), cond2=float(cond2),
        cond1_holds=bool(cond1 < 1), cond2_holds=bool(cond2 < 1), feasible=True,
        eps_P=eps_P, eps_P_threshold=float(threshold),
        cond2_penalized=None if penalized is None else float(penalized),
        cond2_penalized_holds=None if penalized is None else bool(penalized < 1),
    )


def sweep_assumption(q_values, ell=1000.0, alpha=1 / 137):
    """
    Returns [(q, AssumptionCheck)] for neutral crystals z = q.
    """
    from .lattice import CrystalParams

    ee = ee_constants(ell)
    return [(q, check_assumption(CrystalParams(ell=ell, z=q, q=q, alpha=alpha), ee=ee)) for q in q_values]


def rank_margin(params, samples=5, ee=None):
    """
    Returns M such that every D_gamma_xi has at most q + M eigenvalues in
    [0, e], e = (1 - kappa)^-1 c*(q+1).

    The k-th positive eigenvalue is at least (1 - kappa) c_*(k), so the count
    is bounded by the largest number of free levels below e / (1 - kappa).
    The free counts are sampled on the same reduced-zone grid as c_*, which
    holds the zone centre, the face centres and the corner.
    """
    k = kappa(params, ee)
    if k >= 1:
        raise ModelFailureError(f"kappa = {k:.6g} >= 1, no band count bound exists")
    e = c_star_upper(params.q + 1, params.ell) / (1 - k)
    levels = max(free_level_count(xi, params.ell, e / (1 - k)) for xi in _reduced_zone(params.ell, samples))
    return int(max(2, levels - int(np.floor(params.q)) + 1))



@dataclass(frozen=True)
class AdmissibleSet:
    """
    Parameters of the admissible set of the retraction.

    Attributes:
        - A: contraction prefactor
        - tau: radius, the midpoint of (1, 1/(2A))
        - weight: M = max((2 + A q+)/2, 1/(1 - 2 A tau))
        - contraction: the Lipschitz bound k = 2 A tau < 1
    """

    A: float
    tau: float
    weight: float
    contraction: float



def admissible_set(params, check=None):
    """
    Returns the AdmissibleSet for params; raises ModelFailureError when no
    radius tau in (1, 1/(2A)) exists.
    """
    check = check or check_assumption(params)
    if not check.feasible:
        raise ModelFailureError(f"kappa = {check.kappa:.6g}: model is outside its regime")
    if 2 * check.A >= 1:
        raise ModelFailureError(f"A = {check.A:.6g} >= 1/2: the retraction has no admissible radius")

    if check.A == 0:
        return AdmissibleSet(A=0.0, tau=np.inf, weight=1.0, contraction=0.0)

    tau = 0.5 * (1 + 1 / (2 * check.A))
    contraction = 2 * check.A * tau
    weight = max((2 + check.A * params.q_plus) / 2, 1 / (1 - contraction))
    return AdmissibleSet(A=check.A, tau=tau, weight=weight, contraction=contraction)



@dataclass(frozen=True)
class ConstantsReport:
    """
    Every constant entering the existence theory at one parameter set.
    """

    ell: float
    z: float
    q: float
    alpha: float
    lattice_sum_k4: float
    C0: float
    C0_radius: float
    C_H: float
    C_G: float
    C_ge_m: dict
    C_le_m_ell: dict
    exchange: ExchangeConstants
    check: AssumptionCheck
    c_star_upper: dict = field(default_factory=dict)
    rank_margin: int = None
    admissible: AdmissibleSet = None


    @property
    def assumption_holds(self):
        return (self.check.cond1_holds, self.check.cond2_holds)


    def to_dict(self):
        d = asdict(self)
        d['assumption_holds'] = list(self.assumption_holds)
        return d


    def table(self):
        """
        Returns a human-readable two-column table with 6 significant digits.
        """
        def fmt(value):
            if value is None:
                return '-'
            if isinstance(value, (bool, np.bool_)):
                return 'yes' if value else 'no'
            if isinstance(value, (int, np.integer)):
                return str(value)
            return f"{value:.6g}"

        ee, check = self.exchange, self.check
        rows = [
            ('ell', self.ell), ('z', self.z), ('q', self.q), ('alpha', self.alpha),
            ('sum |k|^-4', self.lattice_sum_k4),
            ('C0', self.C0), ('C0 radius', self.C0_radius),
            ('C_H', self.C_H), ('C_G', self.C_G),
        ]
        rows += [(f'C_>={m}', v) for m, v in self.C_ge_m.items()]
        rows += [(f'C_<={m},ell', v) for m, v in self.C_le_m_ell.items()]
        rows += [
            ('C_ell (m=2)', ee.C_ell_m2), ('C_ell', ee.C_ell), ("C_ell'", ee.C_ell_prime),
            ('C_W', ee.C_W), ("C_W'", ee.C_W_prime), ("C_W''", ee.C_W_dblprime),
            ('C_EE', ee.C_EE), ("C_EE'", ee.C_EE_prime), ("C_EE''", ee.C_EE_dblprime),
            ('kappa', check.kappa), ('lambda0', check.lambda0), ('A', check.A),
        ]
        rows += [(f'c*({k}) <=', v) for k, v in self.c_star_upper.items()]
        rows += [
            ('cond1', check.cond1), ('cond1 < 1', check.cond1_holds),
            ('cond2', check.cond2), ('cond2 < 1', check.cond2_holds),
        ]
        if check.eps_P is not None:
            rows += [('eps_P', check.eps_P), ('cond2 (eps_P)', check.cond2_penalized)]
        if self.rank_margin is not None:
            rows.append(('rank margin M', self.rank_margin))
        if self.admissible is not None:
            rows += [('tau', self.admissible.tau), ('k = 2 A tau', self.admissible.contraction)]

        width = max(len(name) for name, _ in rows)
        return '\n'.join(f"{name:<{width}}  {fmt(value)}" for name, value in rows)



def constants_report(params, eps_P=None, splits=DEFAULT_SPLITS, with_rank_margin=True):
    """
    Compute every constant for params and evaluate the assumption.

    Arguments:
        - params: CrystalParams
        - eps_P: penalty parameter for the penalized condition (optional)
        - splits: split indices m searched for C_ell
        - with_rank_margin: also count levels for the rank margin M
    """
    ell = params.ell
    c0, radius = c0_bound()
    c_g = cg_constant(ell)
    ee = ee_constants(ell, splits)
    check = check_assumption(params, eps_P, ee)

    n_star = int(np.ceil(params.q)) + 1
    stars = {k: c_star_upper(k, ell) for k in range(1, n_star + 1)}

    margin, admissible = None, None
    if check.feasible:
        if with_rank_margin:
            margin = rank_margin(params, ee=ee)
        if 2 * check.A < 1:
            admissible = admissible_set(params, check)

    return ConstantsReport(
        ell=ell, z=params.z, q=params.q, alpha=params.alpha,
        lattice_sum_k4=lattice_sum_inv4(),
        C0=c0, C0_radius=radius, C_H=c_g, C_G=c_g,
        C_ge_m={m: c_ge_m_bound(m) for m in splits},
        C_le_m_ell={m: c_le_m_ell(m, ell) for m in splits},
        exchange=ee, check=check, c_star_upper=stars,
        rank_margin=margin, admissible=admissible,
    )



def hardy_coefficients(ell, proof=False):
    """
    Returns (a, b) of the cube Hardy inequality. The statement gives
    ((4 ell + 24)/ell, (48 + 24 ell)/ell^2); the last line of its proof gives
    ((4 ell + 12)/ell, (24 + 12 ell)/ell^2).
    """
    if proof:
        return (4 * ell + 12) / ell, (24 + 12 * ell) / ell**2
    return (4 * ell + 24) / ell, (48 + 24 * ell) / ell**2



@dataclass(frozen=True)
class HardyReport:
    """
    Worst LHS/RHS ratios of the cube Hardy inequality over random trials.

    Attributes:
        - ell: cell edge length
        - trials: number of trial functions
        - worst_ratio: worst ratio with the stated coefficients
        - worst_ratio_proof: worst ratio with the coefficients of the proof
        - holds: worst_ratio <= 1
        - note: description of the coefficient discrepancy
    """

    ell: float
    trials: int
    worst_ratio: float
    worst_ratio_proof: float
    holds: bool
    note: str



def hardy_terms(coefficients, ell, nodes=40):
    """
    Returns (||u/|x|||^2, ||grad u||^2, ||u||^2) over Q_ell for the
    trigonometric polynomial u(x) = sum_k c_k e^{2 i pi k.x / ell}.

    The weighted norm uses the map x = t y, y on the cube faces, under which
    dx / |x|^2 = (ell/2) dA dt / |y|^2, so no singular integrand remains.

    Arguments:
        - coefficients: (2P+1, 2P+1, 2P+1) complex array indexed by k + P
        - ell: cell edge length
        - nodes: Gauss-Legendre nodes per direction
    """
    c = np.asarray(coefficients, dtype=complex)
    P = (c.shape[0] - 1) // 2
    k = np.arange(-P, P + 1)

    # Parseval
    k2 = k[:, None, None]**2 + k[None, :, None]**2 + k[None, None, :]**2
    norm2 = ell**3 * float(np.sum(np.abs(c)**2))
    grad2 = ell**3 * float(np.sum((2 * np.pi / ell)**2 * k2 * np.abs(c)**2))

    x, w = np.polynomial.legendre.leggauss(nodes)
    t, wt = 0.5 * (x + 1), 0.5 * w
    a, wa = 0.5 * ell * x, 0.5 * ell * w
    h = 0.5 * ell

    face = 1.0 / (h**2 + a[:, None]**2 + a[None, :]**2)
    weights = wt[:, None, None] * (wa[:, None] * wa[None, :])[None, :, :] * face[None, :, :]

    # phase[t, a, k] = exp(2 i pi k t a / ell)
    phase = np.exp(2j * np.pi * np.einsum('t,a,k->tak', t, a, k) / ell)
    lhs = 0.0
    for axis in range(3):
        for sign in (-1.0, 1.0):
            edge = np.exp(2j * np.pi * sign * h * np.outer(t, k) / ell)
            moved = np.moveaxis(c, axis, 2)
            values = np.einsum('ijk,tai,tbj,tk->tab', moved, phase, phase, edge, optimize=True)
            lhs += h * float(np.sum(weights * np.abs(values)**2))
    return lhs, grad2, norm2


def hardy_cube_validate(ell, trial_count=100, modes=2, seed=0, nodes=40):
    """
    Check ||u/|x|||^2 <= a ||grad u||^2 + b ||u||^2 on Q_ell over random
    trigonometric trial functions, for both coefficient sets (a, b).

    The first trial is the constant function.

    Arguments:
        - ell: cell edge length
        - trial_count: number of trials, >= 1
        - modes: Fourier cutoff |k|_inf <= modes of the trials
        - seed: random seed
        - nodes: quadrature nodes per direction
    """
    if trial_count < 1:
        raise ValidationError(f"Need at least one trial, got {trial_count}")

    rng = np.random.default_rng(seed)
    side = 2 * modes + 1
    k = np.arange(-modes, modes + 1)
    decay = 1.0 / (1 + k[:, None, None]**2 + k[None, :, None]**2 + k[None, None, :]**2)

    a_s, b_s = hardy_coefficients(ell)
    a_p, b_p = hardy_coefficients(ell, proof=True)
    worst, worst_proof = 0.0, 0.0
    for n in range(trial_count):
        if n == 0:
            c = np.zeros((side,) * 3, dtype=complex)
            c[modes, modes, modes] = 1.0
        else:
            c = (rng.standard_normal((side,) * 3) + 1j * rng.standard_normal((side,) * 3)) * decay

        lhs, grad2, norm2 = hardy_terms(c, ell, nodes)
        if not np.isfinite(lhs):
            raise NumericError(f"Hardy quadrature produced {lhs} for trial {n}")
        worst = max(worst, lhs / (a_s * grad2 + b_s * norm2))
        worst_proof = max(worst_proof, lhs / (a_p * grad2 + b_p * norm2))

    note = (f"stated coefficients ({a_s:.6g}, {b_s:.6g}) vs proof coefficients "
            f"({a_p:.6g}, {b_p:.6g}); worst ratios {worst:.6g} and {worst_proof:.6g}")
    return HardyReport(
        ell=float(ell), trials=int(trial_count), worst_ratio=float(worst),
        worst_ratio_proof=float(worst_proof), holds=bool(worst <= 1), note=note)
