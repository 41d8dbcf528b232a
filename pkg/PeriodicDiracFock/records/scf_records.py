from .base import Record



class IterationRecord(Record):
    """
    Progress of one SCF iteration.

    Attributes:
        - iter: iteration number, starting at 1
        - E_total: Dirac-Fock energy of the iterate
        - E_pen: penalized energy E_total - eps_P * charge
        - residual: S11 distance between the iterate and the aufbau state of its operator
        - delta_E: change of the penalized energy since the previous iteration
        - nu: Fermi level of the aufbau step
        - charge: trace per unit cell of the iterate
    """

    PROPERTIES = [*Record.PROPERTIES, 'iter', 'E_total', 'E_pen', 'residual', 'delta_E', 'nu', 'charge']


    def __init__(self, run, iter, E_total, E_pen, residual, delta_E, nu, charge):
        super().__init__(run)
        self.iter = int(iter)
        self.E_total = float(E_total)
        self.E_pen = float(E_pen)
        self.residual = float(residual)
        self.delta_E = float(delta_E)
        self.nu = float(nu)
        self.charge = float(charge)


    def log_entry(self):
        """
        Returns the fields written to the iteration log.
        """
        return {key: getattr(self, key) for key in ['iter', 'E_total', 'E_pen', 'residual', 'nu', 'charge']}



class RetractionRecord(Record):
    """
    Outcome of one retraction.

    Attributes:
        - iter: SCF iteration the retraction was applied at
        - steps: number of T applications that moved the state
        - final_residual: distance between the last two states
        - ratios: measured contraction ratios
        - bound: theoretical contraction bound 2 A tau (None if unavailable)
        - admissible: whether the input passed the admissible-set test (None if not tested)
    """

    PROPERTIES = [*Record.PROPERTIES, 'iter', 'steps', 'final_residual', 'ratios', 'bound', 'admissible']


    def __init__(self, run, iter, steps, final_residual, ratios, bound=None, admissible=None):
        super().__init__(run)
        self.iter = int(iter)
        self.steps = int(steps)
        self.final_residual = float(final_residual)
        self.ratios = [float(r) for r in ratios]
        self.bound = None if bound is None else float(bound)
        self.admissible = admissible



class ConvergenceRecord(Record):
    """
    Summary of a finished SCF run.

    Attributes:
        - converged: whether both stopping criteria were met
        - iterations: number of iterations done
        - energy: EnergyBreakdown as a dictionary
        - charge: trace per unit cell of the final state
        - nu: final Fermi level
        - checks: dictionary of final-state checks
    """

    PROPERTIES = [*Record.PROPERTIES, 'converged', 'iterations', 'energy', 'charge', 'nu', 'checks']


    def __init__(self, run, converged, iterations, energy, charge, nu, checks):
        super().__init__(run)
        self.converged = bool(converged)
        self.iterations = int(iterations)
        self.energy = dict(energy)
        self.charge = float(charge)
        self.nu = float(nu)
        self.checks = dict(checks)
