"""
Error kinds raised by the solver.

Each one also derives from the closest builtin exception, so callers that
only know about `ValueError` / `RuntimeError` keep working.
"""



class DiracFockError(Exception):
    """
    Base class for every error raised by PeriodicDiracFock.
    """



class ValidationError(DiracFockError, ValueError):
    """
    An input violates a documented invariant (non-Hermitian fiber,
    occupation outside [0, 1], charge above q, ...).
    """



class ConfigError(DiracFockError, ValueError):
    """
    A configuration file, key or option value cannot be used.

    Attributes:
        - line: 1-based line number in the config file, if known
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line



class SpectralAmbiguityError(DiracFockError, ArithmeticError):
    """
    An eigenvalue lies within the degeneracy tolerance of a spectral
    projector endpoint, so the projector is not well defined.

    Attributes:
        - eigenvalue: the offending eigenvalue
    """

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue



class NumericError(DiracFockError, ArithmeticError):
    """
    Eigensolver or quadrature failure.
    """



class ModelFailureError(DiracFockError, RuntimeError):
    """
    The model is outside its regime: no positive spectrum to fill,
    or kappa >= 1 where a bound needs it.
    """



class NonConvergenceError(DiracFockError, RuntimeError):
    """
    An iteration (SCF loop or retraction) exhausted its iteration budget.

    Attributes:
        - state: last iterate / solver state, if any
        - report: diagnostic report, if any
        - history: list of per-iteration records, if any
    """

    def __init__(self, message, state=None, report=None, history=None):
        super().__init__(message)
        self.state = state
        self.report = report
        self.history = history or []



class ResourceError(DiracFockError, MemoryError):
    """
    A requested discretization exceeds the configured memory budget.
    """



class DataMismatchError(DiracFockError, ValueError):
    """
    A checkpoint does not match the basis, grid or crystal it is used with.
    """
