"""
Run configuration and its flat key/value file format.

A configuration file is a list of `key = value` lines. Everything after `#`
is a comment and blank lines are ignored. Keys are case-sensitive; each may
appear once. Only `ell`, `z` and `q` are required:

    # z = q = 2 desk run
    ell = 10
    z = 2
    q = 2
    kmax = 2
    kgrid_n = 2
    kgrid_shifted = true
    eps_P = auto
    exchange_scheme = probe-correction
    iteration_log = run.log
"""
import re

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, ModelFailureError, ValidationError
from .lattice import DEFAULT_ALPHA, CrystalParams
from .meanfield import DEFAULT_SCHEME, SCHEMES


MIXING_SCHEMES = ('linear', 'anderson')

_KEY_PATTERN = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$')
_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}



@dataclass(frozen=True)
class ScfConfig:
    """
    Numerical settings of the SCF loop.

    Attributes:
        - tol_scf: stop when ||gamma - aufbau(D_gamma)||_S11 drops below this
        - tol_E: ... and the penalized energy changes by less than this
        - max_iter: iteration cap
        - mixing: 'linear' or 'anderson'
        - mixing_beta: weight of the new state in linear mixing
        - anderson_depth: history length of Anderson extrapolation
        - retract_every: apply the retraction every n iterations (0 disables)
        - retract_tol, retract_max_iter: retraction stopping rule
        - exchange_scheme: 'omit' or 'probe-correction'
        - threads: worker threads over k-points
    """

    tol_scf: float = 1e-8
    tol_E: float = 1e-10
    max_iter: int = 100
    mixing: str = 'linear'
    mixing_beta: float = 0.3
    anderson_depth: int = 4
    retract_every: int = 1
    retract_tol: float = 1e-10
    retract_max_iter: int = 50
    exchange_scheme: str = DEFAULT_SCHEME
    threads: int = 1


    def __post_init__(self):
        for name in ('tol_scf', 'tol_E', 'retract_tol'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iter < 1 or self.retract_max_iter < 1:
            raise ConfigError("max_iter and retract_max_iter must be at least 1")
        if self.mixing not in MIXING_SCHEMES:
            raise ConfigError(f"Unknown mixing '{self.mixing}', expected one of {MIXING_SCHEMES}")
        if not 0 < self.mixing_beta <= 1:
            raise ConfigError(f"mixing_beta must lie in (0, 1], got {self.mixing_beta}")
        if self.anderson_depth < 2:
            raise ConfigError(f"anderson_depth must be at least 2, got {self.anderson_depth}")
        if self.retract_every < 0:
            raise ConfigError(f"retract_every must be non-negative, got {self.retract_every}")
        if self.exchange_scheme not in SCHEMES:
            raise ConfigError(
                f"Unknown exchange scheme '{self.exchange_scheme}', expected one of {SCHEMES}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")



@dataclass(frozen=True)
class OutputConfig:
    """
    Output paths; None disables the output.
    """

    energy_json: str = None
    iteration_log: str = None
    checkpoint: str = None



@dataclass(frozen=True)
class MonitorConfig:
    """
    Progress publishing through a ProgressBridge. Disabled unless a channel is set.
    """

    channel: str = None
    host: str = 'localhost'
    port: int = 6379
    mock: bool = False



@dataclass(frozen=True)
class RunConfig:
    """
    Everything needed to reproduce one solver run.

    Attributes:
        - params: CrystalParams
        - kmax: plane-wave cutoff |k|_inf <= kmax
        - kgrid_n: k-points per axis
        - kgrid_shifted: offset the grid by half a step
        - eps_P: penalty parameter, or 'auto' for 1.05 (1 - kappa)^-1 c*(q+1)
        - scf: ScfConfig
        - outputs: OutputConfig
        - monitor: MonitorConfig
    """

    params: CrystalParams
    kmax: int = 1
    kgrid_n: int = 2
    kgrid_shifted: bool = True
    eps_P: object = 'auto'
    scf: ScfConfig = field(default_factory=ScfConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)


    def __post_init__(self):
        if self.kmax < 0 or self.kgrid_n < 1:
            raise ConfigError(f"Need kmax >= 0 and kgrid_n >= 1, got {self.kmax}, {self.kgrid_n}")
        if self.eps_P != 'auto' and not isinstance(self.eps_P, (int, float)):
            raise ConfigError(f"eps_P must be a number or 'auto', got {self.eps_P!r}")


    def resolve_eps_P(self):
        """
        Returns the numeric penalty parameter.
        """
        if self.eps_P == 'auto':
            return auto_eps_P(self.params)
        return float(self.eps_P)



def auto_eps_P(params, factor=1.05):
    """
    Returns factor * (1 - kappa)^-1 c*(q+1), just above the level that forces
    the penalized minimizer to carry charge q.
    """
    from .constants import c_star_upper, kappa

    k = kappa(params)
    if k >= 1:
        raise ModelFailureError(f"kappa = {k:.6g} >= 1: no automatic penalty parameter exists")
    return factor * c_star_upper(params.q + 1, params.ell) / (1 - k)



def _to_bool(value):
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got '{value}'")


def _to_eps(value):
    return 'auto' if value == 'auto' else float(value)


def _to_str(value):
    if not value:
        raise ValueError("empty value")
    return value


# key -> (section, field, parser)
KEYS = {
    'ell': ('params', 'ell', float),
    'z': ('params', 'z', float),
    'q': ('params', 'q', float),
    'alpha': ('params', 'alpha', float),
    'kmax': ('run', 'kmax', int),
    'kgrid_n': ('run', 'kgrid_n', int),
    'kgrid_shifted': ('run', 'kgrid_shifted', _to_bool),
    'eps_P': ('run', 'eps_P', _to_eps),
    **{f.name: ('scf', f.name, f.type if f.type in (int, float) else _to_str)
       for f in fields(ScfConfig)},
    'energy_json': ('outputs', 'energy_json', _to_str),
    'iteration_log': ('outputs', 'iteration_log', _to_str),
    'checkpoint': ('outputs', 'checkpoint', _to_str),
    'monitor_channel': ('monitor', 'channel', _to_str),
    'redis_host': ('monitor', 'host', _to_str),
    'redis_port': ('monitor', 'port', int),
    'monitor_mock': ('monitor', 'mock', _to_bool),
}

REQUIRED = ('ell', 'z', 'q')


def parse_config(text):
    """
    Parse configuration text into a RunConfig.

    Raises ConfigError (with the offending line number when there is one)
    on malformed lines, unknown or duplicate keys, bad values and missing
    required keys.
    """
    sections = {'params': {}, 'run': {}, 'scf': {}, 'outputs': {}, 'monitor': {}}
    seen = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"Expected 'key = value', got '{raw.strip()}'", line=number)

        key, value = (part.strip() for part in line.split('=', 1))
        if not _KEY_PATTERN.match(key):
            raise ConfigError(f"Malformed key '{key}'", line=number)
        if key not in KEYS:
            raise ConfigError(f"Unknown key '{key}'", line=number)
        if key in seen:
            raise ConfigError(f"Duplicate key '{key}' (first set on line {seen[key]})", line=number)
        seen[key] = number

        section, name, parser = KEYS[key]
        try:
            sections[section][name] = parser(value)
        except ValueError as e:
            raise ConfigError(f"Bad value for '{key}': {e}", line=number) from e

    missing = [key for key in REQUIRED if key not in seen]
    if missing:
        raise ConfigError(f"Missing required keys: {', '.join(missing)}")

    try:
        params = CrystalParams(**{'alpha': DEFAULT_ALPHA, **sections['params']})
    except ValidationError as e:
        raise ConfigError(str(e), line=seen.get('ell')) from e

    return RunConfig(
        params=params,
        scf=ScfConfig(**sections['scf']),
        outputs=OutputConfig(**sections['outputs']),
        monitor=MonitorConfig(**sections['monitor']),
        **sections['run'],
    )


def load_config(path):
    """
    Read and parse a configuration file.
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    return parse_config(text)


def dump_config(config):
    """
    Returns configuration text that parses back to `config`.
    """
    def fmt(value):
        if isinstance(value, bool):
            return 'true' if value else 'false'
        if isinstance(value, float):
            return repr(value)
        return str(value)

    objects = {
        'params': config.params, 'run': config, 'scf': config.scf,
        'outputs': config.outputs, 'monitor': config.monitor,
    }
    lines = []
    for key, (section, name, _) in KEYS.items():
        value = getattr(objects[section], name)
        if value is None:
            continue
        lines.append(f"{key} = {fmt(value)}")
    return '\n'.join(lines) + '\n'


def with_overrides(config, **scf_overrides):
    """
    Returns a copy of config with ScfConfig fields replaced.
    """
    return replace(config, scf=replace(config.scf, **scf_overrides))
