"""
Command-line entry point.

    periodic-dirac-fock constants --ell 1000 --z 17 --q 17
    periodic-dirac-fock solve --config desk.conf
    periodic-dirac-fock bands --config desk.conf --checkpoint run.npz --csv bands.csv

Exit codes: 0 ok, 2 assumption violated, 3 SCF not converged, 4 model
failure, 64 usage or configuration error, 65 checkpoint mismatch.
"""
import argparse
import csv
import json
import logging
import sys

import numpy as np
import redis

from dataclasses import asdict

from .bridge import ProgressBridge
from .checkpoint import check_compatible, load_checkpoint, save_checkpoint
from .config import load_config, with_overrides
from .constants import constants_report, hardy_cube_validate
from .density import BlochDensityMatrix
from .dirac import diagonalize
from .errors import (
    ConfigError, DataMismatchError, DiracFockError, ModelFailureError, NonConvergenceError)
from .interfaces import IterationLog
from .lattice import DEFAULT_ALPHA, CrystalParams, build_basis, build_kgrid
from .meanfield import assemble_fiber
from .scf import ScfSolver
from .utils import uid


EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_NOT_CONVERGED = 3
EXIT_MODEL_FAILURE = 4
EXIT_USAGE = 64
EXIT_DATA = 65

logger = logging.getLogger(__name__)



class _Parser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")



def path_points(path, ell):
    """
    Returns the corner quasi-momenta of a path such as 'G-X-M-R'.

    Labels: G (or Γ) = 0, X = (pi/ell, 0, 0), M = (pi/ell, pi/ell, 0),
    R = (pi/ell, pi/ell, pi/ell).
    """
    h = np.pi / ell
    corners = {
        'G': (0.0, 0.0, 0.0), 'Γ': (0.0, 0.0, 0.0),
        'X': (h, 0.0, 0.0), 'M': (h, h, 0.0), 'R': (h, h, h),
    }
    labels = [label.strip() for label in path.split('-')]
    unknown = [label for label in labels if label not in corners]
    if len(labels) < 2 or unknown:
        raise ConfigError(f"Bad band path '{path}' (labels must be among G, Γ, X, M, R)")
    return [np.array(corners[label]) for label in labels]


def sample_path(corners, samples):
    """
    Returns (coordinates, points): `samples` points per segment, endpoints shared.
    """
    points = [corners[0]]
    for a, b in zip(corners, corners[1:]):
        for t in np.linspace(0, 1, samples + 1)[1:]:
            points.append(a + t * (b - a))
    points = np.array(points)
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)]), points


def _write_json(path, data):
    # json writes floats with repr, i.e. up to 17 significant digits
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)


def cmd_constants(args):
    params = CrystalParams(ell=args.ell, z=args.z, q=args.q, alpha=args.alpha)
    report = constants_report(params, eps_P=args.eps_P)
    print(report.table())

    data = report.to_dict()
    if args.hardy:
        hardy = hardy_cube_validate(params.ell, trial_count=args.hardy)
        print(f"\nHardy check over {hardy.trials} trials: worst ratio {hardy.worst_ratio:.6g} "
              f"(proof coefficients {hardy.worst_ratio_proof:.6g})\n{hardy.note}")
        data['hardy'] = asdict(hardy)

    if args.json:
        _write_json(args.json, data)

    return EXIT_OK if report.check.holds else EXIT_ASSUMPTION


def _connect_monitor(config, run):
    monitor = config.monitor
    if monitor.channel is None:
        return None
    try:
        return ProgressBridge(
            name=run, use_mock_redis_server=monitor.mock, host=monitor.host, port=monitor.port)
    except redis.exceptions.RedisError as e:
        logger.warning(f"Progress monitoring disabled: {e}")
        return None


def cmd_solve(args):
    config = load_config(args.config)
    if args.threads:
        config = with_overrides(config, threads=args.threads)
    if args.max_iter:
        config = with_overrides(config, max_iter=args.max_iter)

    params = config.params
    eps_P = config.resolve_eps_P()
    basis = build_basis(config.kmax)
    kgrid = build_kgrid(params.ell, config.kgrid_n, config.kgrid_shifted)

    initial = None
    if args.checkpoint:
        initial, metadata = load_checkpoint(args.checkpoint)
        check_compatible(metadata, basis, kgrid, params)

    run = uid()
    bridge = _connect_monitor(config, run)
    observers = []
    if config.outputs.iteration_log:
        observers.append(IterationLog(config.outputs.iteration_log))

    solver = ScfSolver(
        params, basis, kgrid, eps_P, config=config.scf, name=run, observers=observers,
        bridge=bridge, channel=config.monitor.channel)

    try:
        state = solver.solve(initial)
        code = EXIT_OK
    except NonConvergenceError as e:
        logger.error(str(e))
        state = e.state
        code = EXIT_NOT_CONVERGED
    finally:
        if bridge is not None:
            bridge.stop()

    summary = {
        'run': run,
        'converged': state.converged,
        'iterations': state.iteration,
        'eps_P': eps_P,
        'energy': state.energy.to_dict(),
        'charge': state.charge,
        'nu': state.nu,
        'residual': state.residual_fixedpoint,
        'checks': state.checks,
    }
    print(json.dumps(summary, indent=2))
    if config.outputs.energy_json:
        _write_json(config.outputs.energy_json, summary)
    if config.outputs.checkpoint:
        save_checkpoint(config.outputs.checkpoint, state.iterate, {
            'run': run, 'z': params.z, 'q': params.q, 'alpha': params.alpha,
            'eps_P': eps_P, 'converged': state.converged, 'energy': state.energy.to_dict(),
        })
    return code


def cmd_bands(args):
    config = load_config(args.config)
    params = config.params

    basis = build_basis(config.kmax)
    kgrid = build_kgrid(params.ell, config.kgrid_n, config.kgrid_shifted)

    if args.checkpoint:
        gamma, metadata = load_checkpoint(args.checkpoint)
        check_compatible(metadata, basis, kgrid, params)
    else:
        gamma = BlochDensityMatrix.zeros(basis, kgrid)

    coordinates, points = sample_path(path_points(args.path, params.ell), args.samples)
    count = args.bands
    header = (['s', 'xi_1', 'xi_2', 'xi_3']
              + [f'band_{n}' for n in range(1, count + 1)]
              + [f'neg_{n}' for n in range(1, count + 1)])

    with open(args.csv, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for s, xi in zip(coordinates, points):
            op = assemble_fiber(gamma, params, xi, config.scf.exchange_scheme)
            values = diagonalize(op).eigenvalues
            positive = values[values >= 0][:count]
            negative = np.abs(values[values < 0][::-1][:count])
            row = [s, *xi, *positive, *negative]
            writer.writerow([repr(float(v)) for v in row])

    logger.info(f"Wrote {len(points)} samples to {args.csv}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog='periodic-dirac-fock', description=__doc__.split('\n')[1])
    parser.add_argument('--threads', type=int, default=None, help="worker threads over k-points")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('--quiet', action='store_true', help="warnings and errors only")

    subparsers = parser.add_subparsers(dest='command', parser_class=_Parser)
    subparsers.required = True

    constants = subparsers.add_parser('constants', help="explicit constants and the assumption check")
    constants.add_argument('--ell', type=float, required=True)
    constants.add_argument('--z', type=float, required=True)
    constants.add_argument('--q', type=float, required=True)
    constants.add_argument('--alpha', type=float, default=DEFAULT_ALPHA)
    constants.add_argument('--eps-P', dest='eps_P', type=float, default=None)
    constants.add_argument('--json', default=None, help="write the report as JSON")
    constants.add_argument('--hardy', type=int, default=0, metavar='TRIALS',
                           help="also validate the cube Hardy inequality")
    constants.set_defaults(func=cmd_constants)

    solve = subparsers.add_parser('solve', help="run the penalized SCF")
    solve.add_argument('--config', required=True)
    solve.add_argument('--checkpoint', default=None, help="start from this density matrix")
    solve.add_argument('--max-iter', dest='max_iter', type=int, default=None)
    solve.set_defaults(func=cmd_solve)

    bands = subparsers.add_parser('bands', help="sample D_gamma along a path")
    bands.add_argument('--config', required=True)
    bands.add_argument('--checkpoint', default=None, help="density matrix (default: 0)")
    bands.add_argument('--path', default='G-X-M-R')
    bands.add_argument('--samples', type=int, default=20, help="samples per segment")
    bands.add_argument('--bands', type=int, default=4, help="bands on each side of 0")
    bands.add_argument('--csv', required=True)
    bands.set_defaults(func=cmd_bands)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except DataMismatchError as e:
        logger.error(f"Checkpoint mismatch: {e}")
        return EXIT_DATA
    except ModelFailureError as e:
        logger.error(f"Model failure: {e}")
        return EXIT_MODEL_FAILURE
    except DiracFockError as e:
        logger.error(str(e))
        return EXIT_USAGE


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
