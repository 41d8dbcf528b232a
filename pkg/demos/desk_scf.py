"""
Runs the penalized SCF for the crystal in desk.conf, writing the iteration
log next to this script, and prints the final energy breakdown and checks.
"""
import logging, os

from PeriodicDiracFock.config import load_config
from PeriodicDiracFock.interfaces import IterationLog
from PeriodicDiracFock.lattice import build_basis, build_kgrid
from PeriodicDiracFock.scf import ScfSolver



HERE = os.path.dirname(os.path.abspath(__file__))



if __name__ == '__main__':
	logging.basicConfig(level=logging.INFO)
	config = load_config(os.path.join(HERE, 'desk.conf'))
	params = config.params

	log = IterationLog(os.path.join(HERE, config.outputs.iteration_log))
	solver = ScfSolver(
		params,
		build_basis(config.kmax),
		build_kgrid(params.ell, config.kgrid_n, config.kgrid_shifted),
		config.resolve_eps_P(),
		config=config.scf,
		observers=[log])

	print(solver, 'eps_P =', solver.eps_P, 'assumption holds:', solver.check.holds, '\n')
	state = solver.solve()

	print('Iterations logged:', len(log))
	for key, value in state.energy.to_dict().items():
		print(f'{key:>10}: {value:.10f}')
	print()
	for key, value in state.checks.items():
		print(f'{key:>18}: {value}')
