"""
A simple example of watching an SCF run through a ProgressBridge.

The solver publishes its records on the 'progress' channel, and a monitor
prints each iteration as it arrives and reports the converged energy.
Pass --redis to use a running Redis server instead of an in-process mock.
"""
import sys, threading

from PeriodicDiracFock import ProgressBridge
from PeriodicDiracFock.config import ScfConfig
from PeriodicDiracFock.interfaces import CallbackInterface
from PeriodicDiracFock.lattice import CrystalParams
from PeriodicDiracFock.records import ConvergenceRecord, IterationRecord, RetractionRecord
from PeriodicDiracFock.scf import solve_penalized



class Monitor:
	"""
	Prints progress records of a single run.
	"""

	def __init__(self, bridge):
		self.bridge = CallbackInterface(bridge)
		self.bridge.register_callback(self.on_iteration, 'progress', IterationRecord)
		self.bridge.register_callback(self.on_retraction, 'progress', RetractionRecord)
		self.bridge.register_callback(self.on_convergence, 'progress', ConvergenceRecord)
		self.done = threading.Event()

	def on_iteration(self, record):
		print(f'iter {record.iter:3d}  E = {record.E_total:.10f}  residual = {record.residual:.3e}')

	def on_retraction(self, record):
		print(f'    retraction: {record.steps} steps, residual {record.final_residual:.3e}')

	def on_convergence(self, record):
		print('Converged:', record.converged, 'after', record.iterations, 'iterations')
		print('Energy:', record.energy)
		self.done.set()



if __name__ == '__main__':
	bridge = ProgressBridge(name='monitor', use_mock_redis_server='--redis' not in sys.argv)
	monitor = Monitor(bridge)
	bridge.start()

	params = CrystalParams(ell=10, z=2, q=2, alpha=0.0073)
	solve_penalized(params, config=ScfConfig(retract_every=2), bridge=bridge, channel='progress')

	# Records are delivered on the bridge thread
	monitor.done.wait(timeout=10)
	bridge.stop()
