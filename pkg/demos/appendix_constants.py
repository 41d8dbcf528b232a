"""
Prints the explicit constants for a light neutral crystal with a large cell,
then sweeps the electron number to find where the assumption breaks down.
"""
from PeriodicDiracFock.constants import constants_report, sweep_assumption
from PeriodicDiracFock.lattice import CrystalParams



ELL = 1000.0



if __name__ == '__main__':
	report = constants_report(CrystalParams(ell=ELL, z=17, q=17))
	print(report.table(), '\n')

	# Largest q = z for which both conditions hold
	largest = None
	for q, check in sweep_assumption(range(1, 31), ell=ELL):
		print(f'q = {q:2d}  cond1 = {check.cond1:.4f}  cond2 = {check.cond2:.4f}  holds = {check.holds}')
		if check.holds:
			largest = q

	print('\nLargest neutral crystal satisfying the assumption:', largest)
