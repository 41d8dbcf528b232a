"""
Free Dirac bands of the cubic lattice along G-X-M-R, compared against the
closed-form levels sqrt(1 + |2 pi k / ell + xi|^2).
"""
import numpy as np

from PeriodicDiracFock.cli import path_points, sample_path
from PeriodicDiracFock.constants import free_band_edges
from PeriodicDiracFock.dirac import assemble_free_dirac, diagonalize
from PeriodicDiracFock.lattice import build_basis



ELL = 10.0
BANDS = 4


if __name__ == '__main__':
	basis = build_basis(2)
	coordinates, points = sample_path(path_points('G-X-M-R', ELL), 5)

	worst = 0.0
	for s, xi in zip(coordinates, points):
		values = diagonalize(assemble_free_dirac(basis, xi, ELL)).eigenvalues
		positive = values[values > 0][:BANDS]
		exact = free_band_edges(xi, ELL, BANDS)
		worst = max(worst, float(np.max(np.abs(positive - exact))))
		print(f's = {s:.4f}  ' + '  '.join(f'{v:.6f}' for v in positive))

	print('\nLargest deviation from the closed form:', worst)
