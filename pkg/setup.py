import setuptools

with open('README.md', 'r') as readme_file:
	long_description = readme_file.read()

setuptools.setup(
	name='PeriodicDiracFock',
	version='0.1.0',
	description='Plane-wave solver and explicit constants for the periodic Dirac-Fock model',
	long_description=long_description,
	long_description_content_type='text/markdown',
	packages=setuptools.find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
	classifiers=[
		'Programming Language :: Python :: 3',
		'License :: OSI Approved :: MIT License',
		'Operating System :: OS Independent',
	],
	python_requires='>=3.8',
	install_requires=[
		'redis>=3',
		'fakeredis',
		'numpy>=1.17',
		'scipy>=1.4',
	],
	entry_points={
		'console_scripts': ['periodic-dirac-fock=PeriodicDiracFock.cli:run'],
	},
)
