import os
import tempfile
import unittest

from PeriodicDiracFock.config import (
    MonitorConfig, RunConfig, ScfConfig, auto_eps_P, dump_config, load_config,
    parse_config, with_overrides)
from PeriodicDiracFock.constants import c_star_upper, kappa
from PeriodicDiracFock.errors import ConfigError, ModelFailureError
from PeriodicDiracFock.lattice import CrystalParams


MINIMAL = """
# neutral two-electron crystal
ell = 10
z = 2
q = 2
"""

FULL = """
ell = 10.5
z = 2
q = 2
alpha = 0.01
kmax = 2
kgrid_n = 3
kgrid_shifted = false
eps_P = 2.5            # fixed penalty
tol_scf = 1e-9
mixing = anderson
anderson_depth = 5
retract_every = 2
exchange_scheme = omit
threads = 4
iteration_log = run.log
monitor_channel = progress
monitor_mock = yes
redis_port = 6380
"""



class TestParse(unittest.TestCase):

    def test_minimal(self):
        config = parse_config(MINIMAL)
        self.assertEqual(config.params, CrystalParams(ell=10.0, z=2.0, q=2.0))
        self.assertEqual(config.kmax, 1)
        self.assertEqual(config.kgrid_n, 2)
        self.assertTrue(config.kgrid_shifted)
        self.assertEqual(config.eps_P, 'auto')
        self.assertEqual(config.scf, ScfConfig())
        self.assertIsNone(config.outputs.energy_json)
        self.assertIsNone(config.monitor.channel)

    def test_full(self):
        config = parse_config(FULL)
        self.assertEqual(config.params.ell, 10.5)
        self.assertEqual(config.params.alpha, 0.01)
        self.assertEqual(config.kmax, 2)
        self.assertFalse(config.kgrid_shifted)
        self.assertEqual(config.eps_P, 2.5)
        self.assertEqual(config.resolve_eps_P(), 2.5)
        self.assertEqual(config.scf.tol_scf, 1e-9)
        self.assertEqual(config.scf.mixing, 'anderson')
        self.assertEqual(config.scf.anderson_depth, 5)
        self.assertEqual(config.scf.retract_every, 2)
        self.assertEqual(config.scf.exchange_scheme, 'omit')
        self.assertEqual(config.scf.threads, 4)
        self.assertEqual(config.outputs.iteration_log, 'run.log')
        self.assertEqual(config.monitor, MonitorConfig(channel='progress', port=6380, mock=True))

    def test_dump_parses_back(self):
        for text in (MINIMAL, FULL):
            config = parse_config(text)
            self.assertEqual(parse_config(dump_config(config)), config)

    def test_overrides(self):
        config = with_overrides(parse_config(MINIMAL), threads=3, max_iter=7)
        self.assertEqual(config.scf.threads, 3)
        self.assertEqual(config.scf.max_iter, 7)
        self.assertEqual(config.params.q, 2)



class TestErrors(unittest.TestCase):

    def assertConfigError(self, text, line):
        with self.assertRaises(ConfigError) as cm:
            parse_config(text)
        self.assertEqual(cm.exception.line, line)
        return cm.exception

    def test_missing_separator(self):
        e = self.assertConfigError("ell = 10\nz 2\nq = 2\n", 2)
        self.assertTrue(str(e).startswith("line 2:"))

    def test_unknown_key(self):
        self.assertConfigError("ell = 10\nz = 2\nq = 2\ncharge = 3\n", 4)

    def test_malformed_key(self):
        self.assertConfigError("ell = 10\n2z = 2\n", 2)

    def test_duplicate_key(self):
        e = self.assertConfigError("ell = 10\nz = 2\nq = 2\nz = 3\n", 4)
        self.assertIn("line 2", str(e))

    def test_bad_value(self):
        self.assertConfigError("ell = ten\nz = 2\nq = 2\n", 1)
        self.assertConfigError("ell = 10\nz = 2\nq = 2\nkgrid_shifted = maybe\n", 4)
        self.assertConfigError("ell = 10\nz = 2\nq = 2\nkmax = 1.5\n", 4)
        self.assertConfigError("ell = 10\nz = 2\nq = 2\nenergy_json =\n", 4)

    def test_missing_required(self):
        e = self.assertConfigError("ell = 10\nz = 2\n", None)
        self.assertIn("q", str(e))

    def test_invalid_crystal(self):
        self.assertConfigError("ell = -1\nz = 2\nq = 2\n", 1)

    def test_invalid_scf_settings(self):
        for text in ("mixing = broyden", "mixing_beta = 0", "exchange_scheme = ewald", "threads = 0"):
            with self.subTest(text=text), self.assertRaises(ConfigError):
                parse_config(MINIMAL + text + "\n")

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/run.conf")



class TestPenalty(unittest.TestCase):

    def test_auto(self):
        params = CrystalParams(ell=1000, z=17, q=17)
        expected = 1.05 * c_star_upper(18, 1000) / (1 - kappa(params))
        self.assertAlmostEqual(auto_eps_P(params), expected)
        self.assertAlmostEqual(RunConfig(params=params).resolve_eps_P(), expected)

    def test_auto_outside_regime(self):
        with self.assertRaises(ModelFailureError):
            auto_eps_P(CrystalParams(ell=1, z=100, q=100, alpha=0.5))

    def test_invalid_eps(self):
        with self.assertRaises(ConfigError):
            RunConfig(params=CrystalParams(ell=10, z=1, q=1), eps_P='large')



class TestLoad(unittest.TestCase):

    def test_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.conf')
            with open(path, 'w') as f:
                f.write(FULL)
            self.assertEqual(load_config(path), parse_config(FULL))



if __name__ == '__main__':
    unittest.main()
