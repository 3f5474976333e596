import unittest

import numpy as np

from ehdecode.model import Topology, check_scenario
from ehdecode.verify import SUITES, bc_fixture, mac_fixture, random_program, random_scenario, run_suite


class Test(unittest.TestCase):
    """Tests for the ehdecode.verify module."""

    def test_random_scenario(self):
        """Test the random instance generator"""
        rng = np.random.default_rng(0)
        for topology in Topology:
            scenario = random_scenario(rng, topology.value, 3)
            self.assertEqual(scenario.slots, 3)
            self.assertEqual(set(scenario.profiles), set(scenario.roles))
            self.assertEqual(check_scenario(scenario), [])

        bc = random_scenario(rng, "bc", 2)
        self.assertTrue(1.5 <= bc.bc_noise_sigma2 < 3.0)
        self.assertEqual(bc.link.log_base, "base2")
        self.assertEqual(random_scenario(rng, "single_user", 2).link.log_base, "natural")

    def test_fixtures(self):
        """Test the bundled MAC and BC instances"""
        self.assertEqual(check_scenario(mac_fixture()), [])
        for name in "ABC":
            self.assertEqual(check_scenario(bc_fixture(name)), [])

        relaxed = bc_fixture("A", relaxed=True)
        self.assertTrue(np.all(relaxed.energy("rx1") >= 1e9))
        np.testing.assert_allclose(relaxed.energy("tx"), [5, 6, 7])

    def test_suites(self):
        """Test the suite registry"""
        self.assertEqual(set(SUITES), {"lemmas", "oracle"})
        self.assertIn("two_hop_separable", SUITES["lemmas"])
        self.assertIn("bc_single_slot", SUITES["oracle"])
        self.assertIn("gp_oracle", SUITES["oracle"])

    def test_random_program(self):
        """Test the random geometric program generator"""
        rng = np.random.default_rng(1)
        for n_vars in (1, 2, 3):
            prog = random_program(rng, n_vars)
            ones = {v: 1.0 for v in prog.variables}

            self.assertEqual(prog.variables, tuple(f"x{i}" for i in range(n_vars)))
            self.assertEqual(len(prog.constraints), 1 + 2 * n_vars)
            self.assertEqual(len(prog.objective.terms) + len(prog.constraints[0].terms), 5)
            self.assertLess(prog.constraints[0](ones), 1.0)
            self.assertTrue(all(c(ones) < 1.0 for c in prog.constraints[1:]))

        with self.assertRaises(ValueError):
            random_program(rng, 2, n_terms=1)

    def test_run_subset(self):
        """Test running selected checks"""
        table = run_suite("all", seed=3, checks=["two_hop_separable", "virtual_relay_oracle"])

        self.assertEqual(list(table.columns), ["suite", "check", "passed", "detail"])
        self.assertEqual(list(table["check"]), ["two_hop_separable", "virtual_relay_oracle"])
        self.assertEqual(list(table["suite"]), ["lemmas", "oracle"])
        self.assertTrue(table["passed"].all())

    def test_seeded(self):
        """Test that a seed reproduces the same table"""
        first = run_suite("lemmas", seed=11, checks=["two_hop_separable"])
        second = run_suite("lemmas", seed=11, checks=["two_hop_separable"])
        self.assertTrue(first.equals(second))

    def test_unknown_names(self):
        """Test the errors for unknown suites and checks"""
        with self.assertRaises(ValueError):
            run_suite("everything")
        with self.assertRaises(ValueError):
            run_suite("oracle", checks=["two_hop_separable"])


if __name__ == "__main__":
    unittest.main()
