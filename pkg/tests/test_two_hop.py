import unittest

import numpy as np

from ehdecode.model import InfeasibleError, Scenario
from ehdecode.oracle import GridSpec, audit, oracle_virtual_relay
from ehdecode.single_user import solve_single_user
from ehdecode.two_hop import RelayDecodingStrategy, solve_inner, solve_two_hop


def two_hop(tx, relay, rx):
    return Scenario("two_hop", dict(tx=tx, relay=relay, rx=rx))


class Test(unittest.TestCase):
    """Tests for the ehdecode.two_hop module."""

    def setUp(self):
        self.scenario = two_hop([2, 1], [2, 1], [1, 2])

    def test_strategy(self):
        """Test the RelayDecodingStrategy violation check"""
        relay = self.scenario.profiles["relay"]
        self.assertIsNone(RelayDecodingStrategy([1, 1]).violation(relay))
        self.assertEqual(RelayDecodingStrategy([2.5, 0]).violation(relay), 0)
        self.assertEqual(RelayDecodingStrategy([1, 2.5]).violation(relay), 1)

    def test_inner_grid(self):
        """Test the inner solve at a fixed delta against a grid over the rates"""
        delta = np.array([0.7, 0.3])
        solution = solve_inner(self.scenario, delta)

        _, _, source_best = oracle_virtual_relay([2, 1], delta, grid=GridSpec(1e-2))
        self.assertGreaterEqual(solution.source_rates.total, source_best - 1e-9)
        self.assertLess(solution.source_rates.total - source_best, 2e-2)

        # First-slot rates on the grid, last-slot rates as large as the budgets allow
        step = 1e-2
        r0, q0 = np.meshgrid(
            np.arange(0, np.log1p(0.7) + step / 2, step),
            np.arange(0, np.log1p(1.0) + step / 2, step),
            indexing="ij",
        )
        r1 = np.minimum(np.log1p(3 - np.expm1(r0)), np.log1p(1.0 - np.expm1(r0)))
        q1 = np.minimum.reduce(
            [np.log1p(2.0 - np.expm1(q0)), np.log1p(3 - np.expm1(q0)), r0 + r1 - q0]
        )
        ok = (q0 <= r0) & (np.expm1(q0) <= 1.3) & (q1 >= 0)
        best = (q0 + q1)[ok].max()

        self.assertGreaterEqual(solution.throughput, best - 1e-9)
        self.assertLess(solution.throughput - best, 2e-2)

    def test_inner_source_is_single_user(self):
        """Test that the source link solves a single-user problem against delta"""
        delta = [0.7, 0.3]
        solution = solve_inner(self.scenario, delta)
        expected = solve_single_user([2, 1], delta)

        np.testing.assert_array_equal(solution.source_rates.rates, expected.rates.rates)

    def test_inner_feasible(self):
        """Test that the inner policy satisfies every constraint family"""
        solution = solve_inner(self.scenario, [0.7, 0.3])
        self.assertTrue(audit(solution, self.scenario).feasible)
        self.assertAlmostEqual(solution.throughput, solution.relay_rates.total)

    def test_inner_no_transmit_energy(self):
        """Test that a relay spending everything on decoding forwards nothing"""
        solution = solve_inner(self.scenario, [2, 1])
        np.testing.assert_array_equal(solution.relay_rates.rates, [0, 0])
        self.assertEqual(solution.throughput, 0.0)

    def test_inner_errors(self):
        """Test the errors of solve_inner"""
        with self.assertRaises(InfeasibleError):
            solve_inner(self.scenario, [2.5, 0])
        with self.assertRaises(ValueError):
            solve_inner(self.scenario, [0.5])

    def test_empty_relay(self):
        """Test that a relay without energy gives zero throughput"""
        solution = solve_two_hop(two_hop([2, 1], [0, 0], [1, 2]))
        self.assertEqual(solution.throughput, 0.0)
        np.testing.assert_array_equal(solution.delta.delta.powers, [0, 0])

    def test_empty_destination(self):
        """Test that a destination without energy decodes nothing"""
        solution = solve_two_hop(two_hop([2, 1], [2, 1], [0, 0]))
        self.assertEqual(solution.throughput, 0.0)

    def test_outer_beats_fixed_reservations(self):
        """Test that the optimized reservation beats a grid of fixed ones"""
        solution = solve_two_hop(self.scenario)
        self.assertTrue(solution.converged)
        self.assertTrue(audit(solution, self.scenario).feasible)

        for d1 in np.linspace(0, 2, 9):
            for d2 in np.linspace(0, 3 - d1, 7):
                fixed = solve_inner(self.scenario, [d1, d2]).throughput
                self.assertGreaterEqual(solution.throughput, fixed - 1e-2)

    def test_throughput_bounds(self):
        """Test that the relay never forwards more than it received"""
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(1, 4))
            tx, relay, rx = rng.uniform(0.1, 2, (3, n))
            solution = solve_two_hop(two_hop(tx, relay, rx))

            self.assertLessEqual(solution.throughput, solution.source_rates.total + 1e-9)
            self.assertTrue(
                np.all(np.cumsum(solution.relay_rates.rates) <= np.cumsum(solution.source_rates.rates) + 1e-9)
            )


if __name__ == "__main__":
    unittest.main()
