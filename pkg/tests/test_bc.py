import unittest

import numpy as np

from ehdecode.bc import BcPowerSplit, bc_min_power, inner_total_power, solve_bc, sweep_bc_region
from ehdecode.model import (
    DecodingFunction,
    DomainError,
    LinkModel,
    Scenario,
    UnsupportedConfigurationError,
)
from ehdecode.oracle import audit, oracle_bc_single_slot
from ehdecode.verify import bc_fixture

BASE2 = LinkModel.inverse("base2")


def bc(tx, rx1, rx2, sigma2=2.0, link=BASE2):
    return Scenario("bc", dict(tx=tx, rx1=rx1, rx2=rx2), link, sigma2)


class Test(unittest.TestCase):
    """Tests for the ehdecode.bc module."""

    def test_min_power(self):
        """Test the superposition power examples"""
        self.assertAlmostEqual(bc_min_power(0.0, 0.5, 2.0), 2.0)
        self.assertAlmostEqual(bc_min_power(0.5, 0.5, 2.0), 4.0)
        np.testing.assert_allclose(bc_min_power([0.0, 0.5], [0.5, 0.5], 2.0), [2.0, 4.0])

        with self.assertRaises(DomainError):
            bc_min_power(0.5, 0.5, 1.0)
        with self.assertRaises(DomainError):
            bc_min_power(-0.1, 0.5, 2.0)

    def test_power_split(self):
        """Test BcPowerSplit rates and transmit power"""
        split = BcPowerSplit([3.0, 3.0], [1.0, 0.0])
        r1, r2 = split.rates(BASE2)

        np.testing.assert_allclose(r2.rates, [0.5, 0.0])
        np.testing.assert_allclose(r1.rates, [0.5, 1.0])
        np.testing.assert_allclose(split.transmit_power(2.0), [4.0, 3.0])
        np.testing.assert_allclose(split.transmit_power(2.0), bc_min_power(r1.rates, r2.rates, 2.0))

        with self.assertRaises(ValueError):
            BcPowerSplit([1.0], [2.0])

    def test_strong_user_only(self):
        """Test that mu1 >= mu2 serves only the strong receiver"""
        point = solve_bc(bc([2, 2], [1, 1], [5, 5]), (1, 0))

        self.assertEqual(point.b2, 0.0)
        np.testing.assert_allclose(point.rates[0].rates, [0.5, 0.5])
        np.testing.assert_allclose(point.policy[0].powers, [1, 1])

    def test_weak_receiver_without_energy(self):
        """Test that a weak receiver without energy gets nothing"""
        scenario = bc([2, 2], [1, 1], [0, 0])
        for weights in ((1, 2), (1, 10), (0, 1)):
            point = solve_bc(scenario, weights)
            self.assertEqual(point.b2, 0.0)

    def test_inner_total_power(self):
        """Test the inner fill above the weak-user power"""
        scenario = bc_fixture("A")
        p2 = np.array([0.2, 0.3, 0.4])
        p_t = inner_total_power(scenario, p2).powers

        self.assertTrue(np.all(p_t >= p2 - 1e-12))
        self.assertTrue(np.all(np.diff(p_t) >= -1e-12))
        self.assertTrue(np.all(np.cumsum(p_t) <= scenario.cumulative("rx1") + 1e-9))

        zero = inner_total_power(scenario, np.zeros(3)).powers
        np.testing.assert_allclose(zero, [4, 5, 6])

    def test_fixture_points_feasible(self):
        """Test that fixture points satisfy every constraint family"""
        scenario = bc_fixture("B")
        for weights in ((2, 1), (1, 1), (1, 2), (1, 5), (0, 1)):
            point = solve_bc(scenario, weights)
            self.assertTrue(audit(point, scenario).feasible)
            self.assertTrue(point.converged)

    def test_nested_regions(self):
        """Test that less receiver energy shrinks the region"""
        free = sweep_bc_region(bc_fixture("A", relaxed=True), n_weights=5)
        regions = [sweep_bc_region(bc_fixture(name), n_weights=5) for name in "ABC"]

        self.assertTrue(free.dominates(regions[0]))
        self.assertTrue(regions[0].dominates(regions[1]))
        self.assertTrue(regions[1].dominates(regions[2]))
        self.assertFalse(regions[2].dominates(free, tol=1e-3))

    def test_single_slot(self):
        """Test a one-slot instance against a one-dimensional search"""
        scenario = bc([3], [3], [1])
        for weights in ((1, 2), (1, 4), (0, 1)):
            point = solve_bc(scenario, weights)
            _, _, best = oracle_bc_single_slot(scenario, weights)
            self.assertAlmostEqual(point.weighted_value, best, places=6)

    def test_errors(self):
        """Test the configuration errors of solve_bc"""
        with self.assertRaises(DomainError):
            solve_bc(bc([1], [1], [1], sigma2=1.0), (1, 2))
        with self.assertRaises(DomainError):
            solve_bc(bc([1], [1], [1], sigma2=None), (1, 2))

        linear = LinkModel(decoding=DecodingFunction.linear(1.0))
        with self.assertRaises(UnsupportedConfigurationError):
            solve_bc(bc([1], [1], [1], link=linear), (1, 2))


if __name__ == "__main__":
    unittest.main()
