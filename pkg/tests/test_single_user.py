import math
import unittest

import numpy as np

from ehdecode.model import LinkModel, Scenario
from ehdecode.oracle import audit
from ehdecode.single_user import (
    Binding,
    no_battery_caps,
    rates_to_powers,
    solve_single_user,
    solve_single_user_no_battery,
)

TX = [2, 2, 1, 2.5, 0.5]
RX = [1, 1, 0.5, 2.5, 3]


class Test(unittest.TestCase):
    """Tests for the ehdecode.single_user module."""

    def test_fixture(self):
        """Test the five-slot instance with decoding costs"""
        solution = solve_single_user(TX, RX)

        np.testing.assert_allclose(
            solution.rates.rates, [0.6061, 0.6061, 0.6061, 1.2528, 1.3863], atol=1e-3
        )
        self.assertEqual(solution.change_points, [0, 3, 4, 5])
        self.assertEqual(len(solution.binding), 3)
        self.assertAlmostEqual(solution.throughput, solution.rates.rates.sum())

    def test_fixture_feasible(self):
        """Test that the fixture exhausts the receiver and stays feasible"""
        scenario = Scenario("single_user", dict(tx=TX, rx=RX))
        report = audit(solve_single_user(TX, RX), scenario)

        self.assertTrue(report.feasible)
        rx = report.frame[report.frame["constraint"] == "rx_decoding"]
        self.assertLess(abs(rx["slack"].iloc[-1]), 1e-9)

    def test_unconstrained_receiver(self):
        """Test the equal-power policy when decoding is free"""
        solution = solve_single_user([1, 1], [1e9, 1e9])
        np.testing.assert_allclose(solution.rates.rates, [math.log(2)] * 2)
        self.assertEqual(solution.binding, [Binding.TX_ENERGY])

    def test_front_loaded(self):
        """Test front-loaded transmitter energy with a steady receiver"""
        solution = solve_single_user([3, 0, 0], [1, 1, 1])
        np.testing.assert_allclose(solution.rates.rates, [math.log(2)] * 3)

    def test_zero_energy(self):
        """Test that empty batteries give zero rates"""
        np.testing.assert_array_equal(solve_single_user([0, 0], [1, 1]).rates.rates, [0, 0])
        np.testing.assert_array_equal(solve_single_user([1, 1], [0, 0]).rates.rates, [0, 0])

    def test_non_decreasing(self):
        """Test that rates never decrease on random instances"""
        rng = np.random.default_rng(2)
        for link in (LinkModel(), LinkModel.inverse("base2")):
            for _ in range(50):
                n = int(rng.integers(1, 9))
                tx, rx = rng.uniform(0, 3, (2, n))
                rates = solve_single_user(tx, rx, link).rates.rates
                self.assertTrue(np.all(np.diff(rates) >= -1e-12))

    def test_length_mismatch(self):
        """Test that profiles of different lengths are rejected"""
        with self.assertRaises(ValueError):
            solve_single_user([1, 1], [1])
        with self.assertRaises(ValueError):
            solve_single_user_no_battery([1, 1], [1])

    def test_no_battery_caps(self):
        """Test the per-slot caps of a battery-less receiver"""
        link = LinkModel()
        np.testing.assert_allclose(no_battery_caps([1, 3], link), [1, 3])

    def test_no_battery(self):
        """Test the battery-less receiver examples"""
        link = LinkModel()
        one = link.phi(link.g(1.0))

        capped = solve_single_user_no_battery([4, 0], [one, one], link)
        np.testing.assert_allclose(rates_to_powers(capped, link).powers, [1, 1])

        free = solve_single_user_no_battery([1, 1], [1e9, 1e9], link)
        np.testing.assert_allclose(free.rates, [math.log(2)] * 2)

    def test_no_battery_feasible(self):
        """Test that battery-less policies respect every slot's decoding energy"""
        rng = np.random.default_rng(4)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            tx, rx = rng.uniform(0, 2, (2, n))
            scenario = Scenario("single_user", dict(tx=tx, rx=rx), rx_has_battery=False)
            rates = solve_single_user_no_battery(tx, rx)
            self.assertTrue(audit(rates, scenario).feasible)

    def test_no_battery_grid(self):
        """Test a battery-less instance whose capped slots push energy forward"""
        tx, rx = [2, 0.2, 1], [0.9, 2, 0.5]
        link = LinkModel()
        rates = solve_single_user_no_battery(tx, rx, link)
        powers = rates_to_powers(rates, link).powers

        np.testing.assert_allclose(no_battery_caps(rx, link), [0.9, 2, 0.5])
        np.testing.assert_allclose(powers, [0.9, 1.3, 0.5], atol=1e-12)
        self.assertAlmostEqual(sum(tx) - powers.sum(), 0.5)

        scenario = Scenario("single_user", dict(tx=tx, rx=rx), link, rx_has_battery=False)
        self.assertTrue(audit(rates, scenario).feasible)

        step = 1e-2
        x0, x1 = np.meshgrid(np.arange(0, 0.9 + step / 2, step), np.arange(0, 2 + step / 2, step), indexing="ij")
        x2 = np.minimum(0.5, 3.2 - x0 - x1)
        value = np.log1p(x0) + np.log1p(x1) + np.log1p(x2)
        best = value[(x0 + x1 <= 2.2 + 1e-12) & (x2 >= 0)].max()

        self.assertGreaterEqual(rates.total, best - 1e-9)
        self.assertLess(rates.total - best, 1e-2)

    def test_no_battery_never_beats_battery(self):
        """Test that removing the receiver battery cannot help"""
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            tx, rx = rng.uniform(0, 2, (2, n))
            with_battery = solve_single_user(tx, rx).throughput
            without = solve_single_user_no_battery(tx, rx).total
            self.assertLessEqual(without, with_battery + 1e-9)


if __name__ == "__main__":
    unittest.main()
