import json
import math
import unittest

import numpy as np

from ehdecode.bc import solve_bc
from ehdecode.gp import GeometricProgram, Monomial
from ehdecode.mac import solve_mac_simultaneous
from ehdecode.model import InfeasibleError, LinkModel, OracleSizeError, Scenario
from ehdecode.oracle import (
    GridSpec,
    audit,
    oracle_bc_single_slot,
    oracle_common_rate,
    oracle_gp,
    oracle_single_user,
    oracle_virtual_relay,
    oracle_weighted,
    policy_record,
)
from ehdecode.single_user import solve_single_user
from ehdecode.two_hop import solve_two_hop

BASE2 = LinkModel.inverse("base2")


class Test(unittest.TestCase):
    """Tests for the ehdecode.oracle module."""

    def test_grid(self):
        """Test the GridSpec values and flooring"""
        np.testing.assert_allclose(GridSpec(0.5).values(1.2), [0, 0.5, 1.0, 1.5])
        np.testing.assert_allclose(GridSpec(0.5, bound=1.0).values(10.0), [0, 0.5, 1.0])
        np.testing.assert_allclose(GridSpec(0.5).floor(np.array([0.74, 1.0, -1.0])), [0.5, 1.0, 0.0])

        with self.assertRaises(ValueError):
            GridSpec(0.0)
        with self.assertRaises(ValueError):
            GridSpec(0.5, bound=0.1)

    def test_size_guard(self):
        """Test that oversized searches are refused"""
        with self.assertRaises(OracleSizeError):
            oracle_single_user([1] * 5, [1] * 5)
        with self.assertRaises(OracleSizeError):
            oracle_single_user([1] * 4, [1] * 4, grid=GridSpec(1e-4))

        scenario = Scenario("single_user", dict(tx=[1] * 4, rx=[1] * 4))
        with self.assertRaises(OracleSizeError):
            oracle_weighted(scenario)

        bc = Scenario("bc", dict(tx=[1, 1], rx1=[1, 1], rx2=[1, 1]), BASE2, 2.0)
        with self.assertRaises(OracleSizeError):
            oracle_bc_single_slot(bc, (1, 2))

    def test_single_slot(self):
        """Test the closed-form last rate on one slot"""
        rates, value = oracle_single_user([1], [1], grid=GridSpec(1e-3))
        self.assertAlmostEqual(value, 0.693, places=9)
        self.assertEqual(len(rates), 1)

    def test_single_user(self):
        """Test the single-user solver against the grid"""
        rates, best = oracle_single_user([3, 0, 0], [1, 1, 1], grid=GridSpec(1e-3))
        solver = solve_single_user([3, 0, 0], [1, 1, 1]).throughput

        self.assertAlmostEqual(solver, 3 * math.log(2))
        self.assertLessEqual(best, solver + 1e-9)
        self.assertLess(solver - best, 3e-3)

        scenario = Scenario("single_user", dict(tx=[3, 0, 0], rx=[1, 1, 1]))
        self.assertTrue(audit(rates, scenario).feasible)

    def test_virtual_relay(self):
        """Test that the virtual relay reaches the direct optimum"""
        tx, rx = [1.2, 0.4], [0.3, 1.0]
        _, direct = oracle_single_user(tx, rx, grid=GridSpec(1e-2))
        sent, decoded, value = oracle_virtual_relay(tx, rx, grid=GridSpec(1e-2))

        self.assertAlmostEqual(value, direct, places=9)
        self.assertTrue(np.all(decoded.rates <= sent.rates + 1e-12))

    def test_two_hop(self):
        """Test the two-hop solver against the nested grid"""
        scenario = Scenario("two_hop", dict(tx=[2, 1], relay=[2, 1], rx=[1, 2]))
        (source, relay), best = oracle_weighted(scenario, grid=GridSpec(1e-2))
        solver = solve_two_hop(scenario).throughput

        self.assertLess(abs(solver - best), 3e-2)
        self.assertGreaterEqual(solver, oracle_common_rate(scenario) - 1e-6)
        self.assertTrue(np.all(np.cumsum(relay.rates) <= np.cumsum(source.rates) + 1e-9))

    def test_mac(self):
        """Test the equal-weight MAC point against the power grid"""
        scenario = Scenario("mac", dict(tx1=[0.5, 1.0], tx2=[1.0, 2.0], rx=[1.5, 2.0]), BASE2)
        _, best = oracle_weighted(scenario, (1, 1), GridSpec(2e-2))
        solver = solve_mac_simultaneous(scenario, (1, 1)).weighted_value

        self.assertGreaterEqual(solver, best - 1e-9)
        self.assertLess(solver - best, 5e-2)

    def test_bc(self):
        """Test a BC point against the rate grid"""
        scenario = Scenario("bc", dict(tx=[5, 6], rx1=[4, 5], rx2=[1, 2]), BASE2, 2.0)
        _, best = oracle_weighted(scenario, (1, 2), GridSpec(1e-2))
        solver = solve_bc(scenario, (1, 2)).weighted_value

        self.assertGreaterEqual(solver, best - 1e-6)
        self.assertLess(solver - best, 6e-2)

    def test_policy_record(self):
        """Test the plain mapping of a single-user solution"""
        scenario = Scenario("single_user", dict(tx=[1, 1], rx=[1, 1]))
        record = policy_record(solve_single_user([1, 1], [1, 1]), scenario)

        self.assertEqual(record["topology"], "single_user")
        self.assertEqual(record["change_points"], [0, 2])
        self.assertEqual(set(record["powers"]), {"tx", "rx"})
        self.assertAlmostEqual(record["throughput"], 2 * math.log(2))
        json.dumps(record)

        self.assertTrue(audit(record, scenario).feasible)

    def test_audit_violations(self):
        """Test that the audit reports violated prefixes"""
        scenario = Scenario("single_user", dict(tx=[1, 1], rx=[1, 1]))
        report = audit(dict(rates=dict(tx=[1.0, 0.0])), scenario)

        self.assertFalse(report.feasible)
        self.assertLess(report.min_slack, 0)
        self.assertEqual(list(report.summary().index), ["tx_energy", "rx_decoding"])

        violations = report.violations()
        self.assertEqual(set(violations["constraint"]), {"tx_energy", "rx_decoding"})
        self.assertEqual(violations["slot"].min(), 1)

    def test_gp(self):
        """Test the geometric program grid against known optima"""
        x, y = Monomial(1.0, {"x": 1}), Monomial(1.0, {"y": 1})

        assignment, value = oracle_gp(GeometricProgram(x, [2 * x**-1]))
        self.assertGreaterEqual(value, 2 - 1e-9)
        self.assertLess(value - 2, 2e-2)
        self.assertAlmostEqual(assignment["x"], value)

        _, value = oracle_gp(GeometricProgram(x + y, [(x * y) ** -1]))
        self.assertGreaterEqual(value, 2 - 1e-9)
        self.assertLess(value - 2, 1e-2)

    def test_gp_errors(self):
        """Test the errors of the geometric program grid"""
        x = Monomial(1.0, {"x": 1})
        with self.assertRaises(InfeasibleError):
            oracle_gp(GeometricProgram(x, [x, 2 * x**-1]))
        with self.assertRaises(ValueError):
            oracle_gp(GeometricProgram(x, [2 * x**-1]), step=0)

        names = [f"x{i}" for i in range(5)]
        wide = GeometricProgram(sum((Monomial(1.0, {v: 1}) for v in names[1:]), Monomial(1.0, {"x0": 1})))
        with self.assertRaises(OracleSizeError):
            oracle_gp(wide)
        with self.assertRaises(OracleSizeError):
            oracle_gp(GeometricProgram(x + Monomial(1.0, {"y": 1}) + Monomial(1.0, {"z": 1})), step=1e-3)


if __name__ == "__main__":
    unittest.main()
