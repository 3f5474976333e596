import math
import unittest

import numpy as np

from ehdecode.model import (
    DecodingFunction,
    DomainError,
    EnergyProfile,
    LinkModel,
    PowerPolicy,
    RateFunction,
    RatePolicy,
    Scenario,
    Topology,
    check_scenario,
    cumulative_feasible,
    decoding_energy,
    decoding_power,
    relax_receivers,
    validate_scenario,
)

DECODERS = [
    DecodingFunction.inverse_g("natural"),
    DecodingFunction.inverse_g("base2"),
    DecodingFunction.linear(2.0, 0.5),
    DecodingFunction.exponential(1.0, 2.0, -1.0, "base2"),
    DecodingFunction.exponential(0.5, 1.5, 0.0, "natural"),
]


class Test(unittest.TestCase):
    """Tests for the ehdecode.model module."""

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_energy_profile(self):
        """Test the EnergyProfile validation and sums"""
        profile = EnergyProfile([1, 2, 0.5])
        self.assertEqual(len(profile), 3)
        np.testing.assert_allclose(profile.cumulative, [1, 3, 3.5])
        self.assertEqual(profile.total, 3.5)
        np.testing.assert_allclose(EnergyProfile.from_cumulative([1, 3, 3.5]).amounts, [1, 2, 0.5])

        with self.assertRaises(ValueError):
            EnergyProfile([])
        with self.assertRaises(ValueError):
            EnergyProfile([1, -1])
        with self.assertRaises(ValueError):
            profile.amounts[0] = 5.0

    def test_policies(self):
        """Test the rate and power policies"""
        self.assertAlmostEqual(RatePolicy([0.5, 1.0]).total, 1.5)
        np.testing.assert_allclose(PowerPolicy([1, 2]).cumulative, [1, 3])
        with self.assertRaises(ValueError):
            RatePolicy([0.1, np.inf])

    def test_rate_round_trip(self):
        """Test f(g(p)) = p on random powers"""
        p = self.rng.uniform(0, 1e6, 1000)
        for log_base in ("natural", "base2"):
            rate = RateFunction(log_base)
            np.testing.assert_array_less(np.abs(rate.f(rate.g(p)) - p), 1e-9 * (1 + p))

        self.assertEqual(RateFunction().g(0.0), 0.0)
        self.assertAlmostEqual(RateFunction("base2").g(3.0), 1.0)

    def test_decoding_round_trip(self):
        """Test psi(phi(r)) = r on random rates"""
        r = self.rng.uniform(0, 50, 1000)
        for decoding in DECODERS:
            np.testing.assert_array_less(np.abs(decoding.psi(decoding.phi(r)) - r), 1e-9 * (1 + r))

    def test_decoding_convex_and_monotone(self):
        """Test convexity and monotonicity of phi"""
        r1, r2 = self.rng.uniform(0, 10, (2, 500))
        theta = self.rng.uniform(0, 1, 500)
        for decoding in DECODERS:
            mixed = decoding.phi(theta * r1 + (1 - theta) * r2)
            chord = theta * decoding.phi(r1) + (1 - theta) * decoding.phi(r2)
            self.assertTrue(np.all(mixed <= chord + 1e-9 * (1 + chord)))

            low, high = np.minimum(r1, r2), np.maximum(r1, r2)
            self.assertTrue(np.all(decoding.phi(low) <= decoding.phi(high)))

    def test_inverse_decoding(self):
        """Test that the inverse_g kind undoes g"""
        p = self.rng.uniform(0, 100, 100)
        for log_base in ("natural", "base2"):
            link = LinkModel.inverse(log_base)
            np.testing.assert_allclose(link.phi(link.g(p)), p, rtol=1e-12)
            self.assertTrue(link.decoding.is_inverse_rate)

        self.assertTrue(DecodingFunction.exponential(1.0, 2.0, -1.0, "base2").is_inverse_rate)
        self.assertFalse(DecodingFunction.linear(1.0).is_inverse_rate)

    def test_psi_below_phi_zero(self):
        """Test that psi maps energies below phi(0) to rate 0"""
        decoding = DecodingFunction.linear(2.0, 0.5)
        self.assertEqual(decoding.psi(0.2), 0.0)
        self.assertAlmostEqual(decoding.psi(2.5), 1.0)

    def test_link_base_mismatch(self):
        """Test that mixing log bases is rejected"""
        with self.assertRaises(ValueError):
            LinkModel(RateFunction("natural"), DecodingFunction.inverse_g("base2"))
        with self.assertRaises(ValueError):
            RateFunction("base10")

    def test_rate_cap(self):
        """Test the overflow guard on rates"""
        with self.assertRaises(DomainError):
            RateFunction().f(61.0)
        with self.assertRaises(DomainError):
            DecodingFunction.exponential(1.0, 2.0, -1.0, "base2").phi(100.0)

    def test_decoding_power(self):
        """Test the decoding_power examples"""
        self.assertEqual(decoding_power(0.0, LinkModel()), 0.0)
        self.assertAlmostEqual(decoding_power(math.log(4.0), LinkModel()), 3.0)
        linear = LinkModel(decoding=DecodingFunction.linear(2.0, 0.5))
        self.assertAlmostEqual(decoding_power(1.0, linear), 2.5)

        with self.assertRaises(DomainError):
            decoding_power(-0.1, LinkModel())

    def test_decoding_energy_idle_slots(self):
        """Test that rate-0 slots are charged no decoding energy"""
        linear = LinkModel(decoding=DecodingFunction.linear(2.0, 0.5))
        np.testing.assert_allclose(decoding_energy([0.0, 1.0], linear), [0.0, 2.5])

    def test_cumulative_feasible(self):
        """Test the cumulative_feasible examples"""
        self.assertTrue(cumulative_feasible(PowerPolicy([1, 1]), EnergyProfile([1, 1]), 0))
        self.assertFalse(cumulative_feasible(PowerPolicy([2, 0]), EnergyProfile([1, 1]), 0))
        self.assertTrue(
            cumulative_feasible(
                PowerPolicy([0.8333, 0.8333, 0.8333, 2.5, 3.0]),
                EnergyProfile([1, 1, 0.5, 2.5, 3]),
                1e-3,
            )
        )
        with self.assertRaises(ValueError):
            cumulative_feasible([1, 1], [1, 1, 1])

    def test_check_scenario(self):
        """Test the check_scenario examples"""
        single = Scenario("single_user", dict(tx=[1, 2], rx=[1, 1]))
        self.assertEqual(check_scenario(single), [])

        bc = Scenario("bc", dict(tx=[1], rx1=[1], rx2=[1]), LinkModel.inverse("base2"), 0.5)
        violations = check_scenario(bc)
        self.assertEqual(len(violations), 1)
        self.assertIn("bc_noise_sigma2", violations[0])

        mac = Scenario("mac", dict(tx1=[1, 1, 1], tx2=[1, 1, 1, 1], rx=[1, 1, 1]))
        self.assertTrue(any("lengths" in v for v in check_scenario(mac)))

        missing = Scenario("two_hop", dict(tx=[1], rx=[1]))
        self.assertTrue(any("relay" in v for v in check_scenario(missing)))

    def test_validate_scenario(self):
        """Test the errors raised by validate_scenario"""
        bc = Scenario("bc", dict(tx=[1], rx1=[1], rx2=[1]), LinkModel.inverse("base2"), 1.0)
        with self.assertRaises(DomainError):
            validate_scenario(bc, Topology.BC)
        with self.assertRaises(ValueError):
            validate_scenario(Scenario("single_user", dict(tx=[1], rx=[1])), "mac")

    def test_relax_and_swap(self):
        """Test relax_receivers and swap_users"""
        mac = Scenario("mac", dict(tx1=[1, 2], tx2=[3, 4], rx=[0.5, 0.5]))
        swapped = mac.swap_users()
        np.testing.assert_allclose(swapped.energy("tx1"), [3, 4])
        np.testing.assert_allclose(swapped.energy("tx2"), [1, 2])

        relaxed = relax_receivers(mac, 1e6)
        np.testing.assert_allclose(relaxed.energy("rx"), [1e6, 1e6])
        np.testing.assert_allclose(relaxed.energy("tx1"), [1, 2])

        with self.assertRaises(ValueError):
            Scenario("single_user", dict(tx=[1], rx=[1])).swap_users()


if __name__ == "__main__":
    unittest.main()
