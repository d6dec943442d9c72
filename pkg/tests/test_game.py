from __future__ import annotations

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from scripts.powercontrol.errors import DegenerateEfficiencyFunction, ZeroPower
from scripts.powercontrol.game import (
    db,
    equilibrium_utility,
    from_db,
    packet_success,
    packet_success_derivative,
    tabulated_target_sir,
    target_sir,
    utility,
    utility_loss_ratio,
)
from scripts.powercontrol.models import EfficiencyFunction

HUNDRED_BIT_PACKET = EfficiencyFunction(m_bits=100, l_bits=100, rate=1e5)


class TargetSirTests(unittest.TestCase):
    def test_hundred_bit_packets(self) -> None:
        gamma = target_sir(HUNDRED_BIT_PACKET).gamma_star
        self.assertAlmostEqual(gamma, 6.4747, places=3)
        self.assertAlmostEqual(float(db(gamma)), 8.11, places=2)

    def test_two_bit_packets(self) -> None:
        self.assertAlmostEqual(target_sir(EfficiencyFunction(m_bits=2, l_bits=2)).gamma_star, 1.2564, places=3)

    def test_root_balances_success_and_slope(self) -> None:
        gamma = target_sir(HUNDRED_BIT_PACKET).gamma_star
        self.assertAlmostEqual(
            packet_success(HUNDRED_BIT_PACKET, gamma),
            gamma * packet_success_derivative(HUNDRED_BIT_PACKET, gamma),
            places=9,
        )

    def test_single_bit_packets_are_degenerate(self) -> None:
        with self.assertRaises(DegenerateEfficiencyFunction):
            target_sir(EfficiencyFunction(m_bits=1, l_bits=1))

    def test_target_grows_with_packet_size(self) -> None:
        values = [target_sir(EfficiencyFunction(m_bits=m, l_bits=2)).gamma_star for m in (10, 50, 100, 500)]
        self.assertTrue(all(a < b for a, b in zip(values, values[1:])))

    def test_packet_needs_two_information_bits(self) -> None:
        for m_bits, l_bits in ((100, 1), (100, 101), (1, 2), (0, 0)):
            with self.assertRaises(ValueError, msg=f"M={m_bits} L={l_bits}"):
                EfficiencyFunction(m_bits=m_bits, l_bits=l_bits)
        self.assertEqual(EfficiencyFunction(m_bits=2, l_bits=2).l_bits, 2)

    def test_tabulated_function_recovers_root(self) -> None:
        grid = np.linspace(0.5, 20.0, 400)
        table = packet_success(HUNDRED_BIT_PACKET, grid)
        recovered = tabulated_target_sir(grid, table).gamma_star
        self.assertAlmostEqual(recovered, target_sir(HUNDRED_BIT_PACKET).gamma_star, places=3)

    def test_tabulated_function_validates_samples(self) -> None:
        with self.assertRaises(ValueError):
            tabulated_target_sir([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
        with self.assertRaises(ValueError):
            tabulated_target_sir([1.0, 3.0, 2.0, 4.0], [0.1, 0.2, 0.3, 0.4])


class UtilityTests(unittest.TestCase):
    def test_packet_success_reference(self) -> None:
        self.assertAlmostEqual(packet_success(HUNDRED_BIT_PACKET, 6.4), 0.8468, places=4)
        np.testing.assert_allclose(packet_success(HUNDRED_BIT_PACKET, [0.0]), [0.0])

    def test_utility_in_bits_per_joule(self) -> None:
        value = utility(HUNDRED_BIT_PACKET, 6.4, 1e-3)
        self.assertAlmostEqual(value, 1e5 * 0.8468 / 1e-3, delta=1e3)

    def test_zero_power_is_rejected(self) -> None:
        with self.assertRaises(ZeroPower):
            utility(HUNDRED_BIT_PACKET, 6.4, 0.0)
        with self.assertRaises(ZeroPower):
            equilibrium_utility(HUNDRED_BIT_PACKET, 6.4, [1e-3, 0.0])

    def test_one_db_above_target_loses_ten_percent(self) -> None:
        gamma = target_sir(HUNDRED_BIT_PACKET)
        ratio = utility_loss_ratio(HUNDRED_BIT_PACKET, float(from_db(1.0)) * gamma.gamma_star, gamma)
        self.assertAlmostEqual(ratio, 0.9009, delta=2e-3)
        self.assertAlmostEqual(utility_loss_ratio(HUNDRED_BIT_PACKET, gamma.gamma_star, gamma), 1.0, places=12)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(min_value=0.1, max_value=40.0))
    def test_target_maximizes_utility(self, gamma_hat: float) -> None:
        gamma = target_sir(HUNDRED_BIT_PACKET)
        self.assertLessEqual(utility_loss_ratio(HUNDRED_BIT_PACKET, gamma_hat, gamma), 1.0 + 1e-9)

    def test_equilibrium_utility_scales_inversely_with_power(self) -> None:
        values = equilibrium_utility(HUNDRED_BIT_PACKET, 6.4, [1e-3, 2e-3])
        self.assertAlmostEqual(values[0] / values[1], 2.0)


if __name__ == "__main__":
    unittest.main()
