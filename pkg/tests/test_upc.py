from __future__ import annotations

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from scripts.powercontrol.efficiency import efficiency
from scripts.powercontrol.errors import Infeasible
from scripts.powercontrol.models import FixedPointSettings, PowerState, Receiver, SnrProfile, SystemParams
from scripts.powercontrol.upc import (
    balanced_powers,
    balanced_snr_closed_form,
    interference_function,
    path_loss_gains,
    power_trace_rows,
    run_upc,
    sif_property_harness,
    upc_step,
)

GAMMA = 6.4


def unit_system(users: int, alpha: float, p_max: float | None = None) -> SystemParams:
    return SystemParams(np.ones(users), 1.0, alpha, p_max)


class BalancedSnrTests(unittest.TestCase):
    def test_closed_forms(self) -> None:
        self.assertAlmostEqual(balanced_snr_closed_form("dec", GAMMA, 0.25), 8.5333, places=4)
        self.assertAlmostEqual(balanced_snr_closed_form("mmse", GAMMA, 0.25), 8.1655, places=4)
        self.assertAlmostEqual(balanced_snr_closed_form("mf", GAMMA, 0.1), 17.7778, places=4)

    def test_infeasible_loads(self) -> None:
        with self.assertRaises(Infeasible):
            balanced_snr_closed_form("mf", GAMMA, 0.5)
        with self.assertRaises(Infeasible):
            balanced_snr_closed_form("dec", GAMMA, 1.0)
        with self.assertRaises(ValueError):
            balanced_snr_closed_form("io", GAMMA, 0.25)

    def test_balanced_powers_invert_gains(self) -> None:
        params = SystemParams([1.0, 2.0], 0.5, 0.25)
        np.testing.assert_allclose(balanced_powers(params, "dec", GAMMA) * params.gains / 0.5, [8.5333333333] * 2)


class RunUpcTests(unittest.TestCase):
    def test_decorrelator_converges_in_two_steps(self) -> None:
        gains = path_loss_gains(8)
        params = SystemParams(gains, 1.6e-14, 0.25)
        state = run_upc(np.full(8, 1e-3), params, "dec", GAMMA)
        self.assertTrue(state.converged)
        self.assertEqual(state.n, 2)
        np.testing.assert_allclose(state.powers, GAMMA * 1.6e-14 / (0.75 * gains))

    def test_mmse_matches_closed_form(self) -> None:
        state = run_upc(np.ones(4), unit_system(4, 0.25), "mmse", GAMMA, settings=FixedPointSettings(tol=1e-13))
        np.testing.assert_allclose(state.powers, 8.1655, rtol=1e-4)
        np.testing.assert_allclose(state.powers, balanced_snr_closed_form("mmse", GAMMA, 0.25), rtol=1e-6)

    def test_matched_filter_matches_closed_form(self) -> None:
        state = run_upc(np.ones(3), unit_system(3, 0.1), "mf", GAMMA, max_iters=200)
        np.testing.assert_allclose(state.powers, balanced_snr_closed_form("mf", GAMMA, 0.1), rtol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(
        alpha=st.floats(min_value=0.05, max_value=0.9),
        gamma_star=st.floats(min_value=1.0, max_value=10.0),
    )
    def test_mmse_equal_gain_fixed_point(self, alpha: float, gamma_star: float) -> None:
        state = run_upc(
            np.ones(2),
            unit_system(2, alpha),
            "mmse",
            gamma_star,
            max_iters=1000,
            settings=FixedPointSettings(tol=1e-13),
        )
        expected = balanced_snr_closed_form("mmse", gamma_star, alpha)
        np.testing.assert_allclose(state.powers, expected, rtol=1e-5)

    def test_converged_sir_equals_target(self) -> None:
        params = SystemParams([1.0, 0.5, 0.25], 2.0, 0.5)
        state = run_upc(np.ones(3), params, "mmse", GAMMA, settings=FixedPointSettings(tol=1e-13))
        sirs = state.eta_trace[-1] * params.snrs(state.powers)
        np.testing.assert_allclose(sirs, GAMMA, rtol=1e-6)

    def test_per_user_targets(self) -> None:
        targets = np.array([4.0, 8.0])
        state = run_upc(np.ones(2), unit_system(2, 0.25), "dec", targets)
        np.testing.assert_allclose(state.powers, targets / 0.75)

    def test_divergence_raises_infeasible(self) -> None:
        with self.assertRaises(Infeasible) as ctx:
            run_upc(np.ones(4), unit_system(4, 0.5), "mf", GAMMA)
        self.assertEqual(ctx.exception.details["receiver"], "mf")

    def test_every_user_capped_is_infeasible(self) -> None:
        with self.assertRaises(Infeasible):
            run_upc(np.ones(4), unit_system(4, 0.5, p_max=10.0), "mf", GAMMA)

    def test_single_step_caps_power(self) -> None:
        state = upc_step(PowerState.initial(np.ones(2)), unit_system(2, 0.5, p_max=5.0), "dec", GAMMA)
        np.testing.assert_allclose(state.powers, [5.0, 5.0])
        self.assertEqual(state.capped_users, frozenset({0, 1}))
        self.assertEqual(state.n, 1)
        self.assertEqual(len(state.power_history), 2)

    def test_initial_power_count_must_match(self) -> None:
        with self.assertRaises(ValueError):
            run_upc(np.ones(3), unit_system(4, 0.5), "dec", GAMMA)


class EquilibriumTests(unittest.TestCase):
    TIGHT = FixedPointSettings(tol=1e-13)

    def setUp(self) -> None:
        self.params = SystemParams(path_loss_gains(8), 1.6e-14, 0.25)

    def _converge(self, receiver: str, start: float) -> PowerState:
        return run_upc(np.full(8, start), self.params, receiver, GAMMA, tol=1e-12, settings=self.TIGHT)

    def test_starting_powers_do_not_change_equilibrium(self) -> None:
        for receiver in ("dec", "mmse", "ml"):
            low = self._converge(receiver, 1e-4)
            high = self._converge(receiver, 1e-2)
            np.testing.assert_allclose(low.powers, high.powers, rtol=1e-6, err_msg=receiver)

    def test_no_user_can_lower_power_and_keep_target(self) -> None:
        for receiver in ("dec", "mmse", "ml"):
            powers = self._converge(receiver, 1e-3).powers
            for user in range(8):
                lowered = powers.copy()
                lowered[user] *= 0.99
                snrs = self.params.snrs(lowered)
                eta = efficiency(receiver, SnrProfile(snrs, 0.25), self.TIGHT).eta
                self.assertLess(eta * snrs[user], GAMMA, f"{receiver} user {user}")

    def test_trace_is_monotone_after_first_step(self) -> None:
        for receiver in ("mmse", "ml"):
            state = run_upc(np.full(8, 1e-3), self.params, receiver, GAMMA, settings=self.TIGHT)
            history = np.array(state.power_history[1:])
            steps = np.diff(history, axis=0) / history[:-1]
            for user in range(8):
                column = steps[:, user]
                self.assertTrue(
                    np.all(column >= -1e-11) or np.all(column <= 1e-11),
                    f"{receiver} user {user}: {column}",
                )


class PathLossAndTraceTests(unittest.TestCase):
    def test_default_distances(self) -> None:
        gains = path_loss_gains(8)
        self.assertAlmostEqual(gains[0], 0.1 * 110.0**-4)
        self.assertAlmostEqual(gains[-1], 0.1 * 180.0**-4)
        self.assertTrue(np.all(np.diff(gains) < 0))

    def test_explicit_distances(self) -> None:
        np.testing.assert_allclose(path_loss_gains(2, distances=[10.0, 20.0]), [0.1e-4, 0.1 / 160000.0])
        with self.assertRaises(ValueError):
            path_loss_gains(3, distances=[10.0, 20.0])

    def test_trace_rows(self) -> None:
        state = run_upc(np.ones(2), unit_system(2, 0.25), "dec", GAMMA)
        rows = power_trace_rows(state)
        self.assertEqual(len(rows), 2 * (state.n + 1))
        self.assertIsNone(rows[0]["eta"])
        self.assertAlmostEqual(rows[-1]["eta"], 0.75)
        self.assertEqual([r["iteration"] for r in rows[:2]], [0, 0])
        self.assertEqual(rows[-1]["user"], 1)


class InterferenceFunctionTests(unittest.TestCase):
    def test_scalar_and_vector_targets(self) -> None:
        profile = SnrProfile.equal(5.0, 0.5, count=2)
        self.assertAlmostEqual(interference_function(profile, "dec", GAMMA), GAMMA / 0.5)
        np.testing.assert_allclose(interference_function(profile, "dec", [2.0, 4.0]), [4.0, 8.0])

    def test_linear_receivers_pass_the_property_check(self) -> None:
        for receiver in (Receiver.MATCHED_FILTER, Receiver.DECORRELATOR, Receiver.MMSE):
            report = sif_property_harness(receiver, trials=150, seed=11)
            self.assertTrue(report.passed(), msg=f"{receiver.value}: {report.summary()}")
            self.assertEqual(report.summary(), "positivity: PASS, monotonicity: PASS, scalability: PASS")

    def test_property_check_rejects_nonlinear_receivers(self) -> None:
        with self.assertRaises(ValueError):
            sif_property_harness("io", trials=5)


if __name__ == "__main__":
    unittest.main()
