from __future__ import annotations

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from scripts.powercontrol.errors import EmptySample, InvalidLoad, InvalidShape
from scripts.powercontrol.game import from_db
from scripts.powercontrol.stats import (
    cdf,
    dec_beta_distribution,
    dec_gaussian_distribution,
    empirical_cdf,
    empirical_p_delta,
    evaluate_cdf,
    gaussian_variance,
    ks_distance,
    mean,
    mmse_gaussian_distribution,
    p_delta,
    pdf,
    quantile,
)

GAMMA = 6.4

# (receiver, alpha, n) -> P(SIR within 1 dB of 6.4) under the Gaussian law
GAUSSIAN_P_DELTA = {
    ("dec", 0.25, 16): 0.741,
    ("dec", 0.25, 64): 0.9725,
    ("dec", 0.75, 16): 0.2953,
    ("dec", 0.75, 64): 0.5502,
    ("dec", 0.75, 256): 0.865,
    ("mmse", 0.25, 16): 0.4455,
    ("mmse", 0.25, 64): 0.7596,
    ("mmse", 0.25, 256): 0.978,
    ("mmse", 0.75, 16): 0.336,
    ("mmse", 0.75, 64): 0.6137,
    ("mmse", 0.75, 256): 0.9123,
}


class GaussianLawTests(unittest.TestCase):
    def test_variances(self) -> None:
        self.assertAlmostEqual(gaussian_variance("dec", GAMMA, 0.25, 64), 0.42667, places=5)
        self.assertAlmostEqual(gaussian_variance("mmse", GAMMA, 0.75, 256), 0.7289, places=4)

    def test_p_delta_reference_cells(self) -> None:
        for (receiver, alpha, n), expected in GAUSSIAN_P_DELTA.items():
            k = int(round(alpha * n))
            law = dec_gaussian_distribution(n, k, GAMMA) if receiver == "dec" else mmse_gaussian_distribution(n, k, GAMMA)
            self.assertAlmostEqual(p_delta(law, GAMMA, 1.0), expected, delta=3e-3, msg=f"{receiver} {alpha} {n}")

    def test_p_delta_grows_with_processing_gain(self) -> None:
        values = [p_delta(mmse_gaussian_distribution(n, n // 4, GAMMA), GAMMA, 1.0) for n in (16, 64, 256)]
        self.assertTrue(values[0] < values[1] < values[2])

    def test_invalid_loads(self) -> None:
        with self.assertRaises(InvalidLoad):
            gaussian_variance("dec", GAMMA, 1.0, 64)
        with self.assertRaises(ValueError):
            gaussian_variance("mf", GAMMA, 0.5, 64)

    def test_window_must_be_positive(self) -> None:
        with self.assertRaises(ValueError):
            p_delta(dec_gaussian_distribution(64, 16, GAMMA), GAMMA, 0.0)


class BetaLawTests(unittest.TestCase):
    def test_shape_and_scale(self) -> None:
        law = dec_beta_distribution(64, 16, GAMMA)
        self.assertEqual((law.a, law.b), (49.0, 15.0))
        self.assertAlmostEqual(law.scale, GAMMA / 0.75)
        self.assertAlmostEqual(mean(law), GAMMA * 49.0 / 48.0)

    def test_matches_scipy_beta(self) -> None:
        for n, k in ((16, 4), (16, 12), (64, 48), (256, 64)):
            law = dec_beta_distribution(n, k, GAMMA)
            frozen = sps.beta(n - k + 1, k - 1, scale=law.scale)
            low, high = GAMMA * float(from_db(-1.0)), GAMMA * float(from_db(1.0))
            self.assertAlmostEqual(p_delta(law, GAMMA, 1.0), frozen.cdf(high) - frozen.cdf(low), places=10)
            self.assertAlmostEqual(pdf(law, GAMMA), frozen.pdf(GAMMA), places=10)

    def test_small_cells(self) -> None:
        self.assertAlmostEqual(p_delta(dec_beta_distribution(16, 4, GAMMA), GAMMA, 1.0), 0.927, delta=1e-2)
        self.assertAlmostEqual(p_delta(dec_beta_distribution(16, 12, GAMMA), GAMMA, 1.0), 0.374, delta=1e-2)

    def test_requires_two_users_and_spare_dimensions(self) -> None:
        with self.assertRaises(InvalidShape):
            dec_beta_distribution(16, 1, GAMMA)
        with self.assertRaises(InvalidShape):
            dec_beta_distribution(16, 16, GAMMA)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.01, max_value=0.99))
    def test_quantile_inverts_cdf(self, level: float) -> None:
        for law in (dec_beta_distribution(64, 16, GAMMA), mmse_gaussian_distribution(64, 16, GAMMA)):
            self.assertAlmostEqual(cdf(law, quantile(law, level)), level, places=8)


class EmpiricalTests(unittest.TestCase):
    def test_step_function(self) -> None:
        ecdf = empirical_cdf([3.0, 1.0, 2.0, 2.0])
        np.testing.assert_array_equal(ecdf.values, [1.0, 2.0, 2.0, 3.0])
        np.testing.assert_allclose(evaluate_cdf(ecdf, [0.5, 1.0, 2.0, 2.5, 3.0]), [0.0, 0.25, 0.75, 0.75, 1.0])

    def test_empty_sample(self) -> None:
        with self.assertRaises(EmptySample):
            empirical_cdf([])
        with self.assertRaises(EmptySample):
            empirical_p_delta([], GAMMA, 1.0)

    def test_ks_distance_against_scipy(self) -> None:
        law = dec_gaussian_distribution(64, 16, GAMMA)
        samples = np.random.default_rng(0).normal(GAMMA, 0.8, size=500)
        expected = sps.kstest(samples, "norm", args=(GAMMA, np.sqrt(law.variance))).statistic
        self.assertAlmostEqual(ks_distance(samples, law), expected, places=10)

    def test_ks_distance_small_for_own_law(self) -> None:
        law = mmse_gaussian_distribution(256, 64, GAMMA)
        samples = np.random.default_rng(1).normal(law.mean, np.sqrt(law.variance), size=4000)
        self.assertLess(ks_distance(empirical_cdf(samples), law), 0.03)

    def test_empirical_p_delta(self) -> None:
        samples = np.array([GAMMA, GAMMA * 1.1, GAMMA * 2.0, GAMMA * 0.5])
        p, stderr = empirical_p_delta(samples, GAMMA, 1.0)
        self.assertEqual(p, 0.5)
        self.assertAlmostEqual(stderr, 0.25)


if __name__ == "__main__":
    unittest.main()
