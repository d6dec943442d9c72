from __future__ import annotations

import contextlib
import io
import json
import pathlib
import tempfile
import unittest

from scripts.powercontrol.cli import main
from scripts.powercontrol.cli_args import parse_snr_spec


def run_cli(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = main(argv)
    return rc, out.getvalue(), err.getvalue()


class EfficiencyCommandTests(unittest.TestCase):
    def test_mmse_equal_profile(self) -> None:
        rc, out, err = run_cli(["efficiency", "--receiver", "mmse", "--alpha", "0.5", "--snr", "equal:10"])
        self.assertEqual(rc, 0)
        self.assertEqual(out.strip(), "0.5741657387")
        self.assertRegex(err, r"\[efficiency\] [1-9]\d* fixed-point iterations")

    def test_decorrelator_prints_ten_digits(self) -> None:
        rc, out, _ = run_cli(["efficiency", "--receiver", "dec", "--alpha", "0.25"])
        self.assertEqual(rc, 0)
        self.assertEqual(out.strip(), "0.7500000000")

    def test_help_exits_cleanly(self) -> None:
        with self.assertRaises(SystemExit) as ctx:
            run_cli(["upc", "--help"])
        self.assertEqual(ctx.exception.code, 0)

    def test_overloaded_decorrelator_exit_code(self) -> None:
        rc, _, err = run_cli(["efficiency", "--receiver", "dec", "--alpha", "1.2"])
        self.assertEqual(rc, 3)
        payload = json.loads(err.strip().splitlines()[-1])
        self.assertEqual(payload["error_type"], "load_too_high")
        self.assertEqual(payload["details"]["exception"], "LoadTooHigh")

    def test_invalid_arguments(self) -> None:
        rc, _, err = run_cli(["efficiency", "--receiver", "mmse", "--alpha", "-1"])
        self.assertEqual(rc, 2)
        self.assertIn("invalid_argument", err)
        rc, _, _ = run_cli(["efficiency", "--receiver", "rake", "--alpha", "0.5"])
        self.assertEqual(rc, 2)

    def test_missing_config_file(self) -> None:
        rc, _, err = run_cli(
            ["efficiency", "--receiver", "mf", "--alpha", "0.5", "--config", "/nonexistent/run.toml"]
        )
        self.assertEqual(rc, 4)
        self.assertIn("io_error", err)

    def test_snr_profile_from_csv(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "snr.csv"
            path.write_text("snr\n2.0\n4.0\n6.0\n", encoding="utf-8")
            profile = parse_snr_spec(str(path), 0.5)
            rc, out, _ = run_cli(["efficiency", "--receiver", "mf", "--alpha", "0.5", "--snr", str(path)])
        self.assertEqual(profile.users, 3)
        self.assertEqual(rc, 0)
        self.assertAlmostEqual(float(out), 1.0 / 3.0, places=9)

    def test_bad_snr_spec(self) -> None:
        with self.assertRaises(ValueError):
            parse_snr_spec("equal:loud", 0.5)


class CommandTests(unittest.TestCase):
    def test_target_sir(self) -> None:
        rc, out, _ = run_cli(["target-sir"])
        self.assertEqual(rc, 0)
        self.assertTrue(out.startswith("gamma_star = 6.474"), out)
        self.assertIn("(8.11 dB)", out)

    def test_single_bit_packets_exit_code(self) -> None:
        rc, _, err = run_cli(["target-sir", "--packet-bits", "1", "--info-bits", "1"])
        self.assertEqual(rc, 3)
        self.assertIn("degenerate_efficiency_function", err)

    def test_packet_bits_alone_sets_information_bits(self) -> None:
        rc, _, err = run_cli(["target-sir", "--packet-bits", "1"])
        self.assertEqual(rc, 3)
        self.assertIn("degenerate_efficiency_function", err)
        rc, out, _ = run_cli(["target-sir", "--packet-bits", "2"])
        self.assertEqual(rc, 0)
        self.assertTrue(out.startswith("gamma_star = 1.256"), out)

    def test_single_information_bit_rejected(self) -> None:
        rc, _, err = run_cli(["target-sir", "--info-bits", "1"])
        self.assertEqual(rc, 2)
        self.assertIn("info_bits must be at least 2", err)

    def test_sif_check(self) -> None:
        rc, out, _ = run_cli(["sif-check", "--receiver", "mmse", "--trials", "25"])
        self.assertEqual(rc, 0)
        self.assertIn("scalability: PASS", out)

    def test_beta_table(self) -> None:
        rc, out, _ = run_cli(["beta-table", "--gamma-star", "6.4"])
        self.assertEqual(rc, 0)
        lines = out.strip().splitlines()
        self.assertIn("dec_beta", lines[0])
        self.assertEqual(len(lines), 7)

    def test_table1_writes_result_set(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            config = pathlib.Path(tmp) / "small.toml"
            config.write_text(
                '[experiment]\nreceivers = ["dec"]\nn_values = [16]\nalpha_values = [0.25]\n',
                encoding="utf-8",
            )
            rc, out, _ = run_cli(
                [
                    "table1",
                    "--config",
                    str(config),
                    "--gamma-star",
                    "6.4",
                    "--realizations",
                    "20",
                    "--workers",
                    "1",
                    "--output-dir",
                    tmp,
                ]
            )
            runs = list((pathlib.Path(tmp) / "table1").iterdir())
        self.assertEqual(rc, 0)
        self.assertIn("[table1] running table1 with seed=0, workers=1", out)
        self.assertIn("experiment: table1", out)
        self.assertEqual(len(runs), 1)

    def test_config_error_exit_code(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            config = pathlib.Path(tmp) / "bad.toml"
            config.write_text("[system]\nprocessing_gain = 64\n", encoding="utf-8")
            rc, _, err = run_cli(["upc", "--config", str(config)])
        self.assertEqual(rc, 2)
        self.assertIn("config_error", err)


if __name__ == "__main__":
    unittest.main()
