from __future__ import annotations

import argparse
import csv
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

from .models import SnrProfile


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=None,
        help="TOML config file (sections: system, gains, game, upc, solver, experiment).",
    )
    common.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Master seed; every realization derives its own stream from it.",
    )
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes for Monte Carlo realizations (0 = all cores).",
    )
    common.add_argument(
        "--output-dir",
        default=None,
        help="Root directory for result sets (default: results).",
    )
    return common


def _add_gamma_star(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--gamma-star",
        type=float,
        default=None,
        help="Force the target SIR (linear) instead of solving it from the packet size.",
    )


def _add_monte_carlo(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--realizations",
        type=int,
        default=None,
        help="Spreading-sequence draws per cell.",
    )
    parser.add_argument(
        "--delta-db",
        type=float,
        default=None,
        help="Half-width in dB of the SIR window around the target.",
    )


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="power_control",
        description="Energy-efficient power control for large randomly spread CDMA systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    eff = sub.add_parser(
        "efficiency",
        parents=[common],
        help="Solve the large-system multiuser efficiency for one receiver.",
    )
    eff.add_argument("--receiver", required=True, help="mf|dec|mmse|io|ml")
    eff.add_argument("--alpha", type=float, required=True, help="Load K/N.")
    eff.add_argument(
        "--snr",
        default="equal:1",
        help="'equal:<snr>' for a point-mass profile or a CSV file of per-user linear SNRs.",
    )
    eff.add_argument("--tol", type=float, default=1e-13, help="Relative fixed-point tolerance.")
    eff.add_argument("--max-iters", type=int, default=None, help="Fixed-point iteration cap.")
    eff.add_argument(
        "--quadrature-nodes",
        type=int,
        default=None,
        help="Gauss-Hermite nodes for the individually optimal receiver.",
    )

    tsir = sub.add_parser(
        "target-sir",
        parents=[common],
        help="Nash-equilibrium target SIR for (1 - exp(-gamma))^M.",
    )
    tsir.add_argument("--packet-bits", type=int, default=None, help="Packet size M in bits.")
    tsir.add_argument(
        "--info-bits",
        type=int,
        default=None,
        help="Information bits L per packet (defaults to --packet-bits when only that flag is given).",
    )
    tsir.add_argument("--rate", type=float, default=None, help="Transmission rate R in bits/s.")

    upc = sub.add_parser(
        "upc",
        parents=[common],
        help="Run unified power control for each configured receiver and save the power traces.",
    )
    upc.add_argument(
        "--receiver",
        action="append",
        default=None,
        help="Receiver to run (repeatable; default: config receivers).",
    )
    _add_gamma_star(upc)
    upc.add_argument("--p-max", type=float, default=None, help="Per-user power cap in watts.")
    upc.add_argument("--initial-power", type=float, default=None, help="Starting power in watts.")

    table1 = sub.add_parser(
        "table1",
        parents=[common],
        help="Monte Carlo and closed-form probabilities of landing within delta dB of the target.",
    )
    _add_gamma_star(table1)
    _add_monte_carlo(table1)

    cdf = sub.add_parser(
        "cdf",
        parents=[common],
        help="Empirical SIR CDFs against the beta and Gaussian models.",
    )
    _add_gamma_star(cdf)
    _add_monte_carlo(cdf)

    series = sub.add_parser(
        "sir-ber",
        parents=[common],
        help="Per-draw SIR and BER with fixed UPC powers against per-draw balanced powers.",
    )
    series.add_argument(
        "--receiver",
        action="append",
        default=None,
        help="Linear receiver to run (repeatable; default: config receivers).",
    )
    _add_gamma_star(series)
    _add_monte_carlo(series)
    series.add_argument("--symbols", type=int, default=None, help="Symbols sent per spreading draw.")

    sif = sub.add_parser(
        "sif-check",
        parents=[common],
        help="Randomized positivity, monotonicity and scalability check of gamma*/eta.",
    )
    sif.add_argument("--receiver", required=True, help="mf|dec|mmse")
    sif.add_argument("--trials", type=int, default=1000, help="Randomized profiles to test.")
    sif.add_argument("--gamma-star", type=float, default=6.4, help="Target SIR used by the check.")

    beta = sub.add_parser(
        "beta-table",
        parents=[common],
        help="Closed-form beta and Gaussian P_delta columns only (no Monte Carlo).",
    )
    _add_gamma_star(beta)
    beta.add_argument("--delta-db", type=float, default=None, help="Half-width in dB.")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def validate_args(args: argparse.Namespace) -> None:
    def positive(name: str) -> None:
        value = getattr(args, name, None)
        if value is not None and not value > 0:
            raise ValueError(f"--{name.replace('_', '-')} must be > 0.")

    for name in (
        "alpha",
        "tol",
        "max_iters",
        "gamma_star",
        "p_max",
        "initial_power",
        "realizations",
        "delta_db",
        "symbols",
        "trials",
        "packet_bits",
        "info_bits",
        "rate",
    ):
        positive(name)
    if args.workers is not None and args.workers < 0:
        raise ValueError("--workers must be >= 0.")
    if args.seed is not None and args.seed < 0:
        raise ValueError("--seed must be >= 0.")
    nodes = getattr(args, "quadrature_nodes", None)
    if nodes is not None and nodes < 8:
        raise ValueError("--quadrature-nodes must be at least 8.")


def parse_snr_spec(spec: str, alpha: float) -> SnrProfile:
    """'equal:<snr>' or a path to a CSV file holding one or more columns of linear SNRs."""
    text = spec.strip()
    if text.startswith("equal:"):
        raw = text.split(":", 1)[1]
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"Invalid SNR spec '{spec}'. Expected 'equal:<snr>'.") from None
        return SnrProfile([value], alpha)

    values: list[float] = []
    with Path(text).expanduser().open("r", encoding="utf-8", newline="") as fh:
        for record in csv.reader(fh):
            for cell in record:
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    if values:
                        raise ValueError(f"non-numeric SNR '{cell}' in {text}") from None
                    # header row
    if not values:
        raise ValueError(f"no SNR values found in {text}")
    return SnrProfile(values, alpha)


def config_overrides(args: argparse.Namespace, experiment: Optional[str] = None) -> dict[str, dict[str, Any]]:
    """Map flags onto config sections; unset flags are None and leave the file value alone."""

    def flag(name: str) -> Any:
        return getattr(args, name, None)

    receivers = flag("receiver") if isinstance(flag("receiver"), list) else None
    info_bits = flag("info_bits")
    if info_bits is None:
        info_bits = flag("packet_bits")
    return {
        "game": {
            "gamma_star": flag("gamma_star"),
            "packet_bits": flag("packet_bits"),
            "info_bits": info_bits,
            "rate": flag("rate"),
        },
        "upc": {
            "p_max": flag("p_max"),
            "initial_power": flag("initial_power"),
        },
        "experiment": {
            "name": experiment,
            "receivers": receivers,
            "seed": flag("seed"),
            "workers": flag("workers"),
            "output_dir": flag("output_dir"),
            "realizations": flag("realizations"),
            "delta_db": flag("delta_db"),
            "symbols": flag("symbols"),
        },
    }
