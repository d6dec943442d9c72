from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Optional

from scripts.numeric_common import db

from .cli_args import config_overrides, parse_args, parse_snr_spec, validate_args
from .config import apply_overrides, experiment_config, load_config
from .efficiency import efficiency
from .errors import PowerControlError
from .experiments import run_experiment, theory_rows
from .game import target_sir
from .models import EfficiencyFunction, ExperimentConfig, FixedPointSettings
from .report import render_result_summary, render_sif_report, render_theory_table
from .run_state import safe_error_text
from .upc import sif_property_harness


def log(tag: str, message: str) -> None:
    print(f"[{tag}] {message}")


def _stderr_error(error_type: str, message: str, details: Optional[dict[str, Any]] = None) -> None:
    payload: dict[str, Any] = {
        "error_type": error_type,
        "message": message,
    }
    if details:
        payload["details"] = details
    print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)


def _raw_config(args: argparse.Namespace, experiment: Optional[str] = None) -> dict[str, dict[str, Any]]:
    path = Path(args.config).expanduser() if args.config else None
    return apply_overrides(load_config(path), config_overrides(args, experiment))


def load_experiment_config(args: argparse.Namespace, experiment: Optional[str] = None) -> ExperimentConfig:
    return experiment_config(_raw_config(args, experiment))


def cmd_efficiency(args: argparse.Namespace) -> int:
    base = load_experiment_config(args).solver
    settings = FixedPointSettings(
        tol=args.tol,
        max_iters=args.max_iters or base.max_iters,
        quadrature_nodes=args.quadrature_nodes or base.quadrature_nodes,
        damping=base.damping,
        check_restarts=base.check_restarts,
    )
    profile = parse_snr_spec(args.snr, args.alpha)
    result = efficiency(args.receiver, profile, settings)
    print(f"[efficiency] {result.iterations} fixed-point iterations", file=sys.stderr)
    if result.ambiguous:
        print(
            f"[efficiency] warning: restart from a small start converged to {result.alternate_eta:.10f}",
            file=sys.stderr,
        )
    print(f"{result.eta:.10f}")
    return 0


def cmd_target_sir(args: argparse.Namespace) -> int:
    game = _raw_config(args)["game"]
    eff = EfficiencyFunction(
        m_bits=int(game["packet_bits"]),
        l_bits=int(game["info_bits"]),
        rate=float(game["rate"]),
    )
    gamma = target_sir(eff).gamma_star
    print(f"gamma_star = {gamma:.6f} ({db(gamma):.2f} dB)")
    return 0


def _run(args: argparse.Namespace, experiment: str, tag: str) -> int:
    config = load_experiment_config(args, experiment)
    log(tag, f"running {experiment} with seed={config.seed}, workers={config.workers}")
    result = run_experiment(config)
    print(render_result_summary(result))
    return 0


def cmd_upc(args: argparse.Namespace) -> int:
    return _run(args, "fig1", "upc")


def cmd_table1(args: argparse.Namespace) -> int:
    return _run(args, "table1", "table1")


def cmd_cdf(args: argparse.Namespace) -> int:
    return _run(args, "cdf", "cdf")


def cmd_sir_ber(args: argparse.Namespace) -> int:
    return _run(args, "fig2", "sir-ber")


def cmd_sif_check(args: argparse.Namespace) -> int:
    config = load_experiment_config(args)
    report = sif_property_harness(
        args.receiver,
        args.trials,
        config.seed,
        gamma_star=args.gamma_star,
        settings=config.solver,
    )
    print(render_sif_report(report))
    return 0 if report.passed() else 1


def cmd_beta_table(args: argparse.Namespace) -> int:
    config = load_experiment_config(args)
    print(render_theory_table(theory_rows(config)))
    return 0


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "efficiency": cmd_efficiency,
    "target-sir": cmd_target_sir,
    "upc": cmd_upc,
    "table1": cmd_table1,
    "cdf": cmd_cdf,
    "sir-ber": cmd_sir_ber,
    "sif-check": cmd_sif_check,
    "beta-table": cmd_beta_table,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        validate_args(args)
    except ValueError as exc:
        _stderr_error("invalid_argument", str(exc))
        return 2

    try:
        return COMMANDS[args.command](args)
    except PowerControlError as exc:
        _stderr_error(
            exc.error_type,
            exc.message,
            {"exception": type(exc).__name__, **exc.details},
        )
        return exc.exit_code
    except ValueError as exc:
        _stderr_error("invalid_argument", str(exc))
        return 2
    except OSError as exc:
        _stderr_error("io_error", safe_error_text(exc))
        return 4
    except KeyboardInterrupt:
        print("[power_control] interrupted", file=sys.stderr)
        return 130
