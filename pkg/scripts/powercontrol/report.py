from __future__ import annotations

from typing import Any, Optional

from scripts.numeric_common import db

from .models import ResultSet
from .upc import SifReport


def compact_text(value: Optional[str], max_chars: int = 220) -> str:
    if not value:
        return ""
    collapsed = " ".join(value.split())
    if len(collapsed) <= max_chars:
        return collapsed
    return collapsed[: max_chars - 3] + "..."


def _cell(value: Any, digits: int = 3) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_theory_table(rows: list[dict[str, Any]]) -> str:
    lines = ["  N    K  alpha  dec_beta  dec_norm  mmse_norm"]
    for row in rows:
        lines.append(
            f"{row['n']:>3} {row['k']:>4}  {row['alpha']:.2f}   "
            f"{_cell(row['dec_beta'], 2):>6}    {_cell(row['dec_norm'], 2):>6}     {_cell(row['mmse_norm'], 2):>6}"
        )
    return "\n".join(lines)


def _render_fig1(result: ResultSet) -> list[str]:
    lines: list[str] = []
    by_receiver: dict[str, list[dict[str, Any]]] = {}
    for row in result.tables.get("steady_state", []):
        by_receiver.setdefault(str(row["receiver"]), []).append(row)
    for receiver, rows in by_receiver.items():
        iterations = rows[0]["iterations"]
        lines.append(f"{receiver}: converged in {iterations} iterations, eta={rows[0]['eta']:.6f}")
        for row in rows:
            lines.append(
                f"  user {row['user']}: p={row['power_watts']:.4e} W  "
                f"SNR={db(row['snr']):.2f} dB  SIR={row['sir']:.6f}"
            )
    for row in result.tables.get("power_gap", []):
        lines.append(
            f"gap {row['receiver']} vs {row['reference']}: {100 * row['max_relative_gap']:.1f}%"
        )
    return lines


def _render_table1(result: ResultSet) -> list[str]:
    lines = ["receiver    N    K  alpha   sim (+-se)      beta   norm  resampled"]
    for row in result.tables.get("p_delta", []):
        lines.append(
            f"{row['receiver']:<8} {row['n']:>4} {row['k']:>4}  {row['alpha']:.2f}   "
            f"{row['sim']:.3f} ({row['sim_stderr']:.3f})  {_cell(row['beta'], 2):>5}  "
            f"{_cell(row['norm'], 2):>5}  {row['resampled']:>5}"
        )
    return lines


def _render_cdf(result: ResultSet) -> list[str]:
    lines = ["receiver    N    K  alpha  ks_beta  ks_gaussian  max_sir"]
    for row in result.tables.get("ks", []):
        lines.append(
            f"{row['receiver']:<8} {row['n']:>4} {row['k']:>4}  {row['alpha']:.2f}  "
            f"{_cell(row['ks_beta'], 4):>7}  {_cell(row['ks_gaussian'], 4):>11}  {row['max_sir']:.3f}"
        )
    return lines


def _render_series(result: ResultSet) -> list[str]:
    lines: list[str] = []
    for row in result.tables.get("sir_ber_summary", []):
        lines.append(
            f"{row['receiver']}: UPC mean SIR {row['upc_mean_sir']:.4f} "
            f"(P_delta {row['upc_p_delta']:.3f}, utility ratio {row['upc_mean_utility_ratio']:.3f}), "
            f"BER mc={row['upc_ber_mc']:.3e} gauss={row['upc_ber_gaussian']:.3e}"
        )
        lines.append(
            f"{' ' * len(str(row['receiver']))}  balanced mean SIR {row['baseline_mean_sir']:.4f}, "
            f"BER mc={row['baseline_ber_mc']:.3e} gauss={row['baseline_ber_gaussian']:.3e}, "
            f"power ratio {row['baseline_mean_power_ratio']:.3f}"
        )
    return lines


_RENDERERS = {
    "fig1": _render_fig1,
    "table1": _render_table1,
    "cdf": _render_cdf,
    "fig2": _render_series,
}


def render_result_summary(result: ResultSet) -> str:
    lines = [f"experiment: {result.experiment}"]
    if result.run_dir is not None:
        lines.append(f"results: {result.run_dir}")
    gamma_star = result.manifest.get("gamma_star")
    if isinstance(gamma_star, (int, float)):
        lines.append(f"gamma_star: {gamma_star:.6f} ({db(gamma_star):.2f} dB)")
    resamples = result.manifest.get("resample_counts") or {}
    total = sum(int(v) for v in resamples.values())
    if total:
        lines.append(f"singular spreading draws redrawn: {total}")
    lines.append("")
    renderer = _RENDERERS.get(result.experiment)
    if renderer is not None:
        lines.extend(renderer(result))
    return "\n".join(lines)


def render_sif_report(report: SifReport, max_examples: int = 3) -> str:
    lines = [report.summary()]
    for prop, rows in report.failures.items():
        for row in rows[:max_examples]:
            lines.append(f"- {prop} counterexample: {compact_text(repr(row))}")
    return "\n".join(lines)
