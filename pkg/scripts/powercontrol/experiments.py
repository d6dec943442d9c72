"""Seeded experiment runners: power traces, SIR/BER series, SIR CDFs and P_delta tables."""

from __future__ import annotations

import functools
from collections.abc import Callable
from pathlib import Path
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from .config import config_as_dict
from .errors import Infeasible, SingularGram
from .game import equilibrium_utility, target_sir, utility_loss_ratio
from .models import (
    EfficiencyFunction,
    ExperimentConfig,
    Receiver,
    ResultSet,
    SystemParams,
)
from .realizations import run_realizations
from .run_state import (
    EVENTS_NAME,
    EventEmitter,
    EventSink,
    config_hash,
    make_run_dir,
    now_iso,
    package_versions,
    write_result_set,
)
from .stats import (
    cdf,
    dec_beta_distribution,
    dec_gaussian_distribution,
    empirical_cdf,
    empirical_p_delta,
    evaluate_cdf,
    ks_distance,
    mmse_gaussian_distribution,
    p_delta,
)
from .system import balance_true_sirs, draw_spreading, gaussian_ber, linear_sirs, simulate_symbol
from .upc import balanced_powers, path_loss_gains, power_trace_rows, run_upc

STATISTICS_RECEIVERS = (Receiver.DECORRELATOR, Receiver.MMSE)
RECEIVER_CODES = {r: i for i, r in enumerate(Receiver)}
MAX_RESAMPLES = 100
CDF_GRID_POINTS = 201

# stream prefixes keep the experiments' random numbers disjoint
TABLE1_STREAM = 1
CDF_STREAM = 2
SERIES_STREAM = 3


def resolve_gamma_star(config: ExperimentConfig) -> float:
    if config.gamma_star is not None:
        return config.gamma_star
    eff = EfficiencyFunction(config.packet_bits, config.info_bits, config.rate)
    return target_sir(eff).gamma_star


def efficiency_function(config: ExperimentConfig) -> EfficiencyFunction:
    return EfficiencyFunction(config.packet_bits, config.info_bits, config.rate)


def system_params(config: ExperimentConfig) -> SystemParams:
    g = config.gains
    gains = path_loss_gains(
        config.k,
        g.coefficient,
        g.exponent,
        g.base_distance,
        g.step_distance,
        distances=g.distances,
    )
    return SystemParams(gains, config.noise_var, config.k / config.n, config.p_max)


def _cell_users(n: int, alpha: float) -> int:
    k = int(round(alpha * n))
    if k < 2 or k >= n:
        raise ValueError(f"load {alpha} at N={n} gives K={k}; need 2 <= K < N.")
    return k


def _stream(prefix: int, n: int, alpha: float, receiver: Receiver) -> tuple[int, int, int, int]:
    return (prefix, n, int(round(alpha * 1_000_000)), RECEIVER_CODES[receiver])


def _statistics_receivers(config: ExperimentConfig) -> tuple[Receiver, ...]:
    chosen = tuple(r for r in config.receivers if r in STATISTICS_RECEIVERS)
    if not chosen:
        raise ValueError("this experiment needs at least one of the dec or mmse receivers.")
    return chosen


def draw_linear_sirs(
    index: int,
    seed: np.random.SeedSequence,
    *,
    n: int,
    k: int,
    receiver: Receiver,
    snrs: NDArray[np.float64],
    chips: str,
) -> tuple[NDArray[np.float64], int]:
    """Per-user SIRs on one spreading draw; singular draws are redrawn from the same stream and counted."""
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_RESAMPLES + 1):
        spreading = draw_spreading(rng, n, k, chips)
        try:
            return linear_sirs(receiver, spreading, snrs), attempt
        except SingularGram:
            continue
    raise SingularGram(
        f"realization {index} stayed singular after {MAX_RESAMPLES} redraws",
        {"index": index, "n": n, "k": k},
    )


def _sir_samples(
    config: ExperimentConfig,
    *,
    prefix: int,
    n: int,
    alpha: float,
    receiver: Receiver,
    snrs: NDArray[np.float64],
) -> tuple[NDArray[np.float64], int]:
    task = functools.partial(
        draw_linear_sirs, n=n, k=snrs.size, receiver=receiver, snrs=snrs, chips=config.chips
    )
    draws = run_realizations(
        task,
        config.realizations,
        master_seed=config.seed,
        stream=_stream(prefix, n, alpha, receiver),
        workers=config.workers,
    )
    samples = np.concatenate([sirs for sirs, _ in draws])
    return samples, sum(resampled for _, resampled in draws)


def balanced_equal_snr(
    config: ExperimentConfig,
    receiver: Receiver,
    n: int,
    k: int,
    gamma_star: float,
) -> NDArray[np.float64]:
    """UPC-converged SNRs for K equal-gain users at load K/N (unit gain and noise, so SNR = power)."""
    params = SystemParams(np.ones(k), 1.0, k / n)
    state = run_upc(
        np.ones(k),
        params,
        receiver,
        gamma_star,
        tol=config.upc_tol,
        max_iters=config.upc_max_iters,
        divergence_factor=config.divergence_factor,
        settings=config.solver,
    )
    return state.powers


def theory_rows(config: ExperimentConfig) -> list[dict[str, Any]]:
    gamma_star = resolve_gamma_star(config)
    rows: list[dict[str, Any]] = []
    for alpha in config.alpha_values:
        for n in config.n_values:
            k = _cell_users(n, alpha)
            rows.append(
                {
                    "n": n,
                    "k": k,
                    "alpha": alpha,
                    "dec_beta": p_delta(dec_beta_distribution(n, k, gamma_star), gamma_star, config.delta_db),
                    "dec_norm": p_delta(dec_gaussian_distribution(n, k, gamma_star), gamma_star, config.delta_db),
                    "mmse_norm": p_delta(mmse_gaussian_distribution(n, k, gamma_star), gamma_star, config.delta_db),
                }
            )
    return rows


def _closed_form_powers(
    params: SystemParams, receiver: Receiver, gamma_star: float
) -> Optional[NDArray[np.float64]]:
    # linear receivers only; ml has no closed form and an infeasible load has no balance point
    if not receiver.is_linear:
        return None
    try:
        return balanced_powers(params, receiver, gamma_star)
    except Infeasible:
        return None


def run_fig1(config: ExperimentConfig, events: Optional[EventEmitter] = None) -> ResultSet:
    gamma_star = resolve_gamma_star(config)
    params = system_params(config)
    eff = efficiency_function(config)
    initial = np.full(params.users, config.initial_power)

    trace: list[dict[str, Any]] = []
    steady: list[dict[str, Any]] = []
    finals: dict[Receiver, NDArray[np.float64]] = {}
    for receiver in config.receivers:
        state = run_upc(
            initial,
            params,
            receiver,
            gamma_star,
            tol=config.upc_tol,
            max_iters=config.upc_max_iters,
            divergence_factor=config.divergence_factor,
            settings=config.solver,
            events=events,
        )
        finals[receiver] = state.powers
        for row in power_trace_rows(state):
            trace.append({"receiver": receiver.value, **row})
        eta = state.eta_trace[-1]
        utilities = equilibrium_utility(eff, gamma_star, state.powers)
        snrs = params.snrs(state.powers)
        closed_form = _closed_form_powers(params, receiver, gamma_star)
        for user, power in enumerate(state.powers):
            steady.append(
                {
                    "receiver": receiver.value,
                    "user": user,
                    "power_watts": float(power),
                    "snr": float(snrs[user]),
                    "sir": float(eta * snrs[user]),
                    "eta": eta,
                    "iterations": state.n,
                    "capped": user in state.capped_users,
                    "utility_bits_per_joule": float(utilities[user]),
                    "closed_form_power_watts": None if closed_form is None else float(closed_form[user]),
                }
            )

    gaps: list[dict[str, Any]] = []
    reference = Receiver.JOINTLY_OPTIMAL_ML
    if reference in finals:
        ref_powers = finals[reference]
        for receiver, powers in finals.items():
            if receiver is reference:
                continue
            gap = float(np.max(np.abs(powers - ref_powers) / powers))
            gaps.append({"receiver": receiver.value, "reference": reference.value, "max_relative_gap": gap})
            if events is not None:
                events.emit(
                    "power_gap",
                    f"{receiver.value} steady-state powers within {100 * gap:.1f}% of {reference.value}",
                    receiver=receiver.value,
                    max_relative_gap=gap,
                )
    return ResultSet(
        experiment="fig1",
        tables={"power_trace": trace, "steady_state": steady, "power_gap": gaps},
        manifest={"gamma_star": gamma_star},
    )


def run_table1(config: ExperimentConfig, events: Optional[EventEmitter] = None) -> ResultSet:
    gamma_star = resolve_gamma_star(config)
    theory = {(row["n"], row["alpha"]): row for row in theory_rows(config)}
    rows: list[dict[str, Any]] = []
    resamples: dict[str, int] = {}
    for receiver in _statistics_receivers(config):
        for alpha in config.alpha_values:
            for n in config.n_values:
                k = _cell_users(n, alpha)
                snrs = balanced_equal_snr(config, receiver, n, k, gamma_star)
                samples, resampled = _sir_samples(
                    config, prefix=TABLE1_STREAM, n=n, alpha=alpha, receiver=receiver, snrs=snrs
                )
                sim, stderr = empirical_p_delta(samples, gamma_star, config.delta_db)
                cell = theory[(n, alpha)]
                is_dec = receiver is Receiver.DECORRELATOR
                rows.append(
                    {
                        "receiver": receiver.value,
                        "n": n,
                        "k": k,
                        "alpha": alpha,
                        "sim": sim,
                        "sim_stderr": stderr,
                        "beta": cell["dec_beta"] if is_dec else None,
                        "norm": cell["dec_norm"] if is_dec else cell["mmse_norm"],
                        "balanced_snr": float(snrs[0]),
                        "samples": int(samples.size),
                        "resampled": resampled,
                    }
                )
                resamples[f"{receiver.value}/n={n}/alpha={alpha}"] = resampled
                if events is not None:
                    events.emit(
                        "table1_cell",
                        f"{receiver.value} N={n} alpha={alpha}: sim={sim:.3f} norm={rows[-1]['norm']:.3f}",
                        receiver=receiver.value,
                        n=n,
                        alpha=alpha,
                        sim=sim,
                        resampled=resampled,
                    )
    return ResultSet(
        experiment="table1",
        tables={"p_delta": rows},
        manifest={"gamma_star": gamma_star, "resample_counts": resamples},
    )


def run_cdf(config: ExperimentConfig, events: Optional[EventEmitter] = None) -> ResultSet:
    gamma_star = resolve_gamma_star(config)
    curves: list[dict[str, Any]] = []
    distances: list[dict[str, Any]] = []
    resamples: dict[str, int] = {}
    for receiver in _statistics_receivers(config):
        for alpha in config.alpha_values:
            for n in config.n_values:
                k = _cell_users(n, alpha)
                snrs = balanced_equal_snr(config, receiver, n, k, gamma_star)
                samples, resampled = _sir_samples(
                    config, prefix=CDF_STREAM, n=n, alpha=alpha, receiver=receiver, snrs=snrs
                )
                ecdf = empirical_cdf(samples)
                gaussian = (
                    dec_gaussian_distribution(n, k, gamma_star)
                    if receiver is Receiver.DECORRELATOR
                    else mmse_gaussian_distribution(n, k, gamma_star)
                )
                beta = dec_beta_distribution(n, k, gamma_star) if receiver is Receiver.DECORRELATOR else None
                ks_gauss = ks_distance(ecdf, gaussian)
                ks_beta = ks_distance(ecdf, beta) if beta is not None else None
                distances.append(
                    {
                        "receiver": receiver.value,
                        "n": n,
                        "k": k,
                        "alpha": alpha,
                        "samples": ecdf.count,
                        "ks_beta": ks_beta,
                        "ks_gaussian": ks_gauss,
                        "max_sir": float(ecdf.values[-1]),
                        "resampled": resampled,
                    }
                )
                grid = np.linspace(ecdf.values[0], ecdf.values[-1], CDF_GRID_POINTS)
                emp = evaluate_cdf(ecdf, grid)
                model_gauss = cdf(gaussian, grid)
                model_beta = cdf(beta, grid) if beta is not None else None
                for i, value in enumerate(grid):
                    curves.append(
                        {
                            "receiver": receiver.value,
                            "n": n,
                            "alpha": alpha,
                            "value": float(value),
                            "empirical": float(emp[i]),
                            "beta": None if model_beta is None else float(model_beta[i]),
                            "gaussian": float(model_gauss[i]),
                        }
                    )
                resamples[f"{receiver.value}/n={n}/alpha={alpha}"] = resampled
                if events is not None:
                    events.emit(
                        "cdf_cell",
                        f"{receiver.value} N={n} alpha={alpha}: ks_gaussian={ks_gauss:.4f}",
                        receiver=receiver.value,
                        n=n,
                        alpha=alpha,
                        ks_beta=ks_beta,
                        ks_gaussian=ks_gauss,
                    )
    return ResultSet(
        experiment="cdf",
        tables={"cdf": curves, "ks": distances},
        manifest={"gamma_star": gamma_star, "resample_counts": resamples},
    )


def series_draw(
    index: int,
    seed: np.random.SeedSequence,
    *,
    n: int,
    receiver: Receiver,
    powers: NDArray[np.float64],
    gains: NDArray[np.float64],
    noise_var: float,
    gamma_star: float,
    chips: str,
    symbols: int,
) -> tuple[list[dict[str, Any]], int]:
    """One spreading draw: fixed UPC powers against per-draw balanced powers."""
    spreading_seed, upc_seed, baseline_seed = seed.spawn(3)
    rng = np.random.default_rng(spreading_seed)
    k = powers.size
    for resampled in range(MAX_RESAMPLES + 1):
        spreading = draw_spreading(rng, n, k, chips)
        try:
            upc = simulate_symbol(
                powers, gains, noise_var, spreading, receiver, upc_seed, symbols=symbols
            )
            baseline_powers = balance_true_sirs(receiver, spreading, gains / noise_var, gamma_star)
            baseline = simulate_symbol(
                baseline_powers, gains, noise_var, spreading, receiver, baseline_seed, symbols=symbols
            )
            break
        except SingularGram:
            continue
    else:
        raise SingularGram(
            f"realization {index} stayed singular after {MAX_RESAMPLES} redraws",
            {"index": index, "n": n, "k": k},
        )
    assert upc.sirs is not None and baseline.sirs is not None
    upc_errors = upc.bit_errors.reshape(k, -1).sum(axis=1)
    baseline_errors = baseline.bit_errors.reshape(k, -1).sum(axis=1)
    rows = [
        {
            "draw": index,
            "user": user,
            "upc_power_watts": float(powers[user]),
            "upc_sir": float(upc.sirs[user]),
            "upc_ber_gaussian": gaussian_ber(float(upc.sirs[user])),
            "upc_bit_errors": int(upc_errors[user]),
            "baseline_power_watts": float(baseline_powers[user]),
            "baseline_sir": float(baseline.sirs[user]),
            "baseline_ber_gaussian": gaussian_ber(float(baseline.sirs[user])),
            "baseline_bit_errors": int(baseline_errors[user]),
        }
        for user in range(k)
    ]
    return rows, resampled


def run_sir_ber_series(config: ExperimentConfig, events: Optional[EventEmitter] = None) -> ResultSet:
    gamma_star = resolve_gamma_star(config)
    params = system_params(config)
    eff = efficiency_function(config)
    series: list[dict[str, Any]] = []
    summary: list[dict[str, Any]] = []
    resamples: dict[str, int] = {}
    for receiver in _statistics_receivers(config):
        state = run_upc(
            np.full(params.users, config.initial_power),
            params,
            receiver,
            gamma_star,
            tol=config.upc_tol,
            max_iters=config.upc_max_iters,
            divergence_factor=config.divergence_factor,
            settings=config.solver,
            events=events,
        )
        task = functools.partial(
            series_draw,
            n=config.n,
            receiver=receiver,
            powers=state.powers,
            gains=np.asarray(params.gains),
            noise_var=params.noise_var,
            gamma_star=gamma_star,
            chips=config.chips,
            symbols=config.symbols,
        )
        draws = run_realizations(
            task,
            config.realizations,
            master_seed=config.seed,
            stream=(SERIES_STREAM, config.n, RECEIVER_CODES[receiver]),
            workers=config.workers,
        )
        rows = [{"receiver": receiver.value, **row} for block, _ in draws for row in block]
        for row in rows:
            row["upc_utility_ratio"] = utility_loss_ratio(eff, row["upc_sir"], gamma_star)
        series.extend(rows)
        resampled = sum(r for _, r in draws)
        resamples[receiver.value] = resampled

        bits = len(rows) * config.symbols
        upc_sir = np.array([r["upc_sir"] for r in rows])
        summary.append(
            {
                "receiver": receiver.value,
                "draws": config.realizations,
                "symbols_per_draw": config.symbols,
                "gamma_star": gamma_star,
                "upc_mean_sir": float(upc_sir.mean()),
                "upc_p_delta": empirical_p_delta(upc_sir, gamma_star, config.delta_db)[0],
                "upc_ber_mc": sum(r["upc_bit_errors"] for r in rows) / bits,
                "upc_ber_gaussian": float(np.mean([r["upc_ber_gaussian"] for r in rows])),
                "upc_mean_utility_ratio": float(np.mean([r["upc_utility_ratio"] for r in rows])),
                "baseline_mean_sir": float(np.mean([r["baseline_sir"] for r in rows])),
                "baseline_ber_mc": sum(r["baseline_bit_errors"] for r in rows) / bits,
                "baseline_ber_gaussian": float(np.mean([r["baseline_ber_gaussian"] for r in rows])),
                "baseline_mean_power_ratio": float(
                    np.mean([r["baseline_power_watts"] / r["upc_power_watts"] for r in rows])
                ),
                "resampled": resampled,
            }
        )
        if events is not None:
            last = summary[-1]
            events.emit(
                "series_done",
                (
                    f"{receiver.value}: mean SIR {last['upc_mean_sir']:.3f} (UPC) vs "
                    f"{last['baseline_mean_sir']:.3f} (balanced per draw)"
                ),
                receiver=receiver.value,
                resampled=resampled,
            )
    return ResultSet(
        experiment="fig2",
        tables={"sir_ber_series": series, "sir_ber_summary": summary},
        manifest={"gamma_star": gamma_star, "resample_counts": resamples},
    )


RUNNERS: dict[str, Callable[[ExperimentConfig, Optional[EventEmitter]], ResultSet]] = {
    "fig1": run_fig1,
    "fig2": run_sir_ber_series,
    "table1": run_table1,
    "cdf": run_cdf,
}


def run_experiment(
    config: ExperimentConfig,
    *,
    output_dir: Optional[Path] = None,
    echo: bool = True,
) -> ResultSet:
    """Run one experiment and persist it under <output_dir>/<experiment>/<UTC timestamp>/."""
    try:
        runner = RUNNERS[config.name]
    except KeyError:
        raise ValueError(f"unknown experiment '{config.name}'.") from None
    run_dir = make_run_dir(output_dir or config.output_dir, config.name)
    events = EventSink(run_dir / EVENTS_NAME, echo=echo)
    started_at = now_iso()
    plain = config_as_dict(config)
    events.emit(
        "experiment_start",
        f"{config.name} started (seed={config.seed}, realizations={config.realizations}, workers={config.workers})",
        experiment=config.name,
        run_dir=str(run_dir),
    )
    result = runner(config, events)
    result.manifest.setdefault("resample_counts", {})
    result.manifest.update(
        {
            "experiment": config.name,
            "config": plain,
            "config_hash": config_hash(plain),
            "seed": config.seed,
            "versions": package_versions(),
            "started_at": started_at,
            "finished_at": now_iso(),
            "event_counts": dict(sorted(events.counts.items())),
        }
    )
    write_result_set(result, run_dir)
    events.emit(
        "experiment_done",
        f"{config.name} results written to {run_dir}",
        experiment=config.name,
        tables=sorted(result.tables),
    )
    return result
