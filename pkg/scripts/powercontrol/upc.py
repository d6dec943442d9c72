"""Unified power control: powers follow the large-system efficiency fed back by the receiver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .efficiency import efficiency
from .errors import Infeasible, NoConvergence
from .models import (
    FixedPointSettings,
    PowerState,
    Receiver,
    ReceiverModel,
    SnrProfile,
    SystemParams,
    TargetSir,
    parse_receiver,
)

if TYPE_CHECKING:
    from .run_state import EventEmitter

TargetSpec = TargetSir | float | ArrayLike

SIF_RECEIVERS = frozenset({Receiver.MATCHED_FILTER, Receiver.DECORRELATOR, Receiver.MMSE})


def target_vector(gamma_star: TargetSpec, users: int) -> NDArray[np.float64]:
    if isinstance(gamma_star, TargetSir):
        return np.full(users, gamma_star.gamma_star)
    arr = np.atleast_1d(np.asarray(gamma_star, dtype=float))
    if arr.ndim != 1 or arr.size not in (1, users):
        raise ValueError(f"target SIR must be a scalar or a vector of {users} entries.")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("target SIR must be > 0.")
    return np.broadcast_to(arr, (users,)).astype(float)


def upc_step(
    state: PowerState,
    params: SystemParams,
    receiver: ReceiverModel | Receiver | str,
    gamma_star: TargetSpec,
    *,
    settings: Optional[FixedPointSettings] = None,
    events: Optional[EventEmitter] = None,
) -> PowerState:
    profile = SnrProfile(params.snrs(state.powers), params.alpha)
    eta = efficiency(receiver, profile, settings, events=events).eta
    targets = target_vector(gamma_star, params.users)
    powers = targets * params.noise_var / (eta * params.gains)
    capped: frozenset[int] = frozenset()
    if params.p_max is not None:
        capped = frozenset(int(i) for i in np.nonzero(powers > params.p_max)[0])
        powers = np.minimum(powers, params.p_max)
    return PowerState(
        powers=powers,
        eta_trace=state.eta_trace + (eta,),
        n=state.n + 1,
        converged=False,
        capped_users=capped,
        power_history=state.power_history + (powers,),
    )


def run_upc(
    initial_powers: ArrayLike | PowerState,
    params: SystemParams,
    receiver: ReceiverModel | Receiver | str,
    gamma_star: TargetSpec,
    tol: float = 1e-8,
    max_iters: int = 100,
    *,
    divergence_factor: float = 1e6,
    settings: Optional[FixedPointSettings] = None,
    events: Optional[EventEmitter] = None,
) -> PowerState:
    if isinstance(initial_powers, PowerState):
        state = initial_powers
    else:
        state = PowerState.initial(initial_powers)
    if state.powers.size != params.users:
        raise ValueError(
            f"got {state.powers.size} initial powers for {params.users} users."
        )
    guard = divergence_factor * state.powers
    label = receiver.kind.value if isinstance(receiver, ReceiverModel) else parse_receiver(receiver).value

    for _ in range(max_iters):
        nxt = upc_step(state, params, receiver, gamma_star, settings=settings, events=events)
        if np.any(nxt.powers > guard):
            raise Infeasible(
                f"{label} powers passed {divergence_factor:g}x their initial value",
                {"receiver": label, "iteration": nxt.n, "eta": nxt.eta_trace[-1]},
            )
        change = float(np.max(np.abs(nxt.powers - state.powers) / state.powers))
        if change < tol:
            if nxt.capped_users and len(nxt.capped_users) == params.users:
                raise Infeasible(
                    f"every {label} user is pinned at p_max without reaching the target SIR",
                    {"receiver": label, "iteration": nxt.n, "p_max": params.p_max},
                )
            if events is not None:
                events.emit(
                    "upc_converged",
                    f"{label} converged after {nxt.n} iterations (eta={nxt.eta_trace[-1]:.6g})",
                    receiver=label,
                    iterations=nxt.n,
                    capped_users=sorted(nxt.capped_users),
                )
            return replace(nxt, converged=True)
        state = nxt

    raise NoConvergence(
        f"{label} power control did not converge in {max_iters} iterations",
        {"receiver": label, "iterations": max_iters},
    )


def balanced_snr_closed_form(
    receiver: Receiver | str,
    gamma_star: TargetSir | float,
    alpha: float,
) -> float:
    kind = parse_receiver(receiver)
    g = float(gamma_star)
    if kind is Receiver.DECORRELATOR:
        if alpha >= 1.0:
            raise Infeasible(f"decorrelator balance needs alpha < 1, got {alpha}", {"alpha": alpha})
        return g / (1.0 - alpha)
    if kind is Receiver.MATCHED_FILTER:
        load = alpha * g
        if load >= 1.0:
            raise Infeasible(
                f"matched filter balance needs alpha*gamma* < 1, got {load:.4g}",
                {"alpha": alpha, "gamma_star": g},
            )
        return g / (1.0 - load)
    if kind is Receiver.MMSE:
        load = alpha * g / (1.0 + g)
        if load >= 1.0:
            raise Infeasible(
                f"mmse balance needs alpha*gamma*/(1+gamma*) < 1, got {load:.4g}",
                {"alpha": alpha, "gamma_star": g},
            )
        return g / (1.0 - load)
    raise ValueError(f"no closed-form balanced SNR for receiver '{kind.value}'.")


def balanced_powers(
    params: SystemParams,
    receiver: Receiver | str,
    gamma_star: TargetSir | float,
) -> NDArray[np.float64]:
    snr = balanced_snr_closed_form(receiver, gamma_star, params.alpha)
    return snr * params.noise_var / params.gains


def interference_function(
    profile: SnrProfile,
    receiver: ReceiverModel | Receiver | str,
    gamma_star: TargetSpec,
    settings: Optional[FixedPointSettings] = None,
) -> Any:
    eta = efficiency(receiver, profile, settings).eta
    value = target_vector(gamma_star, profile.users) / eta
    if np.ndim(gamma_star) == 0 or isinstance(gamma_star, TargetSir):
        return float(value[0])
    return value


def path_loss_gains(
    count: int,
    coefficient: float = 0.1,
    exponent: float = -4.0,
    base_distance: float = 100.0,
    step_distance: float = 10.0,
    distances: Optional[ArrayLike] = None,
) -> NDArray[np.float64]:
    """h_k = coefficient * d_k**exponent with d_k = base + step*k, k = 1..count."""
    if distances is not None:
        d = np.asarray(distances, dtype=float)
        if d.shape != (count,):
            raise ValueError(f"expected {count} distances, got shape {d.shape}.")
    else:
        d = base_distance + step_distance * np.arange(1, count + 1)
    if np.any(d <= 0):
        raise ValueError("distances must be > 0.")
    return coefficient * d**exponent


def power_trace_rows(state: PowerState) -> list[dict[str, Any]]:
    # row i carries the eta that produced p(i); the starting powers have none
    rows: list[dict[str, Any]] = []
    for iteration, powers in enumerate(state.power_history):
        eta = state.eta_trace[iteration - 1] if iteration > 0 else None
        for user, power in enumerate(powers):
            rows.append(
                {"iteration": iteration, "user": user, "power_watts": float(power), "eta": eta}
            )
    return rows


@dataclass
class SifReport:
    receiver: Receiver
    trials: int
    failures: dict[str, list[dict[str, Any]]] = field(
        default_factory=lambda: {"positivity": [], "monotonicity": [], "scalability": []}
    )

    def passed(self, prop: Optional[str] = None) -> bool:
        if prop is not None:
            return not self.failures[prop]
        return all(not rows for rows in self.failures.values())

    def summary(self) -> str:
        return ", ".join(
            f"{prop}: {'PASS' if not rows else f'FAIL ({len(rows)})'}"
            for prop, rows in self.failures.items()
        )


def sif_property_harness(
    receiver: Receiver | str,
    trials: int = 1000,
    seed: int = 0,
    *,
    gamma_star: float = 6.4,
    settings: Optional[FixedPointSettings] = None,
    slack: float = 1e-8,
) -> SifReport:
    """Randomized check that gamma*/eta is positive, monotone and scalable in the SNR profile."""
    kind = parse_receiver(receiver)
    if kind not in SIF_RECEIVERS:
        raise ValueError(f"interference function check supports mf, dec, mmse; got '{kind.value}'.")
    if trials < 1:
        raise ValueError("trials must be at least 1.")
    rng = np.random.default_rng(seed)
    report = SifReport(receiver=kind, trials=trials)

    def interference(profile: SnrProfile) -> float:
        return float(interference_function(profile, kind, gamma_star, settings))

    for trial in range(trials):
        users = int(rng.integers(2, 17))
        alpha = float(rng.uniform(0.05, 0.95))
        snrs = rng.uniform(0.0, 20.0, size=users)
        shift = rng.uniform(0.0, 5.0, size=users)
        theta = float(rng.uniform(1.01, 4.0))
        profile = SnrProfile(snrs, alpha)
        base = interference(profile)
        case = {"trial": trial, "alpha": alpha, "snrs": snrs.tolist()}

        if not base > 0:
            report.failures["positivity"].append({**case, "value": base})
        raised = interference(SnrProfile(snrs + shift, alpha))
        if raised < base * (1.0 - slack):
            report.failures["monotonicity"].append(
                {**case, "shift": shift.tolist(), "value": base, "raised_value": raised}
            )
        scaled = interference(profile.scaled(theta))
        if not theta * base > scaled:
            report.failures["scalability"].append(
                {**case, "theta": theta, "value": base, "scaled_value": scaled}
            )
    return report
