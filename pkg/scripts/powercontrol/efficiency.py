"""Large-system multiuser efficiency for the supported receivers.

Averages over the SNR distribution are empirical averages over the users of
the supplied profile.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Callable, Sequence
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import LoadTooHigh, NoConvergence
from .models import (
    Efficiency,
    FixedPointSettings,
    Receiver,
    ReceiverModel,
    SnrProfile,
    parse_receiver,
)

if TYPE_CHECKING:
    from .run_state import EventEmitter

RESTART_ETA = 1e-6
AMBIGUITY_GAP = 1e-4


@functools.lru_cache(maxsize=16)
def _hermite_rule(nodes: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return t, w / math.sqrt(math.pi)


def bpsk_mmse(snr: ArrayLike, nodes: int = 64) -> NDArray[np.float64]:
    """MMSE of a +/-1 symbol over y = sqrt(snr)*x + z, i.e. 1 - E[tanh(snr - z*sqrt(snr))]."""
    s = np.atleast_1d(np.asarray(snr, dtype=float))
    t, w = _hermite_rule(nodes)
    # z = sqrt(2)*t turns the standard normal expectation into a Hermite sum
    args = s[:, None] - np.sqrt(2.0 * s)[:, None] * t[None, :]
    return 1.0 - np.tanh(args) @ w


def _iterate(
    update: Callable[[float], float],
    settings: FixedPointSettings,
    *,
    start: float,
    label: str,
) -> tuple[float, int]:
    eta = start
    d = settings.damping
    for iteration in range(1, settings.max_iters + 1):
        nxt = (1.0 - d) * eta + d * update(eta)
        if abs(nxt - eta) < settings.tol * abs(nxt):
            return nxt, iteration
        eta = nxt
    raise NoConvergence(
        f"{label} fixed point did not converge in {settings.max_iters} iterations",
        {"receiver": label, "iterations": settings.max_iters, "last_eta": eta},
    )


def _solve_with_restart(
    update: Callable[[float], float],
    settings: FixedPointSettings,
    *,
    label: str,
    events: Optional[EventEmitter],
) -> Efficiency:
    eta, iterations = _iterate(update, settings, start=1.0, label=label)
    if not settings.check_restarts:
        return Efficiency(eta=eta, iterations=iterations)

    alt, alt_iterations = _iterate(update, settings, start=RESTART_ETA, label=label)
    ambiguous = abs(alt - eta) > AMBIGUITY_GAP
    if ambiguous and events is not None:
        events.emit(
            "efficiency_ambiguous",
            f"{label} fixed point depends on the start: eta={eta:.6g} vs {alt:.6g}",
            receiver=label,
            eta=eta,
            alternate_eta=alt,
        )
    return Efficiency(
        eta=eta,
        iterations=iterations + alt_iterations,
        ambiguous=ambiguous,
        alternate_eta=alt if ambiguous else None,
    )


def mf_efficiency(profile: SnrProfile) -> Efficiency:
    return Efficiency(eta=1.0 / (1.0 + profile.alpha * profile.mean_snr))


def dec_efficiency(alpha: float) -> Efficiency:
    if not alpha > 0:
        raise ValueError("alpha must be > 0.")
    if alpha >= 1.0:
        raise LoadTooHigh(
            f"decorrelator requires alpha < 1, got {alpha}",
            {"alpha": alpha},
        )
    return Efficiency(eta=1.0 - alpha)


def mmse_efficiency(
    profile: SnrProfile,
    settings: Optional[FixedPointSettings] = None,
    *,
    events: Optional[EventEmitter] = None,
) -> Efficiency:
    settings = settings or FixedPointSettings()
    snrs = profile.snrs
    alpha = profile.alpha

    def update(eta: float) -> float:
        return 1.0 / (1.0 + alpha * float(np.mean(snrs / (1.0 + eta * snrs))))

    return _solve_with_restart(update, settings, label="mmse", events=events)


def mmse_efficiency_closed_form(gamma_snr: float, alpha: float) -> Efficiency:
    if not gamma_snr > 0:
        raise ValueError("gamma_snr must be > 0.")
    g = gamma_snr
    root = math.sqrt((1.0 - alpha) ** 2 + 2.0 * (1.0 + alpha) / g + 1.0 / g**2)
    return Efficiency(eta=(1.0 - alpha) / 2.0 - 1.0 / (2.0 * g) + 0.5 * root)


def io_efficiency(
    profile: SnrProfile,
    settings: Optional[FixedPointSettings] = None,
    *,
    events: Optional[EventEmitter] = None,
) -> Efficiency:
    settings = settings or FixedPointSettings()
    snrs = profile.snrs
    alpha = profile.alpha
    nodes = settings.quadrature_nodes

    def update(eta: float) -> float:
        penalty = snrs * bpsk_mmse(eta * snrs, nodes)
        return 1.0 / (1.0 + alpha * float(np.mean(penalty)))

    return _solve_with_restart(update, settings, label="io", events=events)


def efficiency(
    receiver: ReceiverModel | Receiver | str,
    profile: SnrProfile,
    settings: Optional[FixedPointSettings] = None,
    *,
    events: Optional[EventEmitter] = None,
) -> Efficiency:
    if isinstance(receiver, ReceiverModel):
        kind = receiver.kind
        settings = settings or receiver.settings
    else:
        kind = parse_receiver(receiver)

    if kind is Receiver.MATCHED_FILTER:
        return mf_efficiency(profile)
    if kind is Receiver.DECORRELATOR:
        return dec_efficiency(profile.alpha)
    if kind is Receiver.MMSE:
        return mmse_efficiency(profile, settings, events=events)
    # the jointly optimal detector is driven by the individually optimal efficiency
    return io_efficiency(profile, settings, events=events)


def per_user_efficiency(
    receivers: Sequence[ReceiverModel | Receiver | str],
    profile: SnrProfile,
    settings: Optional[FixedPointSettings] = None,
    *,
    events: Optional[EventEmitter] = None,
) -> NDArray[np.float64]:
    """Efficiency of each user under its own receiver, all facing the same interference profile."""
    if len(receivers) != profile.users:
        raise ValueError(
            f"expected {profile.users} receivers, got {len(receivers)}"
        )
    kinds = [r.kind if isinstance(r, ReceiverModel) else parse_receiver(r) for r in receivers]
    solved: dict[Receiver, float] = {}
    for kind in kinds:
        if kind not in solved:
            solved[kind] = efficiency(kind, profile, settings, events=events).eta
    return np.array([solved[kind] for kind in kinds])
