"""Finite-size synchronous CDMA: random spreading, per-realization SIR and symbol detection.

Noise is unit variance; transmit powers and gains are folded into the SNRs
Gamma_k = p_k h_k / sigma^2.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from typing import Any, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, special

from scripts.numeric_common import as_vector

from .errors import BaselineNoConvergence, LoadTooHigh, SingularGram, TooManyUsers, ZeroFilter
from .models import (
    ChannelRealization,
    Receiver,
    SpreadingMatrix,
    SymbolOutcome,
    TargetSir,
    parse_receiver,
)

CHIP_LAWS = ("binary", "gaussian")
MAX_GRAM_CONDITION = 1e12
MAX_EXHAUSTIVE_USERS = 20
CANDIDATE_BLOCK = 1 << 14

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def sample_spreading(n: int, k: int, seed: SeedLike = None, chips: str = "binary") -> SpreadingMatrix:
    if n < 1 or k < 1:
        raise ValueError("spreading needs n >= 1 and k >= 1.")
    if chips not in CHIP_LAWS:
        raise ValueError(f"chips must be one of {', '.join(CHIP_LAWS)}; got '{chips}'.")
    rng = np.random.default_rng(seed)
    return draw_spreading(rng, n, k, chips)


def draw_spreading(rng: np.random.Generator, n: int, k: int, chips: str) -> SpreadingMatrix:
    if chips == "binary":
        raw = 2.0 * rng.integers(0, 2, size=(n, k)) - 1.0
    else:
        raw = rng.standard_normal((n, k))
    return SpreadingMatrix(chips=raw / math.sqrt(n), kind=chips)


def draw_realization(
    rng: np.random.Generator,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
    symbols: int = 1,
) -> ChannelRealization:
    """BPSK symbols, then unit-variance noise, for `symbols` periods on a fixed spreading draw."""
    gamma = as_vector(snrs, name="snrs")
    if symbols < 1:
        raise ValueError("symbols must be at least 1.")
    x = 2.0 * rng.integers(0, 2, size=(spreading.k, symbols)) - 1.0
    noise = rng.standard_normal((spreading.n, symbols))
    return ChannelRealization(spreading=spreading, snrs=gamma, symbols=x, noise=noise)


def gram_inverse(spreading: SpreadingMatrix) -> NDArray[np.float64]:
    if spreading.k > spreading.n:
        raise LoadTooHigh(
            f"decorrelator needs K <= N, got K={spreading.k}, N={spreading.n}",
            {"n": spreading.n, "k": spreading.k},
        )
    gram = spreading.chips.T @ spreading.chips
    cond = float(np.linalg.cond(gram))
    if not cond < MAX_GRAM_CONDITION:
        raise SingularGram(
            f"spreading Gram matrix is numerically singular (cond={cond:.3g})",
            {"condition": cond, "n": spreading.n, "k": spreading.k},
        )
    factor = linalg.cho_factor(gram)
    return linalg.cho_solve(factor, np.eye(spreading.k))


def _covariance_solve(spreading: SpreadingMatrix, snrs: NDArray[np.float64]) -> NDArray[np.float64]:
    """R^-1 S with R = S diag(snrs) S^T + I."""
    s = spreading.chips
    cov = (s * snrs) @ s.T + np.eye(spreading.n)
    return linalg.cho_solve(linalg.cho_factor(cov), s)


def linear_sir(
    filt: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
    user: int,
) -> float:
    c = np.asarray(filt, dtype=float)
    gamma = as_vector(snrs, name="snrs")
    if c.shape != (spreading.n,) or gamma.size != spreading.k:
        raise ValueError("filter, spreading and snrs dimensions disagree.")
    energy = float(c @ c)
    if energy == 0.0:
        raise ZeroFilter(f"filter for user {user} is identically zero", {"user": user})
    proj = c @ spreading.chips
    weighted = gamma * proj**2
    signal = weighted[user]
    return float(signal / (energy + weighted.sum() - signal))


def receiver_filter(
    receiver: Receiver | str,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
    user: int,
) -> NDArray[np.float64]:
    kind = parse_receiver(receiver)
    s = spreading.chips
    if kind is Receiver.MATCHED_FILTER:
        return s[:, user].copy()
    if kind is Receiver.DECORRELATOR:
        return s @ gram_inverse(spreading)[:, user]
    if kind is Receiver.MMSE:
        gamma = as_vector(snrs, name="snrs")
        others = np.delete(np.arange(spreading.k), user)
        so = s[:, others]
        a_k = (so * gamma[others]) @ so.T + np.eye(spreading.n)
        return linalg.cho_solve(linalg.cho_factor(a_k), s[:, user])
    raise ValueError(f"'{kind.value}' is not a linear receiver.")


def filter_matrix(
    receiver: Receiver | str,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> NDArray[np.float64]:
    """Columns are positive multiples of each user's linear filter."""
    kind = parse_receiver(receiver)
    if kind is Receiver.MATCHED_FILTER:
        return spreading.chips
    if kind is Receiver.DECORRELATOR:
        return spreading.chips @ gram_inverse(spreading)
    if kind is Receiver.MMSE:
        return _covariance_solve(spreading, as_vector(snrs, name="snrs"))
    raise ValueError(f"'{kind.value}' is not a linear receiver.")


def linear_sirs(
    receiver: Receiver | str,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> NDArray[np.float64]:
    kind = parse_receiver(receiver)
    gamma = as_vector(snrs, name="snrs")
    if gamma.size != spreading.k:
        raise ValueError(f"expected {spreading.k} SNRs, got {gamma.size}.")
    s = spreading.chips
    if kind is Receiver.MATCHED_FILTER:
        gram = s.T @ s
        diag = np.diag(gram)
        signal = gamma * diag**2
        return signal / (diag + (gram**2) @ gamma - signal)
    if kind is Receiver.DECORRELATOR:
        return gamma / np.diag(gram_inverse(spreading))
    if kind is Receiver.MMSE:
        # s_k^T R^-1 s_k Gamma_k = beta_k and SIR_k = beta_k / (1 - beta_k)
        beta = gamma * np.einsum("nk,nk->k", s, _covariance_solve(spreading, gamma))
        return beta / (1.0 - beta)
    raise ValueError(f"'{kind.value}' is not a linear receiver.")


def detect_linear(
    receiver: Receiver | str,
    received: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> NDArray[np.float64]:
    y = np.asarray(received, dtype=float)
    stats = filter_matrix(receiver, spreading, snrs).T @ y
    return np.where(stats >= 0.0, 1.0, -1.0)


def _candidates(users: int, start: int, stop: int) -> NDArray[np.float64]:
    idx = np.arange(start, stop)
    bits = (idx[:, None] >> np.arange(users)[None, :]) & 1
    return 2.0 * bits - 1.0


def _exhaustive_metrics(
    received: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> Iterator[tuple[NDArray[np.float64], NDArray[np.float64], bool]]:
    """Yield (candidates, metric) blocks; metric = x^T G x - 2 x^T H^T y, ||y - Hx||^2 up to a constant."""
    k = spreading.k
    if k > MAX_EXHAUSTIVE_USERS:
        raise TooManyUsers(
            f"exhaustive detection supports at most {MAX_EXHAUSTIVE_USERS} users, got {k}",
            {"k": k},
        )
    y = np.asarray(received, dtype=float)
    squeeze = y.ndim == 1
    y2 = y[:, None] if squeeze else y
    gamma = as_vector(snrs, name="snrs")
    h = spreading.chips * np.sqrt(gamma)
    gram = h.T @ h
    matched = h.T @ y2
    total = 1 << k
    for start in range(0, total, CANDIDATE_BLOCK):
        x = _candidates(k, start, min(total, start + CANDIDATE_BLOCK))
        quad = np.einsum("ck,ck->c", x @ gram, x)
        yield x, quad[:, None] - 2.0 * (x @ matched), squeeze


def detect_ml(
    received: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> NDArray[np.float64]:
    best_val: Optional[NDArray[np.float64]] = None
    best_x: Optional[NDArray[np.float64]] = None
    squeeze = True
    for x, metric, squeeze in _exhaustive_metrics(received, spreading, snrs):
        idx = np.argmin(metric, axis=0)
        val = metric[idx, np.arange(metric.shape[1])]
        cand = x[idx].T
        if best_val is None or best_x is None:
            best_val, best_x = val, cand
        else:
            better = val < best_val
            best_val = np.where(better, val, best_val)
            best_x = np.where(better[None, :], cand, best_x)
    assert best_x is not None
    return best_x[:, 0] if squeeze else best_x


def detect_io(
    received: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
    user: Optional[int] = None,
) -> Any:
    """Sign of each user's marginal posterior log-ratio, summed over all 2^K symbol vectors."""
    k = spreading.k
    plus: Optional[NDArray[np.float64]] = None
    minus: Optional[NDArray[np.float64]] = None
    squeeze = True
    for x, metric, squeeze in _exhaustive_metrics(received, spreading, snrs):
        logw = -0.5 * metric
        block_plus = np.stack(
            [special.logsumexp(np.where(x[:, j, None] > 0, logw, -np.inf), axis=0) for j in range(k)]
        )
        block_minus = np.stack(
            [special.logsumexp(np.where(x[:, j, None] < 0, logw, -np.inf), axis=0) for j in range(k)]
        )
        if plus is None or minus is None:
            plus, minus = block_plus, block_minus
        else:
            plus = np.logaddexp(plus, block_plus)
            minus = np.logaddexp(minus, block_minus)
    assert plus is not None and minus is not None
    decisions = np.where(plus - minus >= 0.0, 1.0, -1.0)
    if squeeze:
        decisions = decisions[:, 0]
    if user is not None:
        return float(decisions[user]) if squeeze else decisions[user]
    return decisions


def detect(
    receiver: Receiver | str,
    received: ArrayLike,
    spreading: SpreadingMatrix,
    snrs: ArrayLike,
) -> NDArray[np.float64]:
    kind = parse_receiver(receiver)
    if kind is Receiver.JOINTLY_OPTIMAL_ML:
        return detect_ml(received, spreading, snrs)
    if kind is Receiver.INDIVIDUALLY_OPTIMAL:
        return np.asarray(detect_io(received, spreading, snrs))
    return detect_linear(kind, received, spreading, snrs)


def simulate_symbol(
    powers: ArrayLike,
    gains: ArrayLike,
    noise_var: float,
    spreading: SpreadingMatrix,
    receiver: Receiver | str,
    seed: SeedLike = None,
    *,
    symbols: int = 1,
) -> SymbolOutcome:
    """One spreading draw: realized SIRs (linear receivers) and detected bits for `symbols` symbol periods."""
    kind = parse_receiver(receiver)
    p = as_vector(powers, name="powers")
    h = as_vector(gains, name="gains")
    if not noise_var > 0:
        raise ValueError("noise_var must be > 0.")
    if p.size != spreading.k or h.size != spreading.k:
        raise ValueError(f"expected {spreading.k} powers and gains.")
    if symbols < 1:
        raise ValueError("symbols must be at least 1.")
    gamma = p * h / noise_var
    realization = draw_realization(np.random.default_rng(seed), spreading, gamma, symbols)
    x, received = realization.symbols, realization.received
    sirs = linear_sirs(kind, spreading, gamma) if kind.is_linear else None
    decisions = detect(kind, received, spreading, gamma)
    if symbols == 1:
        x, decisions = x[:, 0], decisions[:, 0]
    return SymbolOutcome(receiver=kind, sirs=sirs, symbols=x, decisions=decisions)


def gaussian_ber(sir: ArrayLike) -> Any:
    """Q(sqrt(sir)) for BPSK with Gaussian residual interference."""
    value = 0.5 * special.erfc(np.sqrt(np.asarray(sir, dtype=float) / 2.0))
    return float(value) if np.ndim(value) == 0 else value


def balance_true_sirs(
    receiver: Receiver | str,
    spreading: SpreadingMatrix,
    gains_over_noise: ArrayLike,
    gamma_star: TargetSir | float | ArrayLike,
    *,
    start: Optional[ArrayLike] = None,
    tol: float = 1e-9,
    max_iters: int = 2000,
) -> NDArray[np.float64]:
    """Powers that give every user exactly its target on this spreading draw (p <- gamma* p / gamma(p))."""
    kind = parse_receiver(receiver)
    if not kind.is_linear:
        raise ValueError(f"'{kind.value}' is not a linear receiver.")
    g = as_vector(gains_over_noise, name="gains_over_noise")
    if isinstance(gamma_star, TargetSir):
        targets = np.full(spreading.k, gamma_star.gamma_star)
    else:
        targets = np.broadcast_to(np.asarray(gamma_star, dtype=float), (spreading.k,)).astype(float)
    p = targets / g if start is None else as_vector(start, name="start").copy()
    for _ in range(max_iters):
        sirs = linear_sirs(kind, spreading, p * g)
        ratio = targets / sirs
        if float(np.max(np.abs(ratio - 1.0))) < tol:
            return p
        p = p * ratio
        if not np.all(np.isfinite(p)):
            break
    raise BaselineNoConvergence(
        f"{kind.value} per-draw balancing did not reach the target in {max_iters} iterations",
        {"receiver": kind.value, "iterations": max_iters, "k": spreading.k, "n": spreading.n},
    )
