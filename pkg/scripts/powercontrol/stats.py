from __future__ import annotations

import math
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from scipy import special
from scipy import stats as sps

from scripts.numeric_common import from_db

from .errors import EmptySample, InvalidLoad, InvalidShape
from .models import EmpiricalCdf, Receiver, SirDistribution, TargetSir, parse_receiver


def dec_beta_distribution(n: int, k: int, gamma_star: TargetSir | float) -> SirDistribution:
    """gamma / Gamma*_dec ~ Beta(N-K+1, K-1) with Gamma*_dec = gamma*/(1-K/N)."""
    if not n > k >= 2:
        raise InvalidShape(f"beta law needs N > K >= 2, got N={n}, K={k}", {"n": n, "k": k})
    alpha = k / n
    scale = float(gamma_star) / (1.0 - alpha)
    return SirDistribution.beta(a=float(n - k + 1), b=float(k - 1), scale=scale)


def gaussian_variance(
    receiver: Receiver | str,
    gamma_star: TargetSir | float,
    alpha: float,
    n: int,
) -> float:
    kind = parse_receiver(receiver)
    g = float(gamma_star)
    if n < 1:
        raise ValueError("n must be at least 1.")
    if kind is Receiver.DECORRELATOR:
        if not 0 < alpha < 1:
            raise InvalidLoad(f"decorrelator variance needs 0 < alpha < 1, got {alpha}", {"alpha": alpha})
        return 2.0 * g**2 * alpha / ((1.0 - alpha) * n)
    if kind is Receiver.MMSE:
        load = alpha * (g / (1.0 + g)) ** 2
        if not alpha > 0 or load >= 1.0:
            raise InvalidLoad(
                f"mmse variance needs alpha*(gamma*/(1+gamma*))^2 < 1, got {load:.4g}",
                {"alpha": alpha, "gamma_star": g},
            )
        return 2.0 * g**2 / ((1.0 - load) * n)
    raise ValueError(f"no Gaussian SIR law for receiver '{kind.value}'.")


def dec_gaussian_distribution(n: int, k: int, gamma_star: TargetSir | float) -> SirDistribution:
    var = gaussian_variance(Receiver.DECORRELATOR, gamma_star, k / n, n)
    return SirDistribution.gaussian(mean=float(gamma_star), variance=var)


def mmse_gaussian_distribution(n: int, k: int, gamma_star: TargetSir | float) -> SirDistribution:
    var = gaussian_variance(Receiver.MMSE, gamma_star, k / n, n)
    return SirDistribution.gaussian(mean=float(gamma_star), variance=var)


def _scalar(value: Any) -> Any:
    return float(value) if np.ndim(value) == 0 else value


def cdf(dist: SirDistribution, x: ArrayLike) -> Any:
    z = np.asarray(x, dtype=float)
    if dist.kind == "beta":
        return _scalar(special.betainc(dist.a, dist.b, np.clip(z / dist.scale, 0.0, 1.0)))
    return _scalar(special.ndtr((z - dist.mean) / math.sqrt(dist.variance)))


def pdf(dist: SirDistribution, x: ArrayLike) -> Any:
    z = np.asarray(x, dtype=float)
    if dist.kind == "beta":
        return _scalar(sps.beta.pdf(z / dist.scale, dist.a, dist.b) / dist.scale)
    return _scalar(sps.norm.pdf(z, loc=dist.mean, scale=math.sqrt(dist.variance)))


def quantile(dist: SirDistribution, q: ArrayLike) -> Any:
    level = np.asarray(q, dtype=float)
    if np.any((level < 0) | (level > 1)):
        raise ValueError("quantile levels must lie in [0, 1].")
    if dist.kind == "beta":
        return _scalar(dist.scale * special.betaincinv(dist.a, dist.b, level))
    return _scalar(dist.mean + math.sqrt(dist.variance) * special.ndtri(level))


def mean(dist: SirDistribution) -> float:
    return dist.mean


def p_delta(dist: SirDistribution, gamma_star: TargetSir | float, delta_db: float) -> float:
    """Probability that the SIR lands within delta_db decibels of gamma*."""
    if not delta_db > 0:
        raise ValueError("delta_db must be > 0.")
    g = float(gamma_star)
    low = float(from_db(-delta_db)) * g
    high = float(from_db(delta_db)) * g
    return float(cdf(dist, high) - cdf(dist, low))


def empirical_cdf(samples: ArrayLike) -> EmpiricalCdf:
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if values.size == 0:
        raise EmptySample("empirical CDF needs at least one sample")
    return EmpiricalCdf(values=values)


def evaluate_cdf(empirical: EmpiricalCdf, x: ArrayLike) -> Any:
    """Right-continuous step function F(x) = #{samples <= x} / n."""
    counts = np.searchsorted(empirical.values, np.asarray(x, dtype=float), side="right")
    return _scalar(counts / empirical.count)


def ks_distance(empirical: EmpiricalCdf | ArrayLike, dist: SirDistribution) -> float:
    ecdf = empirical if isinstance(empirical, EmpiricalCdf) else empirical_cdf(empirical)
    result = sps.kstest(ecdf.values, lambda x: cdf(dist, x))
    return float(result.statistic)


def empirical_p_delta(
    samples: ArrayLike,
    gamma_star: TargetSir | float,
    delta_db: float,
) -> tuple[float, float]:
    """Monte Carlo P_delta with its binomial standard error."""
    if not delta_db > 0:
        raise ValueError("delta_db must be > 0.")
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise EmptySample("P_delta needs at least one sample")
    g = float(gamma_star)
    low = float(from_db(-delta_db)) * g
    high = float(from_db(delta_db)) * g
    p = float(np.mean((values >= low) & (values <= high)))
    return p, math.sqrt(p * (1.0 - p) / values.size)
