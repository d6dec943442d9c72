from __future__ import annotations

from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import interpolate, optimize

from scripts.numeric_common import as_vector, db, from_db

from .errors import DegenerateEfficiencyFunction, ZeroPower
from .models import EfficiencyFunction, TargetSir

__all__ = [
    "db",
    "equilibrium_utility",
    "from_db",
    "packet_success",
    "packet_success_derivative",
    "tabulated_target_sir",
    "target_sir",
    "utility",
    "utility_loss_ratio",
]

BRACKET = (1e-6, 50.0)


def packet_success(eff: EfficiencyFunction, gamma: ArrayLike) -> Any:
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be >= 0.")
    value = (-np.expm1(-g)) ** eff.m_bits
    return float(value) if value.ndim == 0 else value


def packet_success_derivative(eff: EfficiencyFunction, gamma: ArrayLike) -> Any:
    g = np.asarray(gamma, dtype=float)
    m = eff.m_bits
    value = m * np.exp(-g) * (-np.expm1(-g)) ** (m - 1)
    return float(value) if value.ndim == 0 else value


def target_sir(eff: EfficiencyFunction, tol: float = 1e-12) -> TargetSir:
    """Positive root of f(g) = g*f'(g); for this f it reduces to exp(g) = 1 + M*g."""
    m = eff.m_bits
    if m < 2:
        raise DegenerateEfficiencyFunction(
            f"M={m} has no positive target SIR; f is not sigmoidal",
            {"m_bits": m},
        )
    lo, hi = BRACKET
    root = optimize.bisect(lambda g: np.expm1(g) - m * g, lo, hi, xtol=tol, maxiter=500)
    return TargetSir(gamma_star=float(root))


def tabulated_target_sir(
    gammas: ArrayLike,
    values: ArrayLike,
    tol: float = 1e-10,
) -> TargetSir:
    """Target SIR for an efficiency function given as samples (gamma, f(gamma))."""
    g = as_vector(gammas, name="gammas")
    f = as_vector(values, name="values")
    if g.size != f.size or g.size < 4:
        raise ValueError("need at least 4 matching (gamma, f) samples.")
    if np.any(np.diff(g) <= 0):
        raise ValueError("gammas must be strictly increasing.")
    spline = interpolate.PchipInterpolator(g, f, extrapolate=False)
    d1 = spline.derivative(1)
    d2 = spline.derivative(2)

    def residual(x: float) -> float:
        return float(spline(x) - x * d1(x))

    positive = g > 0
    ratio = np.where(positive, f / np.where(positive, g, 1.0), -np.inf)
    guess = float(g[int(np.argmax(ratio))])
    try:
        root = optimize.newton(
            residual,
            guess,
            fprime=lambda x: float(-x * d2(x)),
            tol=tol,
            maxiter=100,
        )
        if g[0] <= root <= g[-1] and np.isfinite(root):
            return TargetSir(gamma_star=float(root))
    except (RuntimeError, ZeroDivisionError, ValueError):
        pass

    # Newton left the table; bracket the sign change around the grid optimum
    grid = g[positive]
    resid = np.array([residual(x) for x in grid])
    changes = np.nonzero(np.sign(resid[:-1]) != np.sign(resid[1:]))[0]
    if changes.size == 0:
        raise DegenerateEfficiencyFunction(
            "tabulated efficiency function has no interior target SIR",
            {"samples": int(g.size)},
        )
    i = int(changes[np.argmin(np.abs(grid[changes] - guess))])
    root = optimize.brentq(residual, grid[i], grid[i + 1], xtol=tol)
    return TargetSir(gamma_star=float(root))


def utility(eff: EfficiencyFunction, gamma: float, power: float) -> float:
    if not power > 0:
        raise ZeroPower("utility is undefined at zero transmit power", {"power": power})
    return eff.l_bits * eff.rate * packet_success(eff, gamma) / (eff.m_bits * power)


def utility_loss_ratio(
    eff: EfficiencyFunction,
    gamma_hat: ArrayLike,
    gamma_star: TargetSir | float,
) -> Any:
    """Utility at SIR gamma_hat relative to the equilibrium utility (1 at gamma_hat = gamma*)."""
    gs = float(gamma_star)
    gh = np.asarray(gamma_hat, dtype=float)
    if np.any(gh <= 0):
        raise ValueError("gamma_hat must be > 0.")
    value = gs * packet_success(eff, gh) / (gh * packet_success(eff, gs))
    return float(value) if np.ndim(value) == 0 else value


def equilibrium_utility(
    eff: EfficiencyFunction,
    gamma_star: TargetSir | float,
    powers: ArrayLike,
) -> NDArray[np.float64]:
    p = as_vector(powers, name="powers")
    if np.any(p <= 0):
        raise ZeroPower("equilibrium powers must be > 0", {"min_power": float(p.min())})
    return eff.l_bits * eff.rate * packet_success(eff, float(gamma_star)) / (eff.m_bits * p)
