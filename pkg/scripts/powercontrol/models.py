from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from scripts.numeric_common import as_vector


class Receiver(str, enum.Enum):
    MATCHED_FILTER = "mf"
    DECORRELATOR = "dec"
    MMSE = "mmse"
    INDIVIDUALLY_OPTIMAL = "io"
    JOINTLY_OPTIMAL_ML = "ml"

    @property
    def is_linear(self) -> bool:
        return self in LINEAR_RECEIVERS


LINEAR_RECEIVERS = frozenset({Receiver.MATCHED_FILTER, Receiver.DECORRELATOR, Receiver.MMSE})

_RECEIVER_ALIASES = {
    "matched_filter": "mf",
    "matched-filter": "mf",
    "decorrelator": "dec",
    "zf": "dec",
    "lmmse": "mmse",
    "optimal": "io",
    "individually_optimal": "io",
    "jo": "ml",
    "jointly_optimal": "ml",
}


def parse_receiver(value: str | Receiver) -> Receiver:
    if isinstance(value, Receiver):
        return value
    raw = value.strip().lower()
    normalized = _RECEIVER_ALIASES.get(raw, raw)
    try:
        return Receiver(normalized)
    except ValueError:
        valid = ", ".join(r.value for r in Receiver)
        raise ValueError(f"Invalid receiver '{value}'. Expected one of: {valid}.") from None


@dataclass(frozen=True)
class FixedPointSettings:
    tol: float = 1e-10
    max_iters: int = 10_000
    quadrature_nodes: int = 64
    damping: float = 0.5
    check_restarts: bool = True

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be > 0.")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1.")
        if self.quadrature_nodes < 8:
            raise ValueError("quadrature_nodes must be at least 8.")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1].")


@dataclass(frozen=True)
class ReceiverModel:
    kind: Receiver
    settings: FixedPointSettings = field(default_factory=FixedPointSettings)

    @classmethod
    def of(cls, kind: str | Receiver, settings: Optional[FixedPointSettings] = None) -> ReceiverModel:
        return cls(kind=parse_receiver(kind), settings=settings or FixedPointSettings())


@dataclass(frozen=True)
class SnrProfile:
    snrs: NDArray[np.float64]
    alpha: float

    def __init__(self, snrs: ArrayLike, alpha: float) -> None:
        arr = as_vector(snrs, name="snrs")
        if np.any(arr < 0):
            raise ValueError("snrs must be non-negative.")
        if not alpha > 0:
            raise ValueError("alpha must be > 0.")
        arr.setflags(write=False)
        object.__setattr__(self, "snrs", arr)
        object.__setattr__(self, "alpha", float(alpha))

    @classmethod
    def equal(cls, snr: float, alpha: float, count: int = 1) -> SnrProfile:
        return cls(np.full(count, float(snr)), alpha)

    @property
    def users(self) -> int:
        return int(self.snrs.size)

    @property
    def mean_snr(self) -> float:
        return float(np.mean(self.snrs))

    def scaled(self, theta: float) -> SnrProfile:
        return SnrProfile(self.snrs * theta, self.alpha)


@dataclass(frozen=True)
class Efficiency:
    eta: float
    iterations: int = 0
    ambiguous: bool = False
    alternate_eta: Optional[float] = None

    def __float__(self) -> float:
        return self.eta


@dataclass(frozen=True)
class EfficiencyFunction:
    """Packet success model f(gamma) = (1 - exp(-gamma))**M for M-bit packets carrying L bits."""

    m_bits: int = 100
    l_bits: int = 100
    rate: float = 1e5

    def __post_init__(self) -> None:
        if self.m_bits < 1:
            raise ValueError("m_bits must be at least 1.")
        # a single-bit packet is kept constructible so target_sir can report it as degenerate
        if self.m_bits == 1:
            if self.l_bits != 1:
                raise ValueError("a 1-bit packet carries L = 1.")
        elif not 2 <= self.l_bits <= self.m_bits:
            raise ValueError("l_bits must satisfy 2 <= L <= M.")
        if not self.rate > 0:
            raise ValueError("rate must be > 0.")


@dataclass(frozen=True)
class TargetSir:
    gamma_star: float

    def __post_init__(self) -> None:
        if not self.gamma_star > 0:
            raise ValueError("gamma_star must be > 0.")

    def __float__(self) -> float:
        return self.gamma_star


@dataclass(frozen=True)
class SystemParams:
    gains: NDArray[np.float64]
    noise_var: float
    alpha: float
    p_max: Optional[float] = None

    def __init__(
        self,
        gains: ArrayLike,
        noise_var: float,
        alpha: float,
        p_max: Optional[float] = None,
    ) -> None:
        arr = as_vector(gains, name="gains")
        if np.any(arr <= 0):
            raise ValueError("gains must be > 0.")
        if not noise_var > 0:
            raise ValueError("noise_var must be > 0.")
        if not alpha > 0:
            raise ValueError("alpha must be > 0.")
        if p_max is not None and not p_max > 0:
            raise ValueError("p_max must be > 0 when set.")
        arr.setflags(write=False)
        object.__setattr__(self, "gains", arr)
        object.__setattr__(self, "noise_var", float(noise_var))
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "p_max", None if p_max is None else float(p_max))

    @property
    def users(self) -> int:
        return int(self.gains.size)

    def snrs(self, powers: NDArray[np.float64]) -> NDArray[np.float64]:
        return powers * self.gains / self.noise_var


@dataclass(frozen=True)
class PowerState:
    powers: NDArray[np.float64]
    eta_trace: tuple[float, ...] = ()
    n: int = 0
    converged: bool = False
    capped_users: frozenset[int] = frozenset()
    power_history: tuple[NDArray[np.float64], ...] = ()

    @classmethod
    def initial(cls, powers: ArrayLike) -> PowerState:
        arr = as_vector(powers, name="initial powers")
        if np.any(arr <= 0):
            raise ValueError("initial powers must be > 0.")
        return cls(powers=arr, power_history=(arr,))


@dataclass(frozen=True)
class SpreadingMatrix:
    chips: NDArray[np.float64]
    kind: str = "binary"

    @property
    def n(self) -> int:
        return int(self.chips.shape[0])

    @property
    def k(self) -> int:
        return int(self.chips.shape[1])

    @property
    def alpha(self) -> float:
        return self.k / self.n


@dataclass(frozen=True)
class ChannelRealization:
    """Y = S sqrt(Gamma) X + W over one or more symbol periods (columns of `symbols` and `noise`)."""

    spreading: SpreadingMatrix
    snrs: NDArray[np.float64]
    symbols: NDArray[np.float64]
    noise: NDArray[np.float64]

    def __post_init__(self) -> None:
        k, n = self.spreading.k, self.spreading.n
        if self.snrs.shape != (k,):
            raise ValueError(f"expected {k} SNRs, got shape {self.snrs.shape}.")
        if self.symbols.shape[:1] != (k,) or self.noise.shape[:1] != (n,):
            raise ValueError("symbols need K rows and noise N rows.")
        if self.symbols.shape[1:] != self.noise.shape[1:]:
            raise ValueError("symbols and noise must cover the same symbol periods.")

    @property
    def received(self) -> NDArray[np.float64]:
        amplitudes = np.sqrt(self.snrs).reshape((-1,) + (1,) * (self.symbols.ndim - 1))
        return self.spreading.chips @ (amplitudes * self.symbols) + self.noise


@dataclass(frozen=True)
class SymbolOutcome:
    receiver: Receiver
    sirs: Optional[NDArray[np.float64]]
    symbols: NDArray[np.float64]
    decisions: NDArray[np.float64]

    @property
    def bit_errors(self) -> NDArray[np.bool_]:
        return self.decisions != self.symbols


@dataclass(frozen=True)
class SirDistribution:
    kind: str  # beta|gaussian
    a: float = 0.0
    b: float = 0.0
    scale: float = 1.0
    mean: float = 0.0
    variance: float = 0.0

    @classmethod
    def beta(cls, a: float, b: float, scale: float) -> SirDistribution:
        return cls(kind="beta", a=a, b=b, scale=scale, mean=scale * a / (a + b))

    @classmethod
    def gaussian(cls, mean: float, variance: float) -> SirDistribution:
        return cls(kind="gaussian", mean=mean, variance=variance)


@dataclass(frozen=True)
class EmpiricalCdf:
    values: NDArray[np.float64]

    @property
    def count(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class GainModel:
    coefficient: float = 0.1
    exponent: float = -4.0
    base_distance: float = 100.0
    step_distance: float = 10.0
    distances: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "fig1"
    receivers: tuple[Receiver, ...] = (
        Receiver.DECORRELATOR,
        Receiver.MMSE,
        Receiver.JOINTLY_OPTIMAL_ML,
    )
    n: int = 32
    k: int = 8
    n_values: tuple[int, ...] = (16, 64, 256)
    alpha_values: tuple[float, ...] = (0.25, 0.75)
    packet_bits: int = 100
    info_bits: int = 100
    rate: float = 1e5
    gamma_star: Optional[float] = None
    noise_var: float = 1.6e-14
    gains: GainModel = field(default_factory=GainModel)
    chips: str = "binary"
    realizations: int = 10_000
    symbols: int = 200
    seed: int = 0
    delta_db: float = 1.0
    workers: int = 1
    output_dir: Path = Path("results")
    upc_tol: float = 1e-8
    upc_max_iters: int = 100
    initial_power: float = 1e-3
    p_max: Optional[float] = None
    divergence_factor: float = 1e6
    solver: FixedPointSettings = field(default_factory=FixedPointSettings)

    @property
    def alpha(self) -> float:
        return self.k / self.n


@dataclass
class ResultSet:
    experiment: str
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    manifest: dict[str, Any] = field(default_factory=dict)
    run_dir: Optional[Path] = None
