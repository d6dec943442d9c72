from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .models import ExperimentConfig, FixedPointSettings, GainModel, parse_receiver
from .realizations import default_workers

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore[no-redef]

DEFAULTS: dict[str, dict[str, Any]] = {
    "system": {
        "n": 32,
        "k": 8,
        "noise_var": 1.6e-14,
        "chips": "binary",
    },
    "gains": {
        "coefficient": 0.1,
        "exponent": -4.0,
        "base_distance": 100.0,
        "step_distance": 10.0,
    },
    "game": {
        "packet_bits": 100,
        "info_bits": 100,
        "rate": 1e5,
    },
    "upc": {
        "tol": 1e-8,
        "max_iters": 100,
        "initial_power": 1e-3,
        "divergence_factor": 1e6,
    },
    "solver": {
        "tol": 1e-10,
        "max_iters": 10_000,
        "quadrature_nodes": 64,
        "damping": 0.5,
        "check_restarts": True,
    },
    "experiment": {
        "name": "fig1",
        "receivers": ["dec", "mmse", "ml"],
        "n_values": [16, 64, 256],
        "alpha_values": [0.25, 0.75],
        "realizations": 10_000,
        "symbols": 200,
        "seed": 0,
        "delta_db": 1.0,
        "workers": 0,
        "output_dir": "results",
    },
}

# keys that are valid but have no default (TOML cannot spell null)
OPTIONAL_KEYS = {
    "gains": {"distances"},
    "game": {"gamma_star"},
    "upc": {"p_max"},
}

POSITIVE_KEYS = {
    ("system", "n"),
    ("system", "k"),
    ("system", "noise_var"),
    ("gains", "coefficient"),
    ("gains", "base_distance"),
    ("game", "packet_bits"),
    ("game", "info_bits"),
    ("game", "rate"),
    ("game", "gamma_star"),
    ("upc", "tol"),
    ("upc", "max_iters"),
    ("upc", "initial_power"),
    ("upc", "divergence_factor"),
    ("upc", "p_max"),
    ("solver", "tol"),
    ("solver", "max_iters"),
    ("solver", "quadrature_nodes"),
    ("solver", "damping"),
    ("experiment", "realizations"),
    ("experiment", "symbols"),
    ("experiment", "delta_db"),
}

EXPERIMENTS = ("fig1", "fig2", "table1", "cdf")


def merge_sections(
    base: dict[str, dict[str, Any]],
    payload: dict[str, Any],
    *,
    source: str,
) -> dict[str, dict[str, Any]]:
    merged = copy.deepcopy(base)
    for section, values in payload.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}] in {source}", {"section": section})
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table in {source}", {"section": section})
        allowed = set(DEFAULTS[section]) | OPTIONAL_KEYS.get(section, set())
        for key, value in values.items():
            if key not in allowed:
                raise ConfigError(
                    f"unknown key '{key}' in [{section}] of {source}",
                    {"section": section, "key": key},
                )
            merged[section][key] = value
    return merged


def load_config(path: Optional[Path] = None) -> dict[str, dict[str, Any]]:
    if path is None:
        merged = copy.deepcopy(DEFAULTS)
    else:
        with path.open("rb") as fh:
            try:
                payload = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"invalid TOML in {path}: {exc}", {"path": str(path)}) from exc
        merged = merge_sections(DEFAULTS, payload, source=str(path))
    validate_config(merged)
    return merged


def apply_overrides(
    config: dict[str, dict[str, Any]],
    overrides: dict[str, dict[str, Any]],
) -> dict[str, dict[str, Any]]:
    trimmed = {
        section: {k: v for k, v in values.items() if v is not None}
        for section, values in overrides.items()
    }
    merged = merge_sections(config, trimmed, source="command line")
    validate_config(merged)
    return merged


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(config: dict[str, dict[str, Any]]) -> None:
    for section, key in sorted(POSITIVE_KEYS):
        if key not in config[section]:
            continue
        value = config[section][key]
        if not _is_number(value) or not value > 0:
            raise ConfigError(
                f"[{section}] {key} must be a positive number, got {value!r}",
                {"section": section, "key": key},
            )
    system = config["system"]
    if system["chips"] not in ("binary", "gaussian"):
        raise ConfigError(f"[system] chips must be binary or gaussian, got {system['chips']!r}")
    game = config["game"]
    if game["info_bits"] > game["packet_bits"]:
        raise ConfigError("[game] info_bits must not exceed packet_bits")
    if game["packet_bits"] > 1 and game["info_bits"] < 2:
        raise ConfigError("[game] info_bits must be at least 2")
    if not config["solver"]["damping"] <= 1.0:
        raise ConfigError("[solver] damping must lie in (0, 1]")
    experiment = config["experiment"]
    workers = experiment["workers"]
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 0:
        raise ConfigError(f"[experiment] workers must be an integer >= 0 (0 = all cores), got {workers!r}")
    if experiment["name"] not in EXPERIMENTS:
        raise ConfigError(
            f"[experiment] name must be one of {', '.join(EXPERIMENTS)}, got {experiment['name']!r}"
        )
    seed = experiment["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"[experiment] seed must be a non-negative integer, got {seed!r}")
    if not isinstance(experiment["receivers"], list) or not experiment["receivers"]:
        raise ConfigError("[experiment] receivers must be a non-empty list")
    try:
        for receiver in experiment["receivers"]:
            parse_receiver(str(receiver))
    except ValueError as exc:
        raise ConfigError(f"[experiment] receivers: {exc}") from exc
    for key in ("n_values", "alpha_values"):
        values = experiment[key]
        if not isinstance(values, list) or not values or not all(_is_number(v) and v > 0 for v in values):
            raise ConfigError(f"[experiment] {key} must be a non-empty list of positive numbers")
    distances = config["gains"].get("distances")
    if distances is not None:
        if not isinstance(distances, list) or not all(_is_number(d) and d > 0 for d in distances):
            raise ConfigError("[gains] distances must be a list of positive numbers")
        if len(distances) != system["k"]:
            raise ConfigError(
                f"[gains] distances lists {len(distances)} users but [system] k = {system['k']}"
            )


def experiment_config(config: dict[str, dict[str, Any]]) -> ExperimentConfig:
    system = config["system"]
    gains = config["gains"]
    game = config["game"]
    upc = config["upc"]
    solver = config["solver"]
    experiment = config["experiment"]
    distances = gains.get("distances")
    try:
        settings = FixedPointSettings(
            tol=float(solver["tol"]),
            max_iters=int(solver["max_iters"]),
            quadrature_nodes=int(solver["quadrature_nodes"]),
            damping=float(solver["damping"]),
            check_restarts=bool(solver["check_restarts"]),
        )
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc
    gamma_star = game.get("gamma_star")
    p_max = upc.get("p_max")
    return ExperimentConfig(
        name=str(experiment["name"]),
        receivers=tuple(parse_receiver(str(r)) for r in experiment["receivers"]),
        n=int(system["n"]),
        k=int(system["k"]),
        n_values=tuple(int(v) for v in experiment["n_values"]),
        alpha_values=tuple(float(v) for v in experiment["alpha_values"]),
        packet_bits=int(game["packet_bits"]),
        info_bits=int(game["info_bits"]),
        rate=float(game["rate"]),
        gamma_star=None if gamma_star is None else float(gamma_star),
        noise_var=float(system["noise_var"]),
        gains=GainModel(
            coefficient=float(gains["coefficient"]),
            exponent=float(gains["exponent"]),
            base_distance=float(gains["base_distance"]),
            step_distance=float(gains["step_distance"]),
            distances=None if distances is None else tuple(float(d) for d in distances),
        ),
        chips=str(system["chips"]),
        realizations=int(experiment["realizations"]),
        symbols=int(experiment["symbols"]),
        seed=int(experiment["seed"]),
        delta_db=float(experiment["delta_db"]),
        workers=int(experiment["workers"]) or default_workers(),
        output_dir=Path(str(experiment["output_dir"])),
        upc_tol=float(upc["tol"]),
        upc_max_iters=int(upc["max_iters"]),
        initial_power=float(upc["initial_power"]),
        p_max=None if p_max is None else float(p_max),
        divergence_factor=float(upc["divergence_factor"]),
        solver=settings,
    )


def config_as_dict(config: ExperimentConfig) -> dict[str, Any]:
    """Plain JSON-able view for run manifests."""
    return {
        "name": config.name,
        "receivers": [r.value for r in config.receivers],
        "n": config.n,
        "k": config.k,
        "n_values": list(config.n_values),
        "alpha_values": list(config.alpha_values),
        "packet_bits": config.packet_bits,
        "info_bits": config.info_bits,
        "rate": config.rate,
        "gamma_star": config.gamma_star,
        "noise_var": config.noise_var,
        "gains": {
            "coefficient": config.gains.coefficient,
            "exponent": config.gains.exponent,
            "base_distance": config.gains.base_distance,
            "step_distance": config.gains.step_distance,
            "distances": None if config.gains.distances is None else list(config.gains.distances),
        },
        "chips": config.chips,
        "realizations": config.realizations,
        "symbols": config.symbols,
        "seed": config.seed,
        "delta_db": config.delta_db,
        "upc_tol": config.upc_tol,
        "upc_max_iters": config.upc_max_iters,
        "initial_power": config.initial_power,
        "p_max": config.p_max,
        "divergence_factor": config.divergence_factor,
        "solver": {
            "tol": config.solver.tol,
            "max_iters": config.solver.max_iters,
            "quadrature_nodes": config.solver.quadrature_nodes,
            "damping": config.solver.damping,
            "check_restarts": config.solver.check_restarts,
        },
    }
