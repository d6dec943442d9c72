from __future__ import annotations

from typing import Any, Optional


class PowerControlError(RuntimeError):
    """Base for failures raised by the solvers and experiment runners."""

    error_type = "power_control_error"
    exit_code = 3

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = dict(details or {})


class NoConvergence(PowerControlError):
    error_type = "no_convergence"


class LoadTooHigh(PowerControlError):
    error_type = "load_too_high"


class Infeasible(PowerControlError):
    error_type = "infeasible"


class DegenerateEfficiencyFunction(PowerControlError):
    error_type = "degenerate_efficiency_function"


class BaselineNoConvergence(PowerControlError):
    error_type = "baseline_no_convergence"


class SingularGram(PowerControlError):
    error_type = "singular_gram"


class ZeroPower(PowerControlError):
    error_type = "zero_power"
    exit_code = 2


class ZeroFilter(PowerControlError):
    error_type = "zero_filter"
    exit_code = 2


class TooManyUsers(PowerControlError):
    error_type = "too_many_users"
    exit_code = 2


class InvalidShape(PowerControlError):
    error_type = "invalid_shape"
    exit_code = 2


class InvalidLoad(PowerControlError):
    error_type = "invalid_load"
    exit_code = 2


class EmptySample(PowerControlError):
    error_type = "empty_sample"
    exit_code = 2


class ConfigError(PowerControlError):
    error_type = "config_error"
    exit_code = 2
