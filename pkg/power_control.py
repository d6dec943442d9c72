#!/usr/bin/env python3
"""Entrypoint for the power-control solvers and experiments."""

from __future__ import annotations

import sys

from scripts.powercontrol import cli as _cli
from scripts.powercontrol import efficiency as _efficiency
from scripts.powercontrol import experiments as _experiments
from scripts.powercontrol import game as _game
from scripts.powercontrol import models as _models
from scripts.powercontrol import stats as _stats
from scripts.powercontrol import system as _system
from scripts.powercontrol import upc as _upc


main = _cli.main

SnrProfile = _models.SnrProfile
Efficiency = _models.Efficiency
FixedPointSettings = _models.FixedPointSettings
Receiver = _models.Receiver
ReceiverModel = _models.ReceiverModel
EfficiencyFunction = _models.EfficiencyFunction
TargetSir = _models.TargetSir
SystemParams = _models.SystemParams
PowerState = _models.PowerState
ExperimentConfig = _models.ExperimentConfig
ResultSet = _models.ResultSet

mf_efficiency = _efficiency.mf_efficiency
dec_efficiency = _efficiency.dec_efficiency
mmse_efficiency = _efficiency.mmse_efficiency
mmse_efficiency_closed_form = _efficiency.mmse_efficiency_closed_form
io_efficiency = _efficiency.io_efficiency
efficiency = _efficiency.efficiency

packet_success = _game.packet_success
target_sir = _game.target_sir
utility = _game.utility
utility_loss_ratio = _game.utility_loss_ratio

upc_step = _upc.upc_step
run_upc = _upc.run_upc
balanced_snr_closed_form = _upc.balanced_snr_closed_form
interference_function = _upc.interference_function
sif_property_harness = _upc.sif_property_harness

sample_spreading = _system.sample_spreading
linear_sir = _system.linear_sir
receiver_filter = _system.receiver_filter
detect_ml = _system.detect_ml
detect_io = _system.detect_io
simulate_symbol = _system.simulate_symbol

dec_beta_distribution = _stats.dec_beta_distribution
p_delta = _stats.p_delta
gaussian_variance = _stats.gaussian_variance
empirical_cdf = _stats.empirical_cdf
ks_distance = _stats.ks_distance

run_fig1 = _experiments.run_fig1
run_table1 = _experiments.run_table1
run_cdf = _experiments.run_cdf
run_sir_ber_series = _experiments.run_sir_ber_series
run_experiment = _experiments.run_experiment


__all__ = [
    "Efficiency",
    "EfficiencyFunction",
    "ExperimentConfig",
    "FixedPointSettings",
    "PowerState",
    "Receiver",
    "ReceiverModel",
    "ResultSet",
    "SnrProfile",
    "SystemParams",
    "TargetSir",
    "balanced_snr_closed_form",
    "dec_beta_distribution",
    "dec_efficiency",
    "detect_io",
    "detect_ml",
    "efficiency",
    "empirical_cdf",
    "gaussian_variance",
    "interference_function",
    "io_efficiency",
    "ks_distance",
    "linear_sir",
    "main",
    "mf_efficiency",
    "mmse_efficiency",
    "mmse_efficiency_closed_form",
    "p_delta",
    "packet_success",
    "receiver_filter",
    "run_cdf",
    "run_experiment",
    "run_fig1",
    "run_sir_ber_series",
    "run_table1",
    "run_upc",
    "sample_spreading",
    "sif_property_harness",
    "simulate_symbol",
    "target_sir",
    "upc_step",
    "utility",
    "utility_loss_ratio",
]


if __name__ == "__main__":
    sys.exit(main())
