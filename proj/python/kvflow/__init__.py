"""Kelvin-Voigt visco-elastodynamics: Python front end to the C++ core."""

from ._kvflow import (
    ConfigError,
    NumericalError,
    RunConfig,
    ValidationError,
    load_config,
    parse_config,
    run,
    simulate,
    stored_energy,
    sweep_eps,
    sweep_k,
    verify,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "RunConfig",
    "ValidationError",
    "load_config",
    "parse_config",
    "run",
    "simulate",
    "stored_energy",
    "sweep_eps",
    "sweep_k",
    "verify",
]
