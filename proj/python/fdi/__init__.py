"""Residual filters for detecting false data injection on AGC tie-line measurements."""

from ._core import (
    ConfigError,
    DimensionError,
    Error,
    Experiment,
    Filter,
    InfeasibleError,
    NumericalError,
    SimulationError,
    TrainingBundle,
    denominator,
    gram_matrix,
    impulse_response,
    load_config,
    reference_config,
    residual_energy,
    run_all,
    solve_lp,
    solve_qp,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "Error",
    "Experiment",
    "Filter",
    "InfeasibleError",
    "NumericalError",
    "SimulationError",
    "TrainingBundle",
    "denominator",
    "gram_matrix",
    "impulse_response",
    "load_config",
    "reference_config",
    "residual_energy",
    "run_all",
    "solve_lp",
    "solve_qp",
]
