"""Kinetic large-deviation toolkit: Python bindings to the C++ core."""

from ._core import (
    HamiltonianSolver,
    Model,
    StationaryProfile,
    builtin_model,
    builtin_model_names,
    ensemble,
    hamiltonian_table,
    load_model,
    run,
    set_thread_count,
    simulate_one,
    solve_stationary,
    subcommands,
    validate,
)

__all__ = [
    "HamiltonianSolver",
    "Model",
    "StationaryProfile",
    "builtin_model",
    "builtin_model_names",
    "ensemble",
    "hamiltonian_table",
    "load_model",
    "run",
    "set_thread_count",
    "simulate_one",
    "solve_stationary",
    "subcommands",
    "validate",
]
