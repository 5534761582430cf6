"""Unknown-input observers for discrete-time LTI systems, designed from data."""

__version__ = "0.1.0"

from .datamat import (
    ColumnLayout,
    DataMatrices,
    Trajectory,
    build_data_matrices,
    check_assumption,
    disturbance_rank_evidence,
    read_trajectory,
    write_trajectory,
)
from .ddcheck import dd_rank_condition, existence_data_driven, kernel_inclusion, recover_C
from .ddsynth import (
    SolutionFamily,
    SynthesisResult,
    TSolution,
    assemble_uio,
    design_T2,
    select_detectable,
    solve_family,
    synthesize,
    uio_to_T,
)
from .errors import (
    AssumptionError,
    DimensionError,
    InvalidUIOError,
    NoUIOError,
    NonFiniteError,
    NotDetectableError,
    PlacementError,
    RetryBudgetError,
    TrajectoryFormatError,
    UIOError,
)
from .estimator import DataDrivenUIO
from .io import load_system, load_uio, save_system, save_uio
from .numkit import DEFAULT_TOL, Tolerance
from .oracle import (
    ExistenceReport,
    SystemModel,
    UioRealization,
    check_uio_conditions,
    design_model_based,
    example_system,
    existence_model_based,
    random_experiment,
    random_system,
    simulate_system,
)
from .sim import acceptor_z0, disturbance_gen, error_experiment, run_observer

__all__ = [
    "AssumptionError",
    "ColumnLayout",
    "DEFAULT_TOL",
    "DataDrivenUIO",
    "DataMatrices",
    "DimensionError",
    "ExistenceReport",
    "InvalidUIOError",
    "NoUIOError",
    "NonFiniteError",
    "NotDetectableError",
    "PlacementError",
    "RetryBudgetError",
    "SolutionFamily",
    "SynthesisResult",
    "SystemModel",
    "TSolution",
    "Tolerance",
    "Trajectory",
    "TrajectoryFormatError",
    "UIOError",
    "UioRealization",
    "acceptor_z0",
    "assemble_uio",
    "build_data_matrices",
    "check_assumption",
    "check_uio_conditions",
    "dd_rank_condition",
    "design_T2",
    "design_model_based",
    "disturbance_gen",
    "disturbance_rank_evidence",
    "error_experiment",
    "example_system",
    "existence_data_driven",
    "existence_model_based",
    "kernel_inclusion",
    "load_system",
    "load_uio",
    "random_experiment",
    "random_system",
    "read_trajectory",
    "recover_C",
    "run_observer",
    "save_system",
    "save_uio",
    "select_detectable",
    "simulate_system",
    "solve_family",
    "synthesize",
    "uio_to_T",
    "write_trajectory",
]
