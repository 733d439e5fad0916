"""Penalty-based ensemble solver for 2D incompressible flow.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface: the four studies (convergence, rotors, cylinder,
Monte Carlo), mesh utilities, the statistics CSV round-trip, the
manufactured solution, and the seeded sampler.
"""

from ._penflow import (
    MEAN_MEMBER,
    CoefficientVector,
    ConvergenceConfig,
    ConvergenceLevel,
    ConvergenceResult,
    CylinderConfig,
    CylinderResult,
    Mesh,
    MonteCarloConfig,
    MonteCarloResult,
    RotorsConfig,
    RotorsResult,
    RunReport,
    StabilityLedger,
    StatRecord,
    UniformSampler,
    Vec2,
    __version__,
    generate_unit_square,
    manufactured_force,
    manufactured_pressure,
    manufactured_velocity,
    mesh_size,
    read_msh_file,
    read_stats_csv,
    rotors_left_amplitude,
    rotors_right_amplitude,
    run_cli,
    run_convergence,
    run_cylinder,
    run_montecarlo,
    run_rotors,
    write_stats_csv,
)

__all__ = [
    "MEAN_MEMBER",
    "CoefficientVector",
    "ConvergenceConfig",
    "ConvergenceLevel",
    "ConvergenceResult",
    "CylinderConfig",
    "CylinderResult",
    "Mesh",
    "MonteCarloConfig",
    "MonteCarloResult",
    "RotorsConfig",
    "RotorsResult",
    "RunReport",
    "StabilityLedger",
    "StatRecord",
    "UniformSampler",
    "Vec2",
    "__version__",
    "generate_unit_square",
    "manufactured_force",
    "manufactured_pressure",
    "manufactured_velocity",
    "mesh_size",
    "read_msh_file",
    "read_stats_csv",
    "rotors_left_amplitude",
    "rotors_right_amplitude",
    "run_cli",
    "run_convergence",
    "run_cylinder",
    "run_montecarlo",
    "run_rotors",
    "write_stats_csv",
]
