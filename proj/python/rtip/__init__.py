"""Critical rates of habitat shift in a bistable reaction-diffusion model."""

from ._rtip import (
    Classification,
    CriticalRateResult,
    CriticalSolver,
    DiagramEntry,
    HeteroclinicSolution,
    ModelParams,
    PointwiseOrder,
    PullbackDiagnostics,
    PullbackEngine,
    PullbackRun,
    PulseProfile,
    SpectrumReport,
    TippingDiagram,
    Trajectory,
    compute_pulse,
    find_eigenvalues,
    habitat,
    pointwise_order,
    ramp,
    shift_velocity,
)

__all__ = [
    "Classification",
    "CriticalRateResult",
    "CriticalSolver",
    "DiagramEntry",
    "HeteroclinicSolution",
    "ModelParams",
    "PointwiseOrder",
    "PullbackDiagnostics",
    "PullbackEngine",
    "PullbackRun",
    "PulseProfile",
    "SpectrumReport",
    "TippingDiagram",
    "Trajectory",
    "compute_pulse",
    "find_eigenvalues",
    "habitat",
    "pointwise_order",
    "ramp",
    "shift_velocity",
]

__version__ = "0.1.0"
