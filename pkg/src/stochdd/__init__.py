"""Two-level domain decomposition solvers for intrusive spectral stochastic FEM."""

from .klexp import CovarianceKernel, KLExpansion, assemble_covariance, relative_energy, solve_kle
from .krylov import SolveReport, condition_estimate, pcgm
from .mesh import BoxMesh, build_box_mesh, classify_interface, partition_boxes
from .pce import (
    LognormalPCE,
    PCBasis,
    TripleProductTensor,
    enumerate_basis,
    hermite_eval,
    project_lognormal,
    triple_products,
)
from .runner import RunConfig, RunResult, load_config, run_single, run_sweep

__all__ = [
    "BoxMesh",
    "CovarianceKernel",
    "KLExpansion",
    "LognormalPCE",
    "PCBasis",
    "RunConfig",
    "RunResult",
    "SolveReport",
    "TripleProductTensor",
    "assemble_covariance",
    "build_box_mesh",
    "classify_interface",
    "condition_estimate",
    "enumerate_basis",
    "hermite_eval",
    "load_config",
    "partition_boxes",
    "pcgm",
    "project_lognormal",
    "relative_energy",
    "run_single",
    "run_sweep",
    "solve_kle",
    "triple_products",
]

__version__ = "0.1.0"
