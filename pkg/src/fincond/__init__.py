"""Conductivity reconstruction for a 2-D cooling fin.

A finite-difference forward solver for the steady-state fin equation
with Robin boundaries, plus a Metropolis-Hastings chain that inverts
boundary temperature data under smoothness, slope-ratio, and flatness
priors.
"""

__version__ = "0.1.0"

from .chain import (
    ChainResult,
    ChainState,
    McmcConfig,
    checkpoint_load,
    checkpoint_save,
    mh_step,
    run_chain,
    run_chains,
)
from .estimator import ConductivityReconstructor
from .forward import (
    FinSolver,
    PhysicalParams,
    assemble_system,
    boundary_of_solution,
    solve_forward,
)
from .grid import (
    BoundaryTrace,
    ConductivityField,
    MeshSpec,
    TemperatureField,
    constant_field,
    extract_boundary,
    make_mesh,
)
from .priors import (
    PriorWeights,
    acceptance_probability,
    data_misfit,
    slope_terms,
    smoothness_term,
)
from .proposals import (
    ProposalConfig,
    RngStream,
    derive_seed,
    propose_gridwise,
    propose_pointwise,
    propose_uniform,
)
from .trials import (
    TrialSpec,
    gaussian_well,
    reconstruction_error,
    synthesize_data,
    tilted_plane,
)

__all__ = [
    "BoundaryTrace",
    "ChainResult",
    "ChainState",
    "ConductivityField",
    "ConductivityReconstructor",
    "FinSolver",
    "McmcConfig",
    "MeshSpec",
    "PhysicalParams",
    "PriorWeights",
    "ProposalConfig",
    "RngStream",
    "TemperatureField",
    "TrialSpec",
    "acceptance_probability",
    "assemble_system",
    "boundary_of_solution",
    "checkpoint_load",
    "checkpoint_save",
    "constant_field",
    "data_misfit",
    "derive_seed",
    "extract_boundary",
    "gaussian_well",
    "make_mesh",
    "mh_step",
    "propose_gridwise",
    "propose_pointwise",
    "propose_uniform",
    "reconstruction_error",
    "run_chain",
    "run_chains",
    "slope_terms",
    "smoothness_term",
    "solve_forward",
    "synthesize_data",
    "tilted_plane",
]
