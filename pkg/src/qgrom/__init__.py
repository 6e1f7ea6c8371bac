"""Finite-volume quasi-geostrophic solver with POD-Galerkin reduced order
models and a linear differential-filter closure."""

from .diagnostics import (
    EnergyTrace,
    gyre_count,
    kinetic_energy,
    munk_scale,
    relative_error,
    standard_vorticity,
    time_average,
)
from .field import Field, coordinate_field_y, forcing_field, inner_product, norm
from .fom import (
    FaceFlux,
    FomConfig,
    FomState,
    assemble_transport,
    curl_flux,
    run_fom,
    step,
)
from .linsolve import ConvergenceError, SolverReport, SparseMatrix, solve_general, solve_spd
from .mesh import Mesh, boundary_faces, build_mesh
from .pod import (
    PodBasis,
    SnapshotSet,
    build_basis,
    compute_lifting,
    correlation_matrix,
    eigendecompose,
    select_modes,
)
from .rom import (
    AlphaCalibration,
    ReducedOperators,
    RomConfig,
    RomState,
    RomTrajectory,
    assemble_reduced_operators,
    calibrate_alpha,
    project_initial,
    reconstruct,
    run_rom,
    step_bv_alpha,
    step_qge_qge,
)

__all__ = [name for name in dir() if not name.startswith("_")]
