"""Hamiltonian flows of the torus and the disk acting on fields of complex structures."""

from .curvature import (
    CurvatureError,
    gaussian_curvature,
    hermitian_scalar_curvature,
    metric_coefficients,
    moment_map_ham,
)
from .fiber import TRACE_MOMENT_FACTOR, FiberSpace, HamAction, frak_S, ham_instance, pushforward_J
from .flow import (
    FlowError,
    FlowState,
    HamFlowSpec,
    Hamiltonian,
    check_step,
    forward_map,
    integrate_flow,
    inverse_map,
    symplectic_drift,
)
from .grid import JField, SurfaceGrid, read_grid, smooth_bump, write_grid
from .invariants import (
    LocalTypeReport,
    TauResult,
    barge_ghys_tau,
    calabi,
    embedding_pair,
    local_type_report,
    sobolev_norm_22,
)

__all__ = [
    "CurvatureError", "FiberSpace", "FlowError", "FlowState", "HamAction", "HamFlowSpec", "Hamiltonian",
    "JField", "LocalTypeReport", "SurfaceGrid", "TRACE_MOMENT_FACTOR", "TauResult", "barge_ghys_tau",
    "calabi", "check_step", "embedding_pair", "forward_map", "frak_S", "gaussian_curvature", "ham_instance",
    "hermitian_scalar_curvature", "integrate_flow", "inverse_map", "local_type_report", "metric_coefficients",
    "moment_map_ham", "pushforward_J", "read_grid", "smooth_bump", "sobolev_norm_22", "symplectic_drift",
    "write_grid",
]
