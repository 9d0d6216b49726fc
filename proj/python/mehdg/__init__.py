"""Macro-element HDG solver for steady advection-diffusion."""

from ._mehdg import (
    Error,
    InvalidArgument,
    MacroMesh,
    adapt,
    build_mesh,
    compare,
    convergence,
    cost,
    cost_report,
    mark,
    operation_counts,
    patch_dof_count,
    solve,
    stabilization_tau,
    supg_parameter,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "MacroMesh",
    "adapt",
    "build_mesh",
    "compare",
    "convergence",
    "cost",
    "cost_report",
    "mark",
    "operation_counts",
    "patch_dof_count",
    "solve",
    "stabilization_tau",
    "supg_parameter",
]
