"""Misfit, adjoint state, and the descent gradient of the regularized objective.

The data misfit is half the squared L2 distance between grad A and the
measured flux map. Its derivative with respect to the phase field is made
explicit through one adjoint solve with the (symmetric) forward tangent,
then projected onto the nodal space through a mass solve, together with
the smoothing term alpha * |grad phi|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem, materials
from .errors import InvalidArgumentError
from .fem import NodalField, QuadVectorField
from .forward import assemble_tangent
from .materials import MaterialCurve


@dataclass(frozen=True)
class GradientBundle:
    """Everything the descent loop needs at one phase-field iterate."""

    f1: float          # data misfit
    f: float           # misfit plus smoothing term
    p: NodalField      # adjoint state (zero boundary values)
    df: NodalField     # nodal gradient of the regularized objective


def _require_quad_layout(A: NodalField, mbar: QuadVectorField):
    if mbar.grid != A.grid:
        raise InvalidArgumentError("measurement data lives on a different grid")
    if mbar.vectors.shape[1] != A.grid.shape_at_qp.shape[0]:
        raise InvalidArgumentError("measurement data has a different quadrature layout")


def evaluate_misfit(A: NodalField, mbar: QuadVectorField) -> float:
    """Half the squared L2 norm of (grad A - data) over the domain."""
    _require_quad_layout(A, mbar)
    diff = fem.gradient_at_quad(A).vectors - mbar.vectors
    return 0.5 * float(np.einsum("q,cqd,cqd->", A.grid.qp_weights, diff, diff))


def misfit_rhs(A: NodalField, mbar: QuadVectorField) -> np.ndarray:
    """Nodal vector of integral((grad A - data) . grad basis_k), boundary zeroed."""
    _require_quad_layout(A, mbar)
    grid = A.grid
    diff = fem.gradient_at_quad(A).vectors - mbar.vectors
    r = fem.assemble_grad_load(grid, diff)
    r[grid.boundary_nodes] = 0.0
    return r


def solve_adjoint(A: NodalField, phi: NodalField, mbar: QuadVectorField,
                  curve: MaterialCurve) -> NodalField:
    """Adjoint state p: tangent(A, phi) p = misfit_rhs, zero on the boundary."""
    grid = A.grid
    tangent = assemble_tangent(A, phi, curve)
    t_bc, r_bc = fem.apply_dirichlet_zero(tangent, misfit_rhs(A, mbar), grid)
    return NodalField(grid, fem.solve_spd(t_bc, r_bc, rel_tol=1e-12))


def solve_sensitivity(A: NodalField, phi: NodalField, direction: NodalField,
                      curve: MaterialCurve) -> NodalField:
    """Linearized response of the potential to a phase perturbation.

    Solves tangent(A, phi) dA = -b, where b_k = integral((v2 - v1) h
    grad A . grad basis_k) for the perturbation h. This is the direct
    (one-solve-per-direction) route that the adjoint state replaces; kept
    as the independent cross-check of the adjoint identity.
    """
    grid = A.grid
    if direction.grid != grid or phi.grid != grid:
        raise InvalidArgumentError("fields live on different grids")
    grad_a = fem.gradient_at_quad(A).vectors
    s = np.einsum("cqd,cqd->cq", grad_a, grad_a)
    contrast = materials.v2(curve, s) - materials.v1(curve, s)
    h_q = fem.values_at_quad(direction)
    b = fem.assemble_grad_load(grid, (contrast * h_q)[:, :, None] * grad_a)
    tangent = assemble_tangent(A, phi, curve)
    t_bc, b_bc = fem.apply_dirichlet_zero(tangent, -b, grid)
    return NodalField(grid, fem.solve_spd(t_bc, b_bc, rel_tol=1e-12))


def assemble_gradient(A: NodalField, p: NodalField, phi: NodalField,
                      curve: MaterialCurve, alpha: float) -> NodalField:
    """Nodal gradient of the regularized objective via a mass projection.

    Solves M df = g with g_k = -integral((v2 - v1)(grad A . grad p) basis_k)
    + 2 alpha integral(grad phi . grad basis_k). No boundary constraint is
    imposed on df, so boundary values of the phase field can evolve.
    """
    grid = _same_grid(A, p, phi)
    if alpha < 0 or not np.isfinite(alpha):
        raise InvalidArgumentError("smoothing weight alpha must be >= 0")
    grad_a = fem.gradient_at_quad(A).vectors
    grad_p = fem.gradient_at_quad(p).vectors
    s = np.einsum("cqd,cqd->cq", grad_a, grad_a)
    contrast = materials.v2(curve, s) - materials.v1(curve, s)
    pairing = np.einsum("cqd,cqd->cq", grad_a, grad_p)
    g = -fem.assemble_scalar_load(grid, contrast * pairing)
    if alpha != 0.0:
        g = g + 2.0 * alpha * (fem.unit_stiffness(grid) @ phi.values)
    return NodalField(grid, fem.solve_spd(fem.assemble_mass(grid), g, rel_tol=1e-12))


def smoothing_energy(phi: NodalField) -> float:
    """The squared H1 seminorm integral(|grad phi|^2)."""
    val = float(phi.values @ (fem.unit_stiffness(phi.grid) @ phi.values))
    return max(val, 0.0)


def gradient_bundle(phi: NodalField, A: NodalField, mbar: QuadVectorField,
                    curve: MaterialCurve, alpha: float) -> GradientBundle:
    """Misfit, regularized objective, adjoint state and gradient at one iterate."""
    f1 = evaluate_misfit(A, mbar)
    p = solve_adjoint(A, phi, mbar, curve)
    df = assemble_gradient(A, p, phi, curve, alpha)
    return GradientBundle(f1=f1, f=f1 + alpha * smoothing_energy(phi), p=p, df=df)


def _same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise InvalidArgumentError("fields live on different grids")
    return grid
