"""Newton solver for the quasi-linear magnetostatic potential.

The weak problem is: find the potential A, vanishing on the boundary, with

    integral( v(phi, |grad A|^2) grad A . grad w ) = integral( J w )

for every interior test function w, where v is the phase-mixed reluctivity
and J the impressed current density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem, materials
from .errors import InvalidArgumentError, NewtonFailureError
from .fem import Grid, NodalField, SymSparseOperator
from .materials import MaterialCurve

STRIP_Y = 0.4  # coil strips occupy |y| > STRIP_Y


@dataclass(frozen=True)
class NewtonConfig:
    rel_residual_tol: float = 1e-10
    max_iters: int = 50
    damping_min: float = 1.0 / 16.0

    def __post_init__(self):
        if not self.rel_residual_tol > 0:
            raise InvalidArgumentError("rel_residual_tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be at least 1")
        if not 0 < self.damping_min <= 1:
            raise InvalidArgumentError("damping_min must lie in (0, 1]")


@dataclass(frozen=True)
class SourceField:
    """Impressed current density, evaluable at arbitrary points.

    kind "strip_coils" puts +j1 above y = 0.4 and -j1 below y = -0.4 (a
    workpiece wrapped by wires); kind "uniform" is the constant j1.
    """

    kind: str
    j1: float

    def __post_init__(self):
        if self.kind not in ("strip_coils", "uniform"):
            raise InvalidArgumentError(f"unknown source kind {self.kind!r}")
        if not (np.isfinite(self.j1) and self.j1 >= 0):
            raise InvalidArgumentError("source amplitude j1 must be finite and >= 0")

    def evaluate(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "uniform":
            return np.full(np.broadcast_shapes(x.shape, y.shape), self.j1)
        return np.where(y > STRIP_Y, self.j1, np.where(y < -STRIP_Y, -self.j1, 0.0))


def load_vector(grid: Grid, source: SourceField) -> np.ndarray:
    """Nodal load integral(J basis_k), zeroed at boundary nodes."""
    qp_j = source.evaluate(grid.quad_xy[..., 0], grid.quad_xy[..., 1])
    b = fem.assemble_scalar_load(grid, qp_j)
    b[grid.boundary_nodes] = 0.0
    return b


def _require_same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise InvalidArgumentError("fields live on different grids")
    return grid


def assemble_residual(A: NodalField, phi: NodalField, source: SourceField,
                      curve: MaterialCurve) -> np.ndarray:
    """Weak-form residual of the potential equation, zero at boundary nodes."""
    grid = _require_same_grid(A, phi)
    grad_a = fem.gradient_at_quad(A).vectors
    s = np.einsum("cqd,cqd->cq", grad_a, grad_a)
    v = materials.mix_v(curve, fem.values_at_quad(phi), s)
    r = fem.assemble_grad_load(grid, v[:, :, None] * grad_a) - load_vector(grid, source)
    r[grid.boundary_nodes] = 0.0
    return r


def assemble_tangent(A: NodalField, phi: NodalField,
                     curve: MaterialCurve) -> SymSparseOperator:
    """Linearization of the residual with respect to the potential.

    Combines the v-weighted stiffness with the rank-one saturation term
    2 v'(phi, s) (grad A . grad u)(grad A . grad w); symmetric by
    construction. No boundary elimination is applied here.
    """
    grid = _require_same_grid(A, phi)
    grad_a = fem.gradient_at_quad(A).vectors
    s = np.einsum("cqd,cqd->cq", grad_a, grad_a)
    phi_q = fem.values_at_quad(phi)
    v = materials.mix_v(curve, phi_q, s)
    dv = materials.mix_vprime(curve, phi_q, s)
    return fem.assemble_bilinear(grid, v, 2.0 * dv, grad_a)


def newton_solve(phi: NodalField, source: SourceField, curve: MaterialCurve,
                 cfg: NewtonConfig | None = None,
                 warm_start: NodalField | None = None) -> tuple[NodalField, int]:
    """Solve the potential equation by damped Newton iteration.

    Returns the converged potential (boundary values exactly zero) and the
    number of Newton updates taken. Convergence is measured by the residual
    norm relative to the load norm. Raises NewtonFailureError, carrying the
    residual history, if max_iters updates do not suffice.
    """
    cfg = cfg or NewtonConfig()
    grid = phi.grid
    load = load_vector(grid, source)
    load_norm = float(np.linalg.norm(load))
    scale = load_norm if load_norm > 0 else 1.0

    if warm_start is not None:
        if warm_start.grid != grid:
            raise InvalidArgumentError("warm start lives on a different grid")
        if np.any(warm_start.values[grid.boundary_nodes] != 0.0):
            raise InvalidArgumentError("warm start must vanish on the boundary")
        A = warm_start
    else:
        A = NodalField.constant(grid, 0.0)

    residual = assemble_residual(A, phi, source, curve)
    r_norm = float(np.linalg.norm(residual))
    history = [r_norm]

    iters = 0
    while r_norm > cfg.rel_residual_tol * scale:
        if iters >= cfg.max_iters:
            raise NewtonFailureError(
                f"no convergence after {cfg.max_iters} Newton iterations "
                f"(relative residual {r_norm / scale:.3e})", history)
        tangent = assemble_tangent(A, phi, curve)
        t_bc, r_bc = fem.apply_dirichlet_zero(tangent, residual, grid)
        step = fem.solve_spd(t_bc, r_bc, rel_tol=1e-12)
        # backtrack until the residual decreases (or the damping floor is hit)
        damping = 1.0
        while True:
            candidate = A.with_values(A.values - damping * step)
            cand_residual = assemble_residual(candidate, phi, source, curve)
            cand_norm = float(np.linalg.norm(cand_residual))
            if cand_norm < r_norm or damping <= cfg.damping_min:
                break
            damping *= 0.5
        A, residual, r_norm = candidate, cand_residual, cand_norm
        history.append(r_norm)
        iters += 1
    return A, iters
