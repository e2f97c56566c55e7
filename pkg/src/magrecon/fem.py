"""Bilinear finite elements on a uniform square grid over [-0.5, 0.5]^2.

Everything downstream (forward solves, adjoint solves, descent updates) is
built from the primitives here: the grid and its node/cell numbering, nodal
and quadrature-point fields, vectorized element assembly, and symmetric
sparse solves. Node and cell indices are row-major in the (i, j) lattice,
node n = j*(dim+1) + i with i the x index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, SolverFailureError

X_MIN, X_MAX = -0.5, 0.5
Y_MIN, Y_MAX = -0.5, 0.5

# corner order within a cell: SW, SE, NE, NW (reference coords in {-1, +1}^2)
_CORNER_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_GAUSS = 1.0 / np.sqrt(3.0)
_QP_REF = _GAUSS * _CORNER_SIGNS  # 2x2 Gauss points, same ordering as corners


def shape_values(ref_pts: np.ndarray) -> np.ndarray:
    """Bilinear shape functions at reference points; returns (n_pts, 4)."""
    xi = ref_pts[:, 0][:, None]
    eta = ref_pts[:, 1][:, None]
    return 0.25 * (1.0 + _CORNER_SIGNS[:, 0] * xi) * (1.0 + _CORNER_SIGNS[:, 1] * eta)


def shape_ref_gradients(ref_pts: np.ndarray) -> np.ndarray:
    """Reference-coordinate shape gradients; returns (n_pts, 4, 2)."""
    xi = ref_pts[:, 0][:, None]
    eta = ref_pts[:, 1][:, None]
    d_xi = 0.25 * _CORNER_SIGNS[:, 0] * (1.0 + _CORNER_SIGNS[:, 1] * eta)
    d_eta = 0.25 * _CORNER_SIGNS[:, 1] * (1.0 + _CORNER_SIGNS[:, 0] * xi)
    return np.stack([d_xi, d_eta], axis=-1)


class Grid:
    """Uniform dim x dim quadrilateral mesh with 2x2 Gauss quadrature per cell.

    Precomputes the node lattice, cell connectivity, boundary indices,
    shape-function tables at the quadrature points, and the scatter index
    maps used by the vectorized assemblers. Instances are immutable; two
    grids compare equal iff they have the same dim.
    """

    def __init__(self, dim: int):
        if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool) or dim < 2:
            raise InvalidArgumentError(f"grid dim must be an integer >= 2, got {dim!r}")
        dim = int(dim)
        self.dim = dim
        self.x_min, self.x_max = X_MIN, X_MAX
        self.y_min, self.y_max = Y_MIN, Y_MAX
        self.h = (X_MAX - X_MIN) / dim
        self.n_nodes = (dim + 1) ** 2
        self.n_cells = dim * dim

        ticks = np.linspace(X_MIN, X_MAX, dim + 1)
        self.nodes = np.column_stack([np.tile(ticks, dim + 1), np.repeat(ticks, dim + 1)])

        ci, cj = np.meshgrid(np.arange(dim), np.arange(dim))
        sw = (cj * (dim + 1) + ci).ravel()
        self.cells = np.column_stack([sw, sw + 1, sw + dim + 2, sw + dim + 1])

        gi = np.arange(self.n_nodes) % (dim + 1)
        gj = np.arange(self.n_nodes) // (dim + 1)
        self.boundary_mask = (gi == 0) | (gi == dim) | (gj == 0) | (gj == dim)
        self.boundary_nodes = np.nonzero(self.boundary_mask)[0]
        self.interior_nodes = np.nonzero(~self.boundary_mask)[0]

        # quadrature tables (identical for every cell on the uniform mesh)
        self.qp_weights = np.full(4, 0.25 * self.h * self.h)
        self.shape_at_qp = shape_values(_QP_REF)
        self.grad_at_qp = shape_ref_gradients(_QP_REF) * (2.0 / self.h)
        self.quad_xy = np.einsum("qa,cad->cqd", self.shape_at_qp, self.nodes[self.cells])

        # assembly helpers: pairwise gradient products and COO scatter maps
        self._grad_dot = np.einsum("qad,qbd->qab", self.grad_at_qp, self.grad_at_qp)
        self._rows = np.repeat(self.cells, 4, axis=1).ravel()
        self._cols = np.tile(self.cells, (1, 4)).ravel()
        self._op_cache: dict[str, SymSparseOperator] = {}

        for arr in (self.nodes, self.cells, self.boundary_mask, self.boundary_nodes,
                    self.interior_nodes, self.qp_weights, self.shape_at_qp,
                    self.grad_at_qp, self.quad_xy):
            arr.setflags(write=False)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.dim == self.dim

    def __hash__(self):
        return hash(("Grid", self.dim))

    def __repr__(self):
        return f"Grid(dim={self.dim})"


def build_grid(dim: int) -> Grid:
    """Create the uniform grid with dim cells per axis (dim >= 2)."""
    return Grid(dim)


def _as_finite(values, size: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != size:
        raise InvalidArgumentError(f"{what} has {arr.size} values, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class NodalField:
    """Scalar degrees of freedom at the grid nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _as_finite(self.values, self.grid.n_nodes, "nodal field").reshape(-1).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @staticmethod
    def constant(grid: Grid, value: float) -> "NodalField":
        return NodalField(grid, np.full(grid.n_nodes, float(value)))

    def with_values(self, values) -> "NodalField":
        return NodalField(self.grid, values)


@dataclass(frozen=True, eq=False)
class QuadVectorField:
    """A 2-vector at every quadrature point of every cell, plus the weights."""

    grid: Grid
    vectors: np.ndarray       # (n_cells, q_per_cell, 2)
    quad_weights: np.ndarray  # (q_per_cell,), summing to the cell area

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=float)
        if vec.ndim != 3 or vec.shape[0] != self.grid.n_cells or vec.shape[2] != 2:
            raise InvalidArgumentError(
                f"quad vectors must have shape (n_cells, q, 2), got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise InvalidArgumentError("quad vector field contains non-finite values")
        w = np.asarray(self.quad_weights, dtype=float).reshape(-1)
        if w.size != vec.shape[1] or np.any(w <= 0):
            raise InvalidArgumentError("quadrature weights must be positive, one per point")
        cell_area = self.grid.h * self.grid.h
        if abs(w.sum() * self.grid.n_cells - 1.0) > 1e-12 or abs(w.sum() - cell_area) > 1e-12:
            raise InvalidArgumentError("quadrature weights do not sum to the cell area")
        vec = vec.copy()
        vec.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "quad_weights", w)

    @property
    def q_per_cell(self) -> int:
        return self.vectors.shape[1]


class SymSparseOperator:
    """Symmetric sparse operator with a lazily cached direct factorization.

    Symmetry is enforced bit-exactly on construction by averaging with the
    transpose (a no-op when the input is already symmetric).
    """

    def __init__(self, matrix: sp.spmatrix):
        m = sp.csr_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"operator must be square, got {m.shape}")
        m = ((m + m.T) * 0.5).tocsr()
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m
        self.n = m.shape[0]
        self._factor = None

    def dot(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def factorize(self):
        if self._factor is None:
            # symmetric-friendly ordering; noticeably faster than COLAMD here
            self._factor = spla.splu(self.matrix.tocsc(),
                                     permc_spec="MMD_AT_PLUS_A")
        return self._factor


def values_at_quad(u: NodalField) -> np.ndarray:
    """Interpolate a nodal field at all quadrature points; returns (n_cells, q)."""
    g = u.grid
    return u.values[g.cells] @ g.shape_at_qp.T


def gradient_at_quad(u: NodalField) -> QuadVectorField:
    """Gradient of the bilinear interpolant at every quadrature point."""
    g = u.grid
    vec = np.einsum("ca,qad->cqd", u.values[g.cells], g.grad_at_qp)
    return QuadVectorField(g, vec, g.qp_weights)


def gradient_at_points(u: NodalField, xy: np.ndarray) -> np.ndarray:
    """Gradient of the bilinear interpolant at arbitrary points inside the domain.

    Points on cell edges are attributed to the lower-left neighbor. Used for
    transferring data between grids of different resolution.
    """
    g = u.grid
    pts = np.asarray(xy, dtype=float).reshape(-1, 2)
    ci = np.clip(np.floor((pts[:, 0] - g.x_min) / g.h).astype(int), 0, g.dim - 1)
    cj = np.clip(np.floor((pts[:, 1] - g.y_min) / g.h).astype(int), 0, g.dim - 1)
    cell = cj * g.dim + ci
    sw_xy = g.nodes[g.cells[cell, 0]]
    ref = 2.0 * (pts - sw_xy) / g.h - 1.0
    dref = shape_ref_gradients(ref) * (2.0 / g.h)  # (n_pts, 4, 2)
    return np.einsum("pa,pad->pd", u.values[g.cells[cell]], dref)


def assemble_scalar_load(grid: Grid, qp_values: np.ndarray) -> np.ndarray:
    """Nodal vector of integral(f * basis_k) for f given per quadrature point."""
    local = np.einsum("q,cq,qa->ca", grid.qp_weights, qp_values, grid.shape_at_qp)
    out = np.zeros(grid.n_nodes)
    np.add.at(out, grid.cells, local)
    return out


def assemble_grad_load(grid: Grid, qp_vectors: np.ndarray) -> np.ndarray:
    """Nodal vector of integral(f . grad basis_k) for a 2-vector f per quad point."""
    local = np.einsum("q,cqd,qad->ca", grid.qp_weights, qp_vectors, grid.grad_at_qp)
    out = np.zeros(grid.n_nodes)
    np.add.at(out, grid.cells, local)
    return out


def assemble_bilinear(grid: Grid, diffusion_qp: np.ndarray,
                      rank1_coeff_qp: np.ndarray | None = None,
                      rank1_dir_qp: np.ndarray | None = None) -> SymSparseOperator:
    """Assemble integral(c grad u . grad w) plus an optional rank-one term.

    The optional term is integral(r (d . grad u)(d . grad w)) with scalar r
    and 2-vector d sampled per quadrature point.
    """
    local = np.einsum("q,cq,qab->cab", grid.qp_weights, diffusion_qp, grid._grad_dot)
    if rank1_coeff_qp is not None:
        proj = np.einsum("cqd,qad->cqa", rank1_dir_qp, grid.grad_at_qp)
        local = local + np.einsum("q,cq,cqa,cqb->cab",
                                  grid.qp_weights, rank1_coeff_qp, proj, proj)
    mat = sp.coo_matrix((local.ravel(), (grid._rows, grid._cols)),
                        shape=(grid.n_nodes, grid.n_nodes))
    return SymSparseOperator(mat.tocsr())


def assemble_mass(grid: Grid) -> SymSparseOperator:
    """Mass operator of the bilinear basis (cached per grid)."""
    cached = grid._op_cache.get("mass")
    if cached is not None:
        return cached
    local = np.einsum("q,qa,qb->ab", grid.qp_weights, grid.shape_at_qp, grid.shape_at_qp)
    data = np.ascontiguousarray(np.broadcast_to(local, (grid.n_cells, 4, 4))).ravel()
    mat = sp.coo_matrix((data, (grid._rows, grid._cols)),
                        shape=(grid.n_nodes, grid.n_nodes))
    op = SymSparseOperator(mat.tocsr())
    grid._op_cache["mass"] = op
    return op


def unit_stiffness(grid: Grid) -> SymSparseOperator:
    """Stiffness operator with unit coefficient (cached per grid)."""
    cached = grid._op_cache.get("stiffness")
    if cached is not None:
        return cached
    op = assemble_bilinear(grid, np.ones((grid.n_cells, 4)))
    grid._op_cache["stiffness"] = op
    return op


def apply_dirichlet_zero(K: SymSparseOperator, b: np.ndarray,
                         grid: Grid) -> tuple[SymSparseOperator, np.ndarray]:
    """Eliminate boundary rows/columns symmetrically for a zero boundary value.

    Boundary rows and columns are zeroed, the boundary diagonal set to one,
    and the boundary right-hand side set to zero, so the solution vanishes
    there exactly.
    """
    if K.n != grid.n_nodes or len(b) != grid.n_nodes:
        raise InvalidArgumentError("operator/vector size does not match the grid")
    keep = sp.diags((~grid.boundary_mask).astype(float))
    pin = sp.diags(grid.boundary_mask.astype(float))
    reduced = SymSparseOperator((keep @ K.matrix @ keep + pin).tocsr())
    b2 = np.where(grid.boundary_mask, 0.0, np.asarray(b, dtype=float))
    return reduced, b2


def solve_spd(K: SymSparseOperator, b: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Solve K x = b to a relative residual of rel_tol.

    Uses a cached sparse LU factorization with iterative refinement; raises
    SolverFailureError (carrying the achieved residual) if the contract
    cannot be met. Deterministic for identical inputs.
    """
    if rel_tol <= 0:
        raise InvalidArgumentError("rel_tol must be positive")
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("right-hand side contains non-finite values")
    factor = K.factorize()
    x = factor.solve(b)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    res = float(np.linalg.norm(b - K.matrix @ x))
    for _ in range(3):
        if res <= rel_tol * b_norm:
            return x
        x = x + factor.solve(b - K.matrix @ x)
        res = float(np.linalg.norm(b - K.matrix @ x))
    if res <= rel_tol * b_norm:
        return x
    raise SolverFailureError(
        f"linear solve stalled at relative residual {res / b_norm:.3e} "
        f"(requested {rel_tol:.1e})", achieved_residual=res / b_norm)
