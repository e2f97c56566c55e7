"""Forward residual/tangent assembly and the Newton solve, against FD and dense oracles."""

import numpy as np
import pytest

from magrecon import fem
from magrecon.errors import InvalidArgumentError, NewtonFailureError
from magrecon.fem import NodalField, build_grid, unit_stiffness
from magrecon.forward import (NewtonConfig, SourceField, assemble_residual,
                              assemble_tangent, load_vector, newton_solve)
from magrecon.materials import MaterialCurve
from magrecon.phantoms import make_source


@pytest.fixture
def curve():
    return MaterialCurve()


def _random_dirichlet_field(grid, rng, scale=1.0):
    values = rng.normal(size=grid.n_nodes) * scale
    values[grid.boundary_nodes] = 0.0
    return NodalField(grid, values)


def test_source_strip_coils_values():
    src = SourceField("strip_coils", 500.0)
    assert src.evaluate(0.0, 0.45) == 500.0
    assert src.evaluate(0.0, -0.45) == -500.0
    assert src.evaluate(0.3, 0.1) == 0.0


def test_source_uniform_value():
    src = SourceField("uniform", 500.0)
    assert src.evaluate(-0.2, 0.31) == 500.0


def test_source_rejects_bad_kind_and_amplitude():
    with pytest.raises(InvalidArgumentError):
        SourceField("ring", 500.0)
    with pytest.raises(InvalidArgumentError):
        SourceField("uniform", -5.0)
    with pytest.raises(InvalidArgumentError):
        make_source("uniform", 0.0)  # factory insists on a driving current


def test_residual_zero_state_zero_source(curve):
    g = build_grid(4)
    zero = NodalField.constant(g, 0.0)
    phi = NodalField.constant(g, 1.5)
    r = assemble_residual(zero, phi, SourceField("uniform", 0.0), curve)
    assert np.all(r == 0.0)


def test_residual_constant_load_term(curve):
    # with A = 0 the residual is minus the load: -J * integral(basis_k)
    g = build_grid(3)
    src = SourceField("uniform", 500.0)
    r = assemble_residual(NodalField.constant(g, 0.0),
                          NodalField.constant(g, 1.5), src, curve)
    mass_rows = fem.assemble_mass(g) @ np.ones(g.n_nodes)
    expected = -500.0 * mass_rows
    expected[g.boundary_nodes] = 0.0
    assert np.max(np.abs(r - expected)) <= 1e-12


def test_residual_reduces_to_stiffness_for_unit_material(curve):
    # phi = 1 makes the coefficient the constant 1 for any field strength,
    # so the residual is the plain stiffness action minus the load
    rng = np.random.default_rng(21)
    g = build_grid(3)
    A = _random_dirichlet_field(g, rng)
    phi = NodalField.constant(g, 1.0)
    src = SourceField("uniform", 500.0)
    r = assemble_residual(A, phi, src, curve)
    expected = unit_stiffness(g) @ A.values - load_vector(g, src)
    expected[g.boundary_nodes] = 0.0
    assert np.max(np.abs(r - expected)) <= 1e-12


def test_residual_rejects_grid_mismatch(curve):
    a = NodalField.constant(build_grid(3), 0.0)
    phi = NodalField.constant(build_grid(4), 1.5)
    with pytest.raises(InvalidArgumentError):
        assemble_residual(a, phi, SourceField("uniform", 1.0), curve)


def test_tangent_at_zero_state_is_weighted_stiffness(curve):
    g = build_grid(4)
    zero = NodalField.constant(g, 0.0)
    phi = NodalField.constant(g, 1.5)
    T = assemble_tangent(zero, phi, curve)
    # v(1.5, s=0) = 0.6; rank-one term vanishes with the gradient
    expected = 0.6 * unit_stiffness(g).toarray()
    assert np.max(np.abs(T.toarray() - expected)) <= 1e-12


def test_tangent_is_directional_derivative_of_residual(curve):
    rng = np.random.default_rng(22)
    g = build_grid(4)
    src = SourceField("strip_coils", 500.0)
    idx = g.interior_nodes
    for trial in range(5):
        A = _random_dirichlet_field(g, rng, scale=0.5)
        phi = NodalField(g, rng.uniform(1.0, 2.0, g.n_nodes))
        h = _random_dirichlet_field(g, rng)
        T = assemble_tangent(A, phi, curve)
        r0 = assemble_residual(A, phi, src, curve)
        errors = []
        for eps in (1e-3, 1e-4, 1e-5):
            r1 = assemble_residual(A.with_values(A.values + eps * h.values),
                                   phi, src, curve)
            fd = (r1 - r0) / eps
            errors.append(np.linalg.norm((fd - T @ h.values)[idx]))
        # first-order decay in eps
        assert errors[1] <= 0.2 * errors[0]
        assert errors[2] <= 0.2 * errors[1]


def test_tangent_symmetry_is_exact(curve):
    rng = np.random.default_rng(23)
    g = build_grid(4)
    A = _random_dirichlet_field(g, rng)
    phi = NodalField(g, rng.uniform(1.0, 2.0, g.n_nodes))
    T = assemble_tangent(A, phi, curve)
    diff = T.matrix - T.matrix.T
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0


def test_newton_zero_source_returns_zero(curve):
    g = build_grid(4)
    phi = NodalField.constant(g, 1.5)
    A, iters = newton_solve(phi, SourceField("uniform", 0.0), curve)
    assert iters == 0
    assert np.all(A.values == 0.0)


def test_newton_linear_material_single_step(curve):
    # phi = 1 gives a constant coefficient, so the problem is affine
    g = build_grid(6)
    phi = NodalField.constant(g, 1.0)
    src = SourceField("strip_coils", 500.0)
    A, iters = newton_solve(phi, src, curve)
    assert iters == 1
    K, b = fem.apply_dirichlet_zero(unit_stiffness(g), load_vector(g, src), g)
    expected = fem.solve_spd(K, b)
    assert np.max(np.abs(A.values - expected)) <= 1e-8


def test_newton_boundary_exactly_zero(curve):
    g = build_grid(8)
    phi = NodalField.constant(g, 1.5)
    A, _ = newton_solve(phi, SourceField("strip_coils", 500.0), curve)
    assert np.all(A.values[g.boundary_nodes] == 0.0)


def test_newton_residual_contract_and_decrease(curve):
    g = build_grid(10)
    phi = NodalField.constant(g, 1.7)
    src = SourceField("strip_coils", 500.0)
    cfg = NewtonConfig()
    A, _ = newton_solve(phi, src, curve, cfg)
    r = assemble_residual(A, phi, src, curve)
    assert np.linalg.norm(r) <= cfg.rel_residual_tol * np.linalg.norm(load_vector(g, src))


def test_newton_warm_start_exact_solution_returns_immediately(curve):
    g = build_grid(8)
    phi = NodalField.constant(g, 1.5)
    src = SourceField("strip_coils", 500.0)
    A, _ = newton_solve(phi, src, curve)
    A2, iters = newton_solve(phi, src, curve, warm_start=A)
    assert iters == 0
    assert np.all(A2.values == A.values)


def test_newton_warm_start_must_satisfy_boundary(curve):
    g = build_grid(4)
    phi = NodalField.constant(g, 1.5)
    with pytest.raises(InvalidArgumentError):
        newton_solve(phi, SourceField("uniform", 1.0), curve,
                     warm_start=NodalField.constant(g, 1.0))


def test_newton_failure_carries_history(curve):
    g = build_grid(6)
    phi = NodalField.constant(g, 1.5)
    src = SourceField("strip_coils", 500.0)
    with pytest.raises(NewtonFailureError) as exc_info:
        newton_solve(phi, src, curve, NewtonConfig(rel_residual_tol=1e-14,
                                                   max_iters=1))
    assert len(exc_info.value.residual_history) >= 1


def test_newton_residuals_non_increasing(curve):
    # residual history decreases across accepted steps on a stiff start
    g = build_grid(12)
    phi = NodalField.constant(g, 1.9)
    src = SourceField("strip_coils", 500.0)
    try:
        newton_solve(phi, src, curve, NewtonConfig(max_iters=50))
    except NewtonFailureError as exc:
        hist = exc.residual_history
        assert all(b <= a for a, b in zip(hist, hist[1:]))
        pytest.fail("newton did not converge on dim=12")
