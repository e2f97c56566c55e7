"""Phantom rasterization, sources, synthetic data, noise injection, built-ins."""

import numpy as np
import pytest

from magrecon.errors import InvalidArgumentError
from magrecon.fem import build_grid
from magrecon.gradient import evaluate_misfit
from magrecon.materials import MaterialCurve
from magrecon.optimizer import constraint_K, initial_phi
from magrecon.phantoms import (Circle, DiscDifference, Ellipse, NoiseSpec, Phantom,
                               add_noise, builtin_examples, generate_measurements,
                               make_source, rasterize)


@pytest.fixture
def curve():
    return MaterialCurve()


# ---------------------------------------------------------------- shapes

def test_phantom_rejects_empty_and_out_of_domain():
    with pytest.raises(InvalidArgumentError):
        Phantom(())
    with pytest.raises(InvalidArgumentError):
        Phantom((Circle((0.45, 0.0), 0.1),))
    with pytest.raises(InvalidArgumentError):
        Phantom((Ellipse((0.0, 0.0), (0.6, 0.1)),))
    # a rotated ellipse can poke out even when the axis-aligned one fits
    Phantom((Ellipse((0.3, 0.0), (0.19, 0.05)),))
    with pytest.raises(InvalidArgumentError):
        Phantom((Ellipse((0.3, 0.0), (0.25, 0.05), rotation=0.0),))


def test_rasterize_example_circle_membership():
    g = build_grid(50)
    phi = rasterize(Phantom((Circle((0.2, 0.15), 0.1),)), g)
    center = np.argmin(np.linalg.norm(g.nodes - [0.2, 0.15], axis=1))
    corner = np.argmin(np.linalg.norm(g.nodes - [-0.4, -0.4], axis=1))
    assert phi.values[center] == 1.0
    assert phi.values[corner] == 2.0
    assert np.all((phi.values == 1.0) | (phi.values == 2.0))


def test_rasterize_circle_area_count():
    g = build_grid(50)
    phi = rasterize(Phantom((Circle((0.2, 0.15), 0.1),)), g)
    inside = int(np.sum(phi.values == 1.0))
    # area pi r^2 / h^2 ~ 78.5 up to the boundary staircase
    assert abs(inside - np.pi * 0.01 / (0.02 ** 2)) <= 12


def test_rasterize_satisfies_phase_constraint():
    g = build_grid(17)
    phantom = Phantom((Circle((-0.1, 0.2), 0.15),
                       Ellipse((0.2, -0.2), (0.12, 0.05), rotation=0.4)))
    phi = rasterize(phantom, g)
    assert np.all(constraint_K(phi).values == 0.0)


def test_rasterize_small_ellipse_marks_interior_nodes():
    g = build_grid(10)
    phantom = Phantom((Ellipse((0.05, 0.05), (0.12, 0.07)),))
    phi = rasterize(phantom, g)
    n = np.argmin(np.linalg.norm(g.nodes - [0.05, 0.05], axis=1))
    assert phi.values[n] == 1.0


def test_disc_difference_membership():
    g = build_grid(40)
    phantom = Phantom((DiscDifference(Circle((0.0, 0.05), 0.22),
                                      Circle((0.08, 0.10), 0.18)),))
    phi = rasterize(phantom, g)
    # a point inside the inner disc is steel, one in the lune is air
    inner_node = np.argmin(np.linalg.norm(g.nodes - [0.08, 0.10], axis=1))
    lune_node = np.argmin(np.linalg.norm(g.nodes - [-0.15, -0.05], axis=1))
    assert phi.values[inner_node] == 2.0
    assert phi.values[lune_node] == 1.0


# ---------------------------------------------------------------- sources

def test_make_source_values():
    strip = make_source("strip_coils", 500.0)
    assert strip.evaluate(0.0, 0.45) == 500.0
    assert strip.evaluate(0.0, -0.45) == -500.0
    assert strip.evaluate(0.2, 0.0) == 0.0
    uniform = make_source("uniform", 500.0)
    for xy in ((0.0, 0.0), (-0.3, 0.49), (0.2, -0.1)):
        assert uniform.evaluate(*xy) == 500.0


# ---------------------------------------------------------------- measurements

def test_generated_measurements_are_self_consistent(curve):
    g = build_grid(10)
    phantom = Phantom((Circle((0.2, 0.15), 0.12),))
    src = make_source("strip_coils", 500.0)
    mbar = generate_measurements(phantom, src, curve, g)
    from magrecon.forward import newton_solve
    A, _ = newton_solve(rasterize(phantom, g), src, curve)
    assert evaluate_misfit(A, mbar) == 0.0


def test_initial_misfit_is_positive(curve):
    g = build_grid(10)
    phantom = Phantom((Circle((0.2, 0.15), 0.1),))
    src = make_source("strip_coils", 500.0)
    mbar = generate_measurements(phantom, src, curve, g)
    from magrecon.forward import newton_solve
    from magrecon.optimizer import PclsConfig
    phi0 = initial_phi(g, PclsConfig())
    A, _ = newton_solve(phi0, src, curve)
    f1 = evaluate_misfit(A, mbar)
    assert np.isfinite(f1) and f1 > 0.0


def test_refined_generation_grid_changes_data_slightly(curve):
    g = build_grid(8)
    phantom = Phantom((Circle((0.1, 0.1), 0.2),))
    src = make_source("strip_coils", 500.0)
    same = generate_measurements(phantom, src, curve, g)
    finer = generate_measurements(phantom, src, curve, g, refine=2)
    assert finer.vectors.shape == same.vectors.shape
    assert np.array_equal(finer.quad_weights, same.quad_weights)
    delta = np.abs(finer.vectors - same.vectors)
    scale = np.max(np.abs(same.vectors))
    assert 0.0 < np.max(delta) < 5.0 * scale  # differs, but on the same scale


# ---------------------------------------------------------------- noise

def test_noise_level_zero_is_identity(curve):
    g = build_grid(6)
    rng = np.random.default_rng(14)
    from magrecon.fem import QuadVectorField
    mbar = QuadVectorField(g, rng.normal(size=(g.n_cells, 4, 2)), g.qp_weights)
    assert add_noise(mbar, NoiseSpec(level=0.0, seed=5)) is mbar


def test_noise_statistics_match_model():
    g = build_grid(50)  # 10000 quadrature points
    rng = np.random.default_rng(15)
    from magrecon.fem import QuadVectorField
    mbar = QuadVectorField(g, rng.normal(size=(g.n_cells, 4, 2)), g.qp_weights)
    rho = float(np.sqrt(np.mean(np.sum(mbar.vectors ** 2, axis=-1))))
    noised = add_noise(mbar, NoiseSpec(level=0.1, seed=99))
    delta = noised.vectors - mbar.vectors
    rms = float(np.sqrt(np.mean(np.sum(delta ** 2, axis=-1))))
    assert abs(rms - 0.1 * rho * np.sqrt(2.0)) <= 0.05 * 0.1 * rho * np.sqrt(2.0)


def test_noise_is_deterministic_per_seed():
    g = build_grid(8)
    rng = np.random.default_rng(16)
    from magrecon.fem import QuadVectorField
    mbar = QuadVectorField(g, rng.normal(size=(g.n_cells, 4, 2)), g.qp_weights)
    a = add_noise(mbar, NoiseSpec(level=0.2, seed=4))
    b = add_noise(mbar, NoiseSpec(level=0.2, seed=4))
    assert np.array_equal(a.vectors, b.vectors)
    assert np.array_equal(a.quad_weights, mbar.quad_weights)


def test_noise_rejects_negative_level():
    with pytest.raises(InvalidArgumentError):
        NoiseSpec(level=-0.1)


# ---------------------------------------------------------------- built-ins

def test_builtin_examples_carry_benchmark_settings():
    examples = builtin_examples()
    assert [e.name for e in examples] == ["example1", "example2", "example3",
                                          "example4"]
    e1, e2, e3, e4 = examples
    assert e1.grid.dim == 50
    assert (e1.pcls.sigma, e1.pcls.alpha, e1.pcls.osci_max) == (0.9, 0.001, 10)
    assert e2.grid.dim == 40
    assert e2.pcls.osci_max == 15
    assert e3.source.kind == "uniform"
    assert e4.pcls.alpha == 0.1
    assert e4.noise_levels == (0.05, 0.10, 0.15, 0.20)
    assert e4.grid.dim == 50


def test_builtin_phantoms_rasterize_cleanly():
    for example in builtin_examples():
        phi = rasterize(example.phantom, example.grid)
        air = int(np.sum(phi.values == 1.0))
        assert 0 < air < example.grid.n_nodes
