"""Ground-truth geometries, synthetic measurements, and noise injection.

A phantom is a union of primitive shapes marking the air-filled region of
the workpiece; nodes inside any primitive get phase value 1 (air), all
others 2 (steel). Measurements are manufactured by solving the forward
problem for the rasterized phantom and sampling the potential gradient at
the quadrature points, optionally on a finer grid to avoid committing the
data to the reconstruction discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import fem
from .errors import InvalidArgumentError
from .fem import Grid, NodalField, QuadVectorField
from .forward import NewtonConfig, SourceField, newton_solve
from .materials import MaterialCurve
from .optimizer import PclsConfig


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation: float = 0.0  # radians, counterclockwise


@dataclass(frozen=True)
class DiscDifference:
    """Points inside the outer disc but outside the inner one (a crescent)."""

    outer: Circle
    inner: Circle


Shape = Union[Circle, Ellipse, DiscDifference]


@dataclass(frozen=True)
class Phantom:
    shapes: tuple[Shape, ...]

    def __post_init__(self):
        shapes = tuple(self.shapes)
        if not shapes:
            raise InvalidArgumentError("phantom needs at least one shape")
        for shape in shapes:
            _check_inside_domain(shape)
        object.__setattr__(self, "shapes", shapes)


@dataclass(frozen=True)
class NoiseSpec:
    level: float = 0.0  # relative to the RMS magnitude of the data
    seed: int = 0

    def __post_init__(self):
        if self.level < 0 or not np.isfinite(self.level):
            raise InvalidArgumentError("noise level must be >= 0")


def _extent(shape: Shape) -> tuple[float, float, float, float]:
    """Axis-aligned half-extents (cx, cy, ex, ey) of a primitive."""
    if isinstance(shape, Circle):
        return shape.center[0], shape.center[1], shape.radius, shape.radius
    if isinstance(shape, Ellipse):
        a, b = shape.semi_axes
        c, s = math.cos(shape.rotation), math.sin(shape.rotation)
        return (shape.center[0], shape.center[1],
                math.hypot(a * c, b * s), math.hypot(a * s, b * c))
    if isinstance(shape, DiscDifference):
        return _extent(shape.outer)
    raise InvalidArgumentError(f"unknown shape {shape!r}")


def _check_inside_domain(shape: Shape):
    if isinstance(shape, Circle) and not shape.radius > 0:
        raise InvalidArgumentError("circle radius must be positive")
    if isinstance(shape, Ellipse) and not all(a > 0 for a in shape.semi_axes):
        raise InvalidArgumentError("ellipse semi-axes must be positive")
    if isinstance(shape, DiscDifference):
        _check_inside_domain(shape.outer)
        _check_inside_domain(shape.inner)
    cx, cy, ex, ey = _extent(shape)
    if (cx - ex < fem.X_MIN or cx + ex > fem.X_MAX
            or cy - ey < fem.Y_MIN or cy + ey > fem.Y_MAX):
        raise InvalidArgumentError(f"shape {shape!r} reaches outside the domain")


def contains(shape: Shape, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Boolean membership of points in one primitive (closed sets)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(shape, Circle):
        return ((x - shape.center[0]) ** 2 + (y - shape.center[1]) ** 2
                <= shape.radius ** 2)
    if isinstance(shape, Ellipse):
        dx = x - shape.center[0]
        dy = y - shape.center[1]
        c, s = math.cos(shape.rotation), math.sin(shape.rotation)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        a, b = shape.semi_axes
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    if isinstance(shape, DiscDifference):
        return contains(shape.outer, x, y) & ~contains(shape.inner, x, y)
    raise InvalidArgumentError(f"unknown shape {shape!r}")


def rasterize(phantom: Phantom, grid: Grid) -> NodalField:
    """Phase field of the phantom: 1 at nodes inside the air region, else 2."""
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    inside = np.zeros(grid.n_nodes, dtype=bool)
    for shape in phantom.shapes:
        inside |= contains(shape, x, y)
    return NodalField(grid, np.where(inside, 1.0, 2.0))


def make_source(kind: str, j1: float) -> SourceField:
    """Current density: "strip_coils" (wires above/below the workpiece) or "uniform"."""
    if not j1 > 0:
        raise InvalidArgumentError("source amplitude j1 must be positive")
    return SourceField(kind=kind, j1=float(j1))


def generate_measurements(phantom: Phantom, source: SourceField, curve: MaterialCurve,
                          grid: Grid, newton: NewtonConfig | None = None,
                          *, refine: int = 1) -> QuadVectorField:
    """Synthetic flux data: solve the forward problem at the exact phase field
    and sample its potential gradient at the grid's quadrature points.

    With refine > 1 the forward solve runs on a refine-times finer grid and
    the gradient is interpolated back, so the data does not inherit the
    reconstruction discretization.
    """
    if refine < 1:
        raise InvalidArgumentError("refine must be >= 1")
    if refine == 1:
        phi_exact = rasterize(phantom, grid)
        potential, _ = newton_solve(phi_exact, source, curve, newton)
        return fem.gradient_at_quad(potential)
    fine = fem.build_grid(grid.dim * refine)
    potential, _ = newton_solve(rasterize(phantom, fine), source, curve, newton)
    vectors = fem.gradient_at_points(potential, grid.quad_xy.reshape(-1, 2))
    return QuadVectorField(grid, vectors.reshape(grid.n_cells, -1, 2), grid.qp_weights)


def add_noise(mbar: QuadVectorField, spec: NoiseSpec) -> QuadVectorField:
    """Additive Gaussian noise scaled by the RMS magnitude of the data.

    Each quadrature-point vector receives level * rms * N(0, I_2) from the
    seeded generator; level 0 returns the input unchanged.
    """
    if spec.level == 0.0:
        return mbar
    rng = np.random.default_rng(spec.seed)
    rms = float(np.sqrt(np.mean(np.sum(mbar.vectors ** 2, axis=-1))))
    noise = rng.standard_normal(mbar.vectors.shape)
    return QuadVectorField(mbar.grid, mbar.vectors + spec.level * rms * noise,
                           mbar.quad_weights)


@dataclass(frozen=True)
class BuiltinExample:
    """A ready-to-run benchmark: geometry, excitation, material and loop settings."""

    name: str
    grid: Grid
    phantom: Phantom
    source: SourceField
    curve: MaterialCurve
    pcls: PclsConfig
    newton: NewtonConfig
    noise_levels: tuple[float, ...] = ()


def builtin_examples() -> list[BuiltinExample]:
    """The four benchmark configurations.

    1. one off-center circular gap, strip-coil excitation;
    2. a non-convex crescent gap on a coarser grid;
    3. a disconnected gap (two circles and an ellipse), uniform excitation;
    4. the crescent again with stronger smoothing, run at several noise levels.

    The crescent and the disconnected geometry are representative stand-ins;
    their exact coordinates are not normative.
    """
    curve = MaterialCurve()
    newton = NewtonConfig()
    circle = Phantom((Circle((0.2, 0.15), 0.1),))
    crescent = Phantom((DiscDifference(outer=Circle((0.0, 0.05), 0.22),
                                       inner=Circle((0.08, 0.10), 0.18)),))
    trio = Phantom((Circle((-0.25, 0.25), 0.1),
                    Circle((0.25, 0.25), 0.1),
                    Ellipse((0.0, -0.2), (0.2, 0.1))))
    return [
        BuiltinExample("example1", fem.build_grid(50), circle,
                       make_source("strip_coils", 500.0), curve,
                       PclsConfig(sigma=0.9, alpha=0.001, osci_max=10), newton),
        BuiltinExample("example2", fem.build_grid(40), crescent,
                       make_source("strip_coils", 500.0), curve,
                       PclsConfig(sigma=0.9, alpha=0.001, osci_max=15), newton),
        BuiltinExample("example3", fem.build_grid(50), trio,
                       make_source("uniform", 500.0), curve,
                       PclsConfig(sigma=0.9, alpha=0.001, osci_max=10), newton),
        BuiltinExample("example4", fem.build_grid(50), crescent,
                       make_source("strip_coils", 500.0), curve,
                       PclsConfig(sigma=0.9, alpha=0.1, osci_max=10), newton,
                       noise_levels=(0.05, 0.10, 0.15, 0.20)),
    ]
