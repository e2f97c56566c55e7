"""Piecewise-constant level set descent for the two-phase reconstruction.

Each outer iteration solves the forward problem at the current phase field,
evaluates the misfit, forms the constrained descent direction
-4 (phi - 1)(phi - 2) * df (the multiplier of the two-phase constraint is
eliminated algebraically), takes one explicit Euler step bounded by a CFL
rule, and clamps the field back into [1, 2]. The loop stops when the misfit
has risen osci_max times, when every node sits exactly at a bound, or at
the iteration cap; the final field is thresholded to values in {1, 2}.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (InvalidArgumentError, NewtonFailureError, ReconstructionAborted,
                     SolverFailureError, StallSignal)
from .fem import Grid, NodalField, QuadVectorField
from .forward import NewtonConfig, SourceField, newton_solve
from .gradient import evaluate_misfit, gradient_bundle
from .materials import MaterialCurve

STOP_OSCILLATION = "oscillation-limit"
STOP_ALL_AT_BOUNDS = "all-nodes-at-bounds"
STOP_ITERATION_CAP = "iteration-cap"

INITIAL_MISFIT_COMPARATOR = 10000.0


@dataclass(frozen=True)
class PclsConfig:
    """Settings of the descent loop.

    phi0 is either a constant strictly inside (1, 2) or the string
    "random", meaning nodewise 1 + uniform(0, 1) drawn from phi0_seed.
    """

    sigma: float = 0.9
    alpha: float = 0.001
    osci_max: int = 10
    max_outer_iters: int = 2000
    phi0: float | str = 1.5
    phi0_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise InvalidArgumentError("sigma must lie strictly in (0, 1)")
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise InvalidArgumentError("alpha must be >= 0")
        if self.osci_max < 1:
            raise InvalidArgumentError("osci_max must be at least 1")
        if self.max_outer_iters < 1:
            raise InvalidArgumentError("max_outer_iters must be at least 1")
        if isinstance(self.phi0, str):
            if self.phi0 != "random":
                raise InvalidArgumentError(f"unknown phi0 spec {self.phi0!r}")
        elif not (1.0 < float(self.phi0) < 2.0):
            # the descent direction vanishes identically at the bounds
            raise InvalidArgumentError("constant phi0 must lie strictly in (1, 2)")


@dataclass
class ReconReport:
    """Outcome of one reconstruction run."""

    iterations: int
    f1_history: np.ndarray
    stop_reason: str
    final_phi: NodalField      # thresholded to {1, 2}
    mismatch_count: Optional[int]
    wall_time: float


def constraint_K(phi: NodalField) -> NodalField:
    """Two-phase indicator residual (phi - 1)(phi - 2); zero iff phi in {1, 2}."""
    return phi.with_values((phi.values - 1.0) * (phi.values - 2.0))


def dL_dphi(df: NodalField, phi: NodalField) -> NodalField:
    """Constrained descent direction -4 (phi - 1)(phi - 2) * df, pointwise."""
    if df.grid != phi.grid:
        raise InvalidArgumentError("fields live on different grids")
    return phi.with_values(-4.0 * (phi.values - 1.0) * (phi.values - 2.0) * df.values)


def cfl_dt(g: NodalField, sigma: float, h: float) -> float:
    """Euler step sigma * h / max|g|; raises StallSignal when g vanishes."""
    peak = float(np.max(np.abs(g.values)))
    if peak == 0.0:
        raise StallSignal("descent direction vanished at every node")
    return sigma * h / peak


def clamp_12(phi: NodalField) -> NodalField:
    """Project nodal values into [1, 2]; values inside pass through unchanged."""
    return phi.with_values(np.clip(phi.values, 1.0, 2.0))


def binarize(phi: NodalField) -> NodalField:
    """Threshold at 1.5: values <= 1.5 become 1, values > 1.5 become 2."""
    return phi.with_values(np.where(phi.values <= 1.5, 1.0, 2.0))


def count_at_bounds(phi: NodalField) -> int:
    """Number of nodes sitting exactly at 1 or 2 (call on a clamped field)."""
    return int(np.count_nonzero((phi.values == 1.0) | (phi.values == 2.0)))


def initial_phi(grid: Grid, cfg: PclsConfig) -> NodalField:
    if cfg.phi0 == "random":
        rng = np.random.default_rng(cfg.phi0_seed)
        return NodalField(grid, 1.0 + rng.uniform(0.0, 1.0, grid.n_nodes))
    return NodalField.constant(grid, float(cfg.phi0))


ProgressCallback = Callable[[dict], None]


def run_reconstruction(mbar: QuadVectorField, source: SourceField,
                       curve: MaterialCurve, cfg: PclsConfig, grid: Grid,
                       phi_exact: Optional[NodalField] = None,
                       *, newton: NewtonConfig | None = None,
                       progress: ProgressCallback | None = None) -> ReconReport:
    """Run the full descent loop and return the report.

    The forward solve of each iteration is warm-started from the previous
    one. The misfit counter osci increases (and never resets) whenever the
    misfit exceeds the previous iteration's value; the first iteration
    compares against a large sentinel. When phi_exact is given, the report
    carries the number of nodes where the thresholded result differs from
    it. A solver breakdown raises ReconstructionAborted with the partial
    report attached.
    """
    if mbar.grid != grid:
        raise InvalidArgumentError("measurement data lives on a different grid")
    newton = newton or NewtonConfig()
    started = time.perf_counter()

    phi = initial_phi(grid, cfg)
    potential = None
    f1_prev = INITIAL_MISFIT_COMPARATOR
    osci = 0
    history: list[float] = []
    stop_reason = STOP_ITERATION_CAP

    def report(reason: str) -> ReconReport:
        final = binarize(phi)
        mismatch = None
        if phi_exact is not None:
            if phi_exact.grid != grid:
                raise InvalidArgumentError("phi_exact lives on a different grid")
            mismatch = int(np.count_nonzero(final.values != phi_exact.values))
        return ReconReport(iterations=len(history),
                           f1_history=np.asarray(history),
                           stop_reason=reason,
                           final_phi=final,
                           mismatch_count=mismatch,
                           wall_time=time.perf_counter() - started)

    try:
        for k in range(cfg.max_outer_iters):
            potential, _ = newton_solve(phi, source, curve, newton, warm_start=potential)
            record = {"iteration": k, "f1": None, "dt": None, "osci": None,
                      "n_at_bounds": None, "phi_min": None, "phi_max": None}

            f1 = evaluate_misfit(potential, mbar)
            history.append(f1)
            if f1 > f1_prev:
                osci += 1
            f1_prev = f1
            record["f1"] = f1
            record["osci"] = osci
            if osci >= cfg.osci_max:
                stop_reason = STOP_OSCILLATION
                _emit(progress, record, phi)
                break

            bundle = gradient_bundle(phi, potential, mbar, curve, cfg.alpha)
            direction = dL_dphi(bundle.df, phi)
            try:
                dt = cfl_dt(direction, cfg.sigma, grid.h)
            except StallSignal:
                stop_reason = STOP_ALL_AT_BOUNDS
                _emit(progress, record, phi)
                break

            phi = clamp_12(phi.with_values(phi.values - dt * direction.values))
            n_at_bounds = count_at_bounds(phi)
            record["dt"] = dt
            record["n_at_bounds"] = n_at_bounds
            _emit(progress, record, phi)
            if n_at_bounds == grid.n_nodes:
                stop_reason = STOP_ALL_AT_BOUNDS
                break
    except (NewtonFailureError, SolverFailureError) as exc:
        partial = report(STOP_ITERATION_CAP)
        raise ReconstructionAborted(
            f"reconstruction aborted at iteration {len(history)}: {exc}",
            partial, exc) from exc

    return report(stop_reason)


def _emit(progress: ProgressCallback | None, record: dict, phi: NodalField):
    if progress is None:
        return
    record["phi_min"] = float(np.min(phi.values))
    record["phi_max"] = float(np.max(phi.values))
    progress(record)
