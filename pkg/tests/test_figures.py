"""Figure rendering writes non-empty image files."""

import numpy as np

from magrecon.fem import NodalField, build_grid
from magrecon.figures import save_history_figure, save_phase_figure
from magrecon.phantoms import Circle, Phantom, rasterize


def test_phase_figure_with_and_without_reference(tmp_path):
    g = build_grid(12)
    phi_exact = rasterize(Phantom((Circle((0.1, 0.1), 0.2),)), g)
    noisy = phi_exact.values.copy()
    noisy[5] = 3.0 - noisy[5]
    phi = NodalField(g, noisy)
    a = tmp_path / "with_ref.png"
    b = tmp_path / "plain.png"
    save_phase_figure(a, phi, phi_exact)
    save_phase_figure(b, phi)
    assert a.stat().st_size > 0 and b.stat().st_size > 0


def test_phase_figure_handles_constant_field(tmp_path):
    g = build_grid(5)
    path = tmp_path / "const.png"
    save_phase_figure(path, NodalField.constant(g, 2.0),
                      NodalField.constant(g, 2.0))
    assert path.stat().st_size > 0


def test_history_figure(tmp_path):
    path = tmp_path / "hist.png"
    save_history_figure(path, np.geomspace(1.0, 1e-9, 120))
    assert path.stat().st_size > 0


def test_history_figure_handles_zero_values(tmp_path):
    path = tmp_path / "zeros.png"
    save_history_figure(path, [1.0, 0.5, 0.0, 0.25])
    assert path.stat().st_size > 0
