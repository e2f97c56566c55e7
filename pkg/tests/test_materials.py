"""Reluctivity curves: frozen values, derivative consistency, mixing, bounds."""

import numpy as np
import pytest

from magrecon.errors import InvalidArgumentError
from magrecon.materials import MaterialCurve, mix_v, mix_vprime, v1, v2, v2_prime


@pytest.fixture
def curve():
    return MaterialCurve()


def test_curve_defaults(curve):
    assert (curve.a1, curve.b1, curve.c1, curve.d1) == (0.5, 4.0, 3.0, 0.2)
    assert curve.v_air == 1.0


def test_curve_rejects_invalid_parameters():
    for kwargs in ({"a1": 0.0}, {"b1": 0.5}, {"c1": -1.0}, {"d1": 0.0}):
        with pytest.raises(InvalidArgumentError):
            MaterialCurve(**kwargs)


def test_v2_at_zero_is_offset(curve):
    assert v2(curve, 0.0) == pytest.approx(0.2, abs=1e-15)


def test_v2_half_saturation_value(curve):
    # 0.2 + 3 * 0.5^4 / (0.5^4 + 0.5^4) = 1.7, by hand
    assert v2(curve, 0.5) == pytest.approx(1.7, abs=1e-14)


def test_v2_approaches_upper_plateau(curve):
    assert abs(v2(curve, 1e6) - 3.2) <= 1e-6


def test_v2_rejects_negative_or_non_finite(curve):
    with pytest.raises(InvalidArgumentError):
        v2(curve, -0.1)
    with pytest.raises(InvalidArgumentError):
        v2(curve, np.nan)


def test_v2_prime_at_zero_vanishes(curve):
    assert v2_prime(curve, 0.0) == 0.0


def test_v2_prime_matches_central_difference(curve):
    step = 1e-6
    fd = (v2(curve, 0.5 + step) - v2(curve, 0.5 - step)) / (2 * step)
    assert abs(v2_prime(curve, 0.5) - fd) / abs(fd) <= 1e-6


def test_v2_prime_decays_at_saturation(curve):
    assert v2_prime(curve, 1e8) <= 1e-10


def test_v2_prime_fd_consistency_over_log_grid(curve):
    # relative agreement with central differences across eight decades
    for s in np.logspace(-4, 4, 33):
        step = 1e-6 * max(s, 1.0)
        fd = (v2(curve, s + step) - v2(curve, s - step)) / (2 * step)
        d = float(v2_prime(curve, s))
        assert abs(d - fd) / max(1.0, d) <= 1e-5


def test_v2_monotone_nondecreasing(curve):
    rng = np.random.default_rng(10)
    for _ in range(200):
        s1, s2 = np.sort(rng.uniform(0.0, 1e3, size=2))
        assert v2(curve, s1) <= v2(curve, s2) + 1e-15


def test_mix_v_endpoints(curve):
    for s in (0.0, 0.5, 10.0):
        assert mix_v(curve, 1.0, s) == pytest.approx(1.0, abs=1e-15)
    assert mix_v(curve, 2.0, 0.0) == pytest.approx(0.2, abs=1e-15)


def test_mix_v_midpoint_is_average(curve):
    assert mix_v(curve, 1.5, 0.0) == pytest.approx(0.6, abs=1e-14)


def test_mix_v_bounds_over_admissible_range(curve):
    rng = np.random.default_rng(11)
    phi = rng.uniform(1.0, 2.0, 500)
    s = rng.uniform(0.0, 1e4, 500)
    v = mix_v(curve, phi, s)
    assert np.all(v >= curve.v_min - 1e-12)
    assert np.all(v <= curve.v_max + 1e-12)


def test_mix_vprime_weights(curve):
    assert mix_vprime(curve, 1.0, 0.7) == 0.0
    assert mix_vprime(curve, 2.0, 0.5) == pytest.approx(float(v2_prime(curve, 0.5)),
                                                        abs=1e-15)
    assert mix_vprime(curve, 1.5, 0.5) == pytest.approx(
        0.5 * float(v2_prime(curve, 0.5)), abs=1e-15)


def test_v1_constant_and_flat(curve):
    s = np.linspace(0.0, 100.0, 7)
    assert np.all(v1(curve, s) == 1.0)
    from magrecon.materials import v1_prime
    assert np.all(v1_prime(curve, s) == 0.0)
