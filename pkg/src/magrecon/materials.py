"""Reluctivity curves for air and saturable steel, and their phase mixing.

Air has constant unit reluctivity. Steel follows a saturation curve in the
squared field strength s = |grad A|^2: low reluctivity at weak fields,
approaching an upper plateau as the material saturates. The phase field
phi interpolates between the two with weights (2 - phi) for air and
(phi - 1) for steel, so phi = 1 is pure air and phi = 2 pure steel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class MaterialCurve:
    """Parameters of the steel reluctivity curve d1 + c1 s^b1 / (a1^b1 + s^b1).

    The defaults model hard steel; v_air is the constant air reluctivity.
    The constraints a1 > 0, b1 >= 1, c1 > 0, d1 > 0 keep the curve
    nondecreasing, bounded and differentiable.
    """

    a1: float = 0.5
    b1: float = 4.0
    c1: float = 3.0
    d1: float = 0.2
    v_air: float = 1.0

    def __post_init__(self):
        if not (self.a1 > 0 and self.b1 >= 1 and self.c1 > 0 and self.d1 > 0):
            raise InvalidArgumentError(
                "material curve requires a1 > 0, b1 >= 1, c1 > 0, d1 > 0")
        if not (np.isfinite(self.v_air) and self.v_air > 0):
            raise InvalidArgumentError("air reluctivity must be positive and finite")

    @property
    def v_min(self) -> float:
        return min(self.v_air, self.d1)

    @property
    def v_max(self) -> float:
        return max(self.v_air, self.d1 + self.c1)


def _check_s(s):
    arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgumentError("squared field strength must be finite and >= 0")
    return arr


def v1(curve: MaterialCurve, s) -> np.ndarray:
    """Air reluctivity (constant in the field strength)."""
    return np.broadcast_to(np.float64(curve.v_air), np.shape(_check_s(s))).copy()


def v1_prime(curve: MaterialCurve, s) -> np.ndarray:
    """Derivative of the air reluctivity: identically zero."""
    return np.zeros(np.shape(_check_s(s)))


def v2(curve: MaterialCurve, s) -> np.ndarray:
    """Steel reluctivity at squared field strength s; in [d1, d1 + c1)."""
    s = _check_s(s)
    sb = np.power(s, curve.b1)
    return curve.d1 + curve.c1 * sb / (curve.a1 ** curve.b1 + sb)


def v2_prime(curve: MaterialCurve, s) -> np.ndarray:
    """Analytic derivative of the steel reluctivity; nonnegative."""
    s = _check_s(s)
    ab = curve.a1 ** curve.b1
    sb = np.power(s, curve.b1)
    return curve.c1 * curve.b1 * ab * np.power(s, curve.b1 - 1.0) / (ab + sb) ** 2


def mix_v(curve: MaterialCurve, phi, s) -> np.ndarray:
    """Phase-mixed reluctivity: v1(s) (2 - phi) + v2(s) (phi - 1)."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("phase field contains non-finite values")
    return v1(curve, s) * (2.0 - phi) + v2(curve, s) * (phi - 1.0)


def mix_vprime(curve: MaterialCurve, phi, s) -> np.ndarray:
    """Phase-mixed derivative with respect to s: (2 - phi) v1' + (phi - 1) v2'."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("phase field contains non-finite values")
    return (2.0 - phi) * v1_prime(curve, s) + (phi - 1.0) * v2_prime(curve, s)
