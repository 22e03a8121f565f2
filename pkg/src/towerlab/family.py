"""The 3n-parameter solution family built over a base field.

A member is determined by A = (lambda, xi, a, theta): dilation scale,
translation, a two-component inversion-type parameter, and a rotation from
the subgroup generated by the (x1,xl) and (x2,xl) coordinate planes.  When
the base solves the critical equation, every member does too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fields import ScalarField

Array = np.ndarray


def plane_rotation(n: int, i: int, j: int, angle: float) -> Array:
    """Rotation by `angle` in the (x_i, x_j) coordinate plane (0-based)."""
    r = np.eye(n)
    c, s = np.cos(angle), np.sin(angle)
    r[i, i] = c
    r[j, j] = c
    r[i, j] = -s
    r[j, i] = s
    return r


@dataclass(frozen=True)
class RotationChart:
    """Angles (theta_12, theta_13..theta_1n, theta_23..theta_2n), 2n-3 of
    them; the chart is the ordered product of the plane rotations."""

    theta: Array

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, float)))

    @property
    def dimension(self) -> int:
        return (len(self.theta) + 3) // 2

    @staticmethod
    def identity(n: int) -> "RotationChart":
        return RotationChart(np.zeros(2 * n - 3))


def rotation_matrix(chart: RotationChart) -> Array:
    n = chart.dimension
    th = chart.theta
    r = plane_rotation(n, 0, 1, th[0])
    for l in range(2, n):
        r = r @ plane_rotation(n, 0, l, th[l - 1])
    for l in range(2, n):
        r = r @ plane_rotation(n, 1, l, th[n - 3 + l])
    return r


@dataclass(frozen=True)
class BubbleParams:
    """A = (lambda, xi, a, theta); `a` lives in R^2, embedded in the first
    two coordinates of R^n."""

    lam: float
    xi: Array
    a: Array
    theta: RotationChart

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, float))
        object.__setattr__(self, "a", np.asarray(self.a, float))
        if self.lam <= 0:
            raise ValueError("scale parameter must be positive")
        if self.a.shape != (2,):
            raise ValueError("parameter a must be a 2-vector")

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @cached_property
    def rot(self) -> Array:
        return rotation_matrix(self.theta)

    @cached_property
    def a_embedded(self) -> Array:
        out = np.zeros(self.n)
        out[:2] = self.a
        return out

    @cached_property
    def xi_hat(self) -> Array:
        """Rotated center R_theta xi."""
        return self.rot @ self.xi

    @cached_property
    def a_hat(self) -> Array:
        """Rotated inversion parameter R_theta a."""
        return self.rot @ self.a_embedded

    @staticmethod
    def identity(n: int) -> "BubbleParams":
        return BubbleParams(1.0, np.zeros(n), np.zeros(2), RotationChart.identity(n))


def eta(lam: float, xi: Array, a: Array, x: Array) -> Array:
    """eta(x) = (x-xi)/|x-xi| - a |x-xi| / lambda; undefined at x = xi."""
    xi = np.asarray(xi, float)
    x = np.asarray(x, float)
    a_full = np.zeros_like(xi)
    a_full[:2] = np.asarray(a, float)
    d = x - xi
    r = np.linalg.norm(d)
    if r == 0.0:
        raise ValueError("eta is singular at x = xi")
    return d / r - a_full * r / lam


def _family_values(params: BubbleParams, base: ScalarField, pts: Array) -> Array:
    """Batch evaluation of the family member at points (N, n).

    Direct form: lam^{-m} D^{-m} base(R (w - a|w|^2) / D) with
    w = (R^T x - xi)/lam and D = |eta|^2 = 1 - 2 a.w + |a|^2 |w|^2.
    Both numerator and denominator are polynomial in x (multiply through by
    lam^2), so the bubble center w = 0 needs no special casing: D -> 1.
    For a != 0, D vanishes at the single point w = a/|a|^2 where the
    argument escapes to infinity; on that branch a Kelvin-invariant base is
    evaluated through its inversion, which keeps everything finite.
    """
    n = params.n
    m = (n - 2) / 2.0
    lam = params.lam
    a = params.a_embedded
    a2 = float(a @ a)
    w = (pts @ params.rot - params.xi[None, :]) / lam
    w2 = np.sum(w**2, axis=1)
    aw = w @ a
    # D >= 0 exactly (lam^2 D = |a|^2 |x' - xi - lam a/|a|^2|^2); clamp the
    # rounding noise so fractional powers stay real.  Within ~1e-8 of the
    # single zero of D the cancellation costs accuracy but stays finite.
    d = np.maximum(1.0 - 2.0 * aw + a2 * w2, 0.0)
    v = (w - np.outer(w2, a)) @ params.rot.T
    v2 = np.sum(v**2, axis=1)

    out = np.empty(pts.shape[0])
    # direct branch where the argument v/D stays bounded
    if base.kelvin_invariant:
        direct = (v2 <= d * d) & (d > 0.0)
    else:
        direct = np.ones(pts.shape[0], dtype=bool)
    if np.any(direct):
        dd = d[direct]
        arg = v[direct] / dd[:, None]
        out[direct] = dd ** (-m) * base.values(arg)
    far = ~direct
    if np.any(far):
        if not base.kelvin_invariant:
            raise ValueError("family member is singular for this base field")
        vv = np.maximum(v2[far], 1e-300)
        arg = v[far] * (d[far] / vv)[:, None]
        out[far] = d[far] ** m * vv ** (-m) * base.values(arg)
    return lam ** (-m) * out


def q_family_field(params: BubbleParams, base: ScalarField) -> ScalarField:
    """The family member as a ScalarField (finite-difference gradient)."""

    def values(pts: Array) -> Array:
        return _family_values(params, base, pts)

    return ScalarField(
        params.n,
        values,
        kelvin_invariant=base.kelvin_invariant and params.lam == 1.0
        and not params.xi.any() and not params.a.any(),
        name=f"family({base.name})",
    )


def q_family(params: BubbleParams, base: ScalarField, x) -> float | Array:
    """Evaluate the family member at a point or batch of points."""
    pts = np.atleast_2d(np.asarray(x, float))
    out = _family_values(params, base, pts)
    return float(out[0]) if np.ndim(x) == 1 else out


def theta_family(params: BubbleParams, base: ScalarField, x) -> float | Array:
    """The pre-rotation form: the family member evaluated at R_theta x.
    Parameter derivatives at the identity act on this composition."""
    pts = np.atleast_2d(np.asarray(x, float)) @ params.rot.T
    out = _family_values(params, base, pts)
    return float(out[0]) if np.ndim(x) == 1 else out
