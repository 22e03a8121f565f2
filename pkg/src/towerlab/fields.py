"""Scalar fields, the standard bubble, and the sign-changing spike tower.

The tower is U* = U - sum_j U_j where U is the standard positive bubble and
the U_j are k inward-rescaled copies centered on a ring of radius
sqrt(1 - mu^2) in the (x1,x2)-plane.  With that radius the tower is exactly
invariant under the Kelvin transform, under rotation by 2*pi/k in the ring
plane, and under sign flips of every coordinate but the ring angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import Rule, SpikeSpec, sphere_area, sphere_rule, whole_space_rule

Array = np.ndarray

_FD_STEP = 1e-6


def _as_points(x, n: int) -> tuple[Array, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != n:
        raise ValueError(f"expected points in R^{n}, got shape {pts.shape}")
    return pts, single


@dataclass(frozen=True)
class ScalarField:
    """An evaluable map R^n -> R, optionally with an analytic gradient.

    `values` and `grad` are batch callables over (N, n) arrays.  The public
    evaluate/gradient accept single points or batches; when no analytic
    gradient is attached, central differences are used.
    """

    dimension: int
    values: Callable[[Array], Array]
    grad: Optional[Callable[[Array], Array]] = None
    kelvin_invariant: bool = False
    name: str = ""

    def evaluate(self, x):
        pts, single = _as_points(x, self.dimension)
        out = self.values(pts)
        return float(out[0]) if single else out

    __call__ = evaluate

    def gradient(self, x):
        pts, single = _as_points(x, self.dimension)
        if self.grad is not None:
            out = self.grad(pts)
        else:
            out = fd_gradient(self.values, pts, _FD_STEP)
        return out[0] if single else out

    @property
    def has_gradient(self) -> bool:
        return self.grad is not None


def fd_gradient(values: Callable[[Array], Array], pts: Array, h: float) -> Array:
    """Central finite-difference gradient of a batch evaluator."""
    n = pts.shape[1]
    out = np.empty_like(pts)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (values(pts + e) - values(pts - e)) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# the standard bubble


def bubble_constant(n: int) -> float:
    """The normalizing constant making Laplacian(U) = -U^p."""
    return (n * (n - 2) / 4.0) ** ((n - 2) / 4.0)


def critical_exponent(n: int) -> float:
    return (n + 2.0) / (n - 2.0)


def standard_bubble(n: int) -> ScalarField:
    """The radial entire solution U(x) = gamma * (2/(1+|x|^2))^{(n-2)/2}."""
    if n < 3:
        raise ValueError("standard bubble requires dimension n >= 3")
    m = (n - 2) / 2.0
    gamma = bubble_constant(n)

    def values(pts: Array) -> Array:
        r2 = np.sum(pts**2, axis=1)
        return gamma * (2.0 / (1.0 + r2)) ** m

    def grad(pts: Array) -> Array:
        r2 = np.sum(pts**2, axis=1)
        u = gamma * (2.0 / (1.0 + r2)) ** m
        return (-(n - 2) * u / (1.0 + r2))[:, None] * pts

    return ScalarField(n, values, grad, kelvin_invariant=True, name=f"U_{n}d")


def bubble_radial_laplacian(n: int, r) -> Array:
    """Laplacian of the standard bubble from its closed-form radial
    derivatives: u'' + (n-1)/r * u' (the r -> 0 limit is n * u''(0))."""
    r = np.asarray(r, dtype=float)
    m = (n - 2) / 2.0
    gamma = bubble_constant(n)
    s = 1.0 + r**2
    u = gamma * (2.0 / s) ** m
    up = -(n - 2) * u * r / s
    upp = -(n - 2) * u / s * (1.0 - n * r**2 / s)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = np.where(r > 0, upp + (n - 1) * np.divide(up, r, where=r > 0), n * upp)
    return lap


# ---------------------------------------------------------------------------
# the spike tower


@dataclass(frozen=True)
class TowerConfig:
    n: int
    k: int

    def __post_init__(self):
        if self.n not in (3, 4, 5):
            raise ValueError("supported dimensions are 3, 4, 5")
        if self.k != 0 and self.k < 8:
            # k = 0 is the degenerate single-bubble profile, used as an
            # exactness baseline; any genuine tower needs k >= 8.
            raise ValueError("spike count must be 0 or >= 8")


@dataclass(frozen=True)
class TowerProfile:
    config: TowerConfig
    mu: float
    spikes: Array  # (k, n) ring points
    field: ScalarField
    gamma: float

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def k(self) -> int:
        return self.config.k


def spike_angles(k: int) -> Array:
    return 2.0 * np.pi * np.arange(k) / k


def solve_mu(config: TowerConfig) -> float:
    """Scale mu making the ring self-interaction sum exactly one:
    [sum_{l>=2} (1 - cos theta_l)^{-(n-2)/2}] * mu^{(n-2)/2} = 1."""
    n, k = config.n, config.k
    if k == 0:
        return 1.0
    theta = spike_angles(k)[1:]
    s = float(np.sum((1.0 - np.cos(theta)) ** (-(n - 2) / 2.0)))
    return s ** (-2.0 / (n - 2))


def spike_points(config: TowerConfig, mu: float) -> Array:
    """Ring points xi_l = sqrt(1-mu^2) (cos theta_l, sin theta_l, 0, ...)."""
    n, k = config.n, config.k
    rho = math.sqrt(1.0 - mu * mu)
    theta = spike_angles(k)
    xi = np.zeros((k, n))
    xi[:, 0] = rho * np.cos(theta)
    xi[:, 1] = rho * np.sin(theta)
    return xi


def _tower_callables(n: int, mu: float, xi: Array):
    m = (n - 2) / 2.0
    gamma = bubble_constant(n)
    c = gamma * 2.0**m

    def values(pts: Array) -> Array:
        u = c * (1.0 + np.sum(pts**2, axis=1)) ** (-m)
        for j in range(xi.shape[0]):
            d2 = np.sum((pts - xi[j]) ** 2, axis=1)
            u -= c * mu**m * (mu * mu + d2) ** (-m)
        return u

    def grad(pts: Array) -> Array:
        s = 1.0 + np.sum(pts**2, axis=1)
        g = (-(n - 2) * c * s ** (-m - 1))[:, None] * pts
        for j in range(xi.shape[0]):
            d = pts - xi[j]
            sj = mu * mu + np.sum(d**2, axis=1)
            g += ((n - 2) * c * mu**m * sj ** (-m - 1))[:, None] * d
        return g

    return values, grad


def build_tower(config: TowerConfig) -> TowerProfile:
    """Assemble U* = U - sum_j U_j with U_j = mu^{-(n-2)/2} U((x - xi_j)/mu)."""
    mu = solve_mu(config)
    xi = spike_points(config, mu) if config.k else np.zeros((0, config.n))
    values, grad = _tower_callables(config.n, mu, xi)
    fld = ScalarField(
        config.n, values, grad, kelvin_invariant=True, name=f"tower_n{config.n}_k{config.k}"
    )
    return TowerProfile(config, mu, xi, fld, bubble_constant(config.n))


def bubble_powers(profile: TowerProfile):
    """Batch evaluators for U^p and sum_j U_j^p of the profile's bubbles."""
    n, mu, xi = profile.n, profile.mu, profile.spikes
    m = (n - 2) / 2.0
    p = critical_exponent(n)
    c = bubble_constant(n) * 2.0**m

    def u_pow(pts: Array) -> Array:
        return (c * (1.0 + np.sum(pts**2, axis=1)) ** (-m)) ** p

    def uj_pow(pts: Array) -> Array:
        out = np.zeros(pts.shape[0])
        for j in range(xi.shape[0]):
            d2 = np.sum((pts - xi[j]) ** 2, axis=1)
            out += (c * mu**m * (mu * mu + d2) ** (-m)) ** p
        return out

    return u_pow, uj_pow


def tower_residual(profile: TowerProfile) -> ScalarField:
    """Error term E = Laplacian(U*) + |U*|^{p-1} U*, evaluated analytically:
    each bubble is an exact solution, so Laplacian(U*) = -U^p + sum_j U_j^p."""
    p = critical_exponent(profile.n)
    u_pow, uj_pow = bubble_powers(profile)
    tower = profile.field

    def values(pts: Array) -> Array:
        q = tower.values(pts)
        return -u_pow(pts) + uj_pow(pts) + np.abs(q) ** (p - 1.0) * q

    return ScalarField(profile.n, values, name=f"residual_{tower.name}")


def tower_spike_specs(profile: TowerProfile, radius_frac: float = 0.5) -> list[SpikeSpec]:
    """Quadrature cutout balls around each spike: radius a fraction of the
    ring spacing, core at the concentration scale mu."""
    if profile.k == 0:
        return []
    spacing = 2.0 * math.pi * math.sqrt(1.0 - profile.mu**2) / profile.k
    r = radius_frac * spacing
    return [SpikeSpec(center=profile.spikes[j], radius=r, core=profile.mu) for j in range(profile.k)]


def shrink_to_disjoint(spikes: Sequence[SpikeSpec]) -> list[SpikeSpec]:
    """Shrink cutout radii so the balls are pairwise disjoint (the smooth
    partition of unity assumes no overlap)."""
    spikes = list(spikes)
    out = []
    for i, sp in enumerate(spikes):
        r = sp.radius
        for j, other in enumerate(spikes):
            if j == i:
                continue
            gap = float(np.linalg.norm(sp.center - other.center))
            r = min(r, 0.49 * gap)
        out.append(SpikeSpec(sp.center, min(r, sp.radius), min(sp.core, r / 4.0)))
    return out


# ---------------------------------------------------------------------------
# weighted norms and the Newton-potential identity


def _sample_grid(n: int, spikes: Array, mu: float) -> Array:
    """Structured sup-norm sampling set: 200 log-spaced shells on
    |y| in [1e-3, 1e3] times a fixed angular set, plus refinements on
    log-spaced shells around each spike down to the core scale."""
    radii = np.logspace(-3.0, 3.0, 200)
    if n == 3:
        dirs, _ = sphere_rule(3, 48, 12)
    elif n == 4:
        dirs, _ = sphere_rule(4, 32, 8)
    else:
        dirs, _ = sphere_rule(5, 16, 6)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    if spikes.shape[0]:
        local_r = np.logspace(math.log10(0.05 * mu), math.log10(0.5), 40)
        small = dirs[:: max(1, dirs.shape[0] // 60)]
        loc = (local_r[:, None, None] * small[None, :, :]).reshape(-1, n)
        pts = np.concatenate([pts] + [xi[None, :] + loc for xi in spikes])
    return pts


def weighted_norm(
    fld: ScalarField,
    flavor: str,
    q: float | None = None,
    spikes: Array | None = None,
    core: float = 0.1,
    rule: Rule | None = None,
) -> float:
    """Decay norms used to size the tower's error term.

    flavor 'sup': sup over a fixed structured grid of (1+|y|^{n-2}) |h(y)|.
    flavor 'Lq':  || (1+|y|)^{n+2-2n/q} h ||_{L^q(R^n)}, n/2 < q < n.
    """
    n = fld.dimension
    sp = np.zeros((0, n)) if spikes is None else np.asarray(spikes, float)
    if flavor == "sup":
        pts = _sample_grid(n, sp, core)
        r = np.linalg.norm(pts, axis=1)
        best = 0.0
        for i in range(0, pts.shape[0], 200_000):
            chunk = pts[i : i + 200_000]
            w = 1.0 + np.linalg.norm(chunk, axis=1) ** (n - 2)
            best = max(best, float(np.max(w * np.abs(fld.values(chunk)))))
        del r
        return best
    if flavor == "Lq":
        if q is None or not (n / 2.0 < q < n):
            raise ValueError("Lq flavor needs n/2 < q < n")
        if rule is None:
            specs = shrink_to_disjoint(
                [SpikeSpec(center=x, radius=0.3, core=core) for x in sp]
            )
            rule = whole_space_rule(n, nr=48, ring=max(48, 4 * max(1, sp.shape[0])), polar=12, spikes=specs)
        expo = n + 2.0 - 2.0 * n / q

        def integrand(pts: Array) -> Array:
            w = (1.0 + np.linalg.norm(pts, axis=1)) ** expo
            return (w * np.abs(fld.values(pts))) ** q

        return rule.integrate(integrand) ** (1.0 / q)
    raise ValueError(f"unknown norm flavor {flavor!r}")


def newton_constant(n: int) -> float:
    """b_n = 1/((n-2) * area(S^{n-1})): the constant in -Laplacian of
    b_n |x|^{2-n} being the unit point mass."""
    return 1.0 / ((n - 2) * sphere_area(n))


def green_representation_check(profile: TowerProfile, x: Array, nr: int = 96) -> float:
    """Residual of the Newton-potential identity
    U*(x) = b_n * integral |z-x|^{2-n} (-Laplacian U*)(z) dz,
    with -Laplacian U* = U^p - sum_j U_j^p known in closed form."""
    x = np.asarray(x, dtype=float)
    n = profile.n
    bn = newton_constant(n)
    u_pow, uj_pow = bubble_powers(profile)
    specs = tower_spike_specs(profile) + [SpikeSpec(center=x, radius=0.9, core=0.1)]
    specs = shrink_to_disjoint(specs)
    if n < 5:
        ring, polar = max(192, 8 * profile.k), 32 if n == 3 else 16
        s_nr, s_ring, s_polar = 48, 48 if n == 3 else 24, 24 if n == 3 else 12
    else:
        ring, polar = max(64, 4 * profile.k), 8
        s_nr, s_ring, s_polar = 32, 16, 6
    rule = whole_space_rule(
        n, nr=nr, ring=ring, polar=polar, spikes=specs,
        spike_nr=s_nr, spike_ring=s_ring, spike_polar=s_polar,
    )

    def integrand(pts: Array) -> Array:
        d = np.linalg.norm(pts - x[None, :], axis=1)
        d = np.maximum(d, 1e-14)
        return d ** (2.0 - n) * (u_pow(pts) - uj_pow(pts))

    return abs(float(profile.field.evaluate(x)) - bn * rule.integrate(integrand))
