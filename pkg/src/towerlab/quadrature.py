"""Quadrature rules for R^n and spherical domains (n = 3, 4, 5).

Integrands in this project decay algebraically at infinity and concentrate
at a ring of small cores near the unit sphere.  The whole-space rule splits
R^n at |y| = 1 and maps the outside back by inversion; cores are handled by
a smooth partition of unity and dedicated ball rules, so every node set
sees a smooth integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


def gauss_legendre(a: float, b: float, num: int) -> tuple[Array, Array]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(num)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1}."""
    from scipy.special import gamma

    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def sphere_rule(n: int, ring: int, polar: int) -> tuple[Array, Array]:
    """Quadrature on S^{n-1} with `ring` nodes along the (x1,x2)-plane angle.

    The ring direction is resolved by an equally weighted periodic rule
    (spectrally accurate); the remaining angles use Gauss-Legendre.  Node
    sets are symmetric under x_j -> -x_j for every j, so parity-odd
    integrands cancel to rounding.
    """
    if n == 3:
        t, wt = gauss_legendre(-1.0, 1.0, polar)  # t = cos(theta)
        phi = 2.0 * np.pi * np.arange(ring) / ring
        wphi = np.full(ring, 2.0 * np.pi / ring)
        st = np.sqrt(1.0 - t**2)
        dirs = np.empty((polar * ring, 3))
        dirs[:, 0] = np.outer(st, np.cos(phi)).ravel()
        dirs[:, 1] = np.outer(st, np.sin(phi)).ravel()
        dirs[:, 2] = np.repeat(t, ring)
        w = np.outer(wt, wphi).ravel()
        return dirs, w
    if n == 4:
        # Hopf coordinates: measure = (1/2) du dphi1 dphi2 with u in [0,1].
        u, wu = gauss_legendre(0.0, 1.0, polar)
        phi1 = 2.0 * np.pi * np.arange(ring) / ring
        phi2 = 2.0 * np.pi * np.arange(polar) / polar
        wphi1 = 2.0 * np.pi / ring
        wphi2 = 2.0 * np.pi / polar
        cu, su = np.sqrt(1.0 - u), np.sqrt(u)
        U, P1, P2 = np.meshgrid(np.arange(polar), phi1, phi2, indexing="ij")
        dirs = np.empty((polar * ring * polar, 4))
        dirs[:, 0] = (cu[U] * np.cos(P1)).ravel()
        dirs[:, 1] = (cu[U] * np.sin(P1)).ravel()
        dirs[:, 2] = (su[U] * np.cos(P2)).ravel()
        dirs[:, 3] = (su[U] * np.sin(P2)).ravel()
        w = (0.5 * wu[U] * wphi1 * wphi2 * np.ones_like(P1)).ravel()
        return dirs, w
    if n == 5:
        # x = (sin(chi) * omega, cos(chi)), omega in S^3, weight sin^3(chi).
        t, wt = gauss_legendre(-1.0, 1.0, polar)  # t = cos(chi)
        wt = wt * (1.0 - t**2)
        d3, w3 = sphere_rule(4, ring, polar)
        m3 = d3.shape[0]
        dirs = np.empty((polar * m3, 5))
        s = np.sqrt(1.0 - t**2)
        dirs[:, :4] = (s[:, None, None] * d3[None, :, :]).reshape(-1, 4)
        dirs[:, 4] = np.repeat(t, m3)
        w = (wt[:, None] * w3[None, :]).ravel()
        return dirs, w
    raise ValueError(f"unsupported dimension n={n}")


def _bump(u: Array) -> Array:
    """C^2 cutoff: 1 for u <= 1/2, 0 for u >= 1, quintic in between."""
    s = np.clip((u - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True)
class Rule:
    """A fixed node/weight rule; integrate(f) = sum w_i f(x_i), chunked."""

    points: Array  # (N, n)
    weights: Array  # (N,)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def integrate(self, f: Callable[[Array], Array], chunk: int = 200_000) -> float:
        total = 0.0
        for i in range(0, self.size, chunk):
            p = self.points[i : i + chunk]
            total += float(np.dot(self.weights[i : i + chunk], f(p)))
        return total

    def integrate_many(
        self, f: Callable[[Array], Array], m: int, chunk: int = 200_000
    ) -> Array:
        """Integrate a vector-valued integrand f: (N,n) -> (N,m)."""
        total = np.zeros(m)
        for i in range(0, self.size, chunk):
            p = self.points[i : i + chunk]
            total += self.weights[i : i + chunk] @ f(p)
        return total


def _ball_nodes(
    center: Array,
    radius: float,
    core: float,
    n: int,
    nr: int,
    ring: int,
    polar: int,
) -> tuple[Array, Array]:
    """Spike-local rule on B(center, radius) resolving a core of scale `core`."""
    if core < radius / 8.0:
        ni = max(nr // 2, 8)
        r1, w1 = gauss_legendre(0.0, 4.0 * core, ni)
        # logarithmic radial nodes across the scale gap
        t, wt = gauss_legendre(np.log(4.0 * core), np.log(radius), nr)
        r2 = np.exp(t)
        w2 = wt * r2
        r = np.concatenate([r1, r2])
        wr = np.concatenate([w1, w2])
    else:
        r, wr = gauss_legendre(0.0, radius, nr)
    dirs, wa = sphere_rule(n, ring, polar)
    pts = center[None, None, :] + r[:, None, None] * dirs[None, :, :]
    w = (wr * r ** (n - 1))[:, None] * wa[None, :]
    return pts.reshape(-1, n), w.ravel()


@dataclass(frozen=True)
class SpikeSpec:
    """A concentration site: cutoff ball of `radius` around `center`,
    with integrand features at scale `core`."""

    center: Array
    radius: float
    core: float


def _spike_factor(points: Array, sp: SpikeSpec) -> Array:
    u = np.linalg.norm(points - sp.center[None, :], axis=1) / sp.radius
    return _bump(u)


def _assemble(
    base_pts: Array,
    base_w: Array,
    n: int,
    spikes: Sequence[SpikeSpec],
    spike_nr: int,
    spike_ring: int,
    spike_polar: int,
) -> Rule:
    # telescoping partition of unity: spike i carries b_i * prod_{j<i}(1-b_j),
    # the background carries prod_i (1-b_i); exact even when balls overlap
    parts_p = [base_pts]
    fac = np.ones(base_pts.shape[0])
    for sp in spikes:
        fac *= 1.0 - _spike_factor(base_pts, sp)
    parts_w = [base_w * fac]
    for i, sp in enumerate(spikes):
        p, w = _ball_nodes(sp.center, sp.radius, sp.core, n, spike_nr, spike_ring, spike_polar)
        w = w * _spike_factor(p, sp)
        for other in spikes[:i]:
            w = w * (1.0 - _spike_factor(p, other))
        keep = w != 0.0
        parts_p.append(p[keep])
        parts_w.append(w[keep])
    return Rule(np.concatenate(parts_p), np.concatenate(parts_w))


def whole_space_rule(
    n: int,
    nr: int = 64,
    ring: int = 48,
    polar: int = 12,
    spikes: Sequence[SpikeSpec] = (),
    spike_nr: int = 20,
    spike_ring: int = 12,
    spike_polar: int = 6,
) -> Rule:
    """Rule for integrals over R^n of algebraically decaying integrands.

    |y| <= 1 is covered by a radial Gauss-Legendre x sphere product rule;
    |y| > 1 re-uses the same nodes through the inversion z = y/|y|^2 with
    Jacobian |z|^{-2n}.  Concentration sites listed in `spikes` are cut out
    by a smooth partition of unity and integrated on dedicated ball rules.
    """
    r, wr = gauss_legendre(0.0, 1.0, nr)
    dirs, wa = sphere_rule(n, ring, polar)
    inner = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w_in = ((wr * r ** (n - 1))[:, None] * wa[None, :]).ravel()
    # inversion image of the inner nodes covers |y| > 1
    outer = (dirs[None, :, :] / r[:, None, None]).reshape(-1, n)
    w_out = ((wr * r ** (n - 1) / r ** (2 * n))[:, None] * wa[None, :]).ravel()
    base_pts = np.concatenate([inner, outer])
    base_w = np.concatenate([w_in, w_out])
    return _assemble(base_pts, base_w, n, spikes, spike_nr, spike_ring, spike_polar)


def domain_rule(
    n: int,
    r_inner: float,
    r_outer: float,
    nr: int = 64,
    ring: int = 48,
    polar: int = 12,
    spikes: Sequence[SpikeSpec] = (),
    spike_nr: int = 20,
    spike_ring: int = 12,
    spike_polar: int = 6,
) -> Rule:
    """Rule over the spherical shell {r_inner < |x| < r_outer} (ball if
    r_inner = 0), with spike cutouts as in `whole_space_rule`.

    Spike balls must lie inside the shell; callers clamp radii accordingly.
    """
    r, wr = gauss_legendre(r_inner, r_outer, nr)
    dirs, wa = sphere_rule(n, ring, polar)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = ((wr * r ** (n - 1))[:, None] * wa[None, :]).ravel()
    return _assemble(pts, w, n, spikes, spike_nr, spike_ring, spike_polar)
