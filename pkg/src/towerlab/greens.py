"""Green's function, regular part, and Robin function on radial domains.

Convention: -Laplacian G(., y) is the unit point mass at y with zero
boundary values, so G >= 0, Gamma(x) = b_n |x|^{2-n} with b_n > 0, and the
regular part is H = Gamma - G.  Backends: the image formula on the unit
ball, an ultraspherical-harmonics series on the annulus {delta < |x| < 1},
and the cut-cell grid solver on either (n = 3 only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import newton_constant

Array = np.ndarray


def gamma_fundamental(x, n: int) -> float | Array:
    """Gamma(x) = b_n |x|^{2-n}, the decaying fundamental solution."""
    x = np.asarray(x, float)
    r = np.linalg.norm(np.atleast_2d(x), axis=1)
    if np.any(r == 0):
        raise ValueError("fundamental solution is singular at the origin")
    out = newton_constant(n) * r ** (2.0 - n)
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class DomainSpec:
    kind: str  # "ball" | "annulus" | "grid"
    n: int = 3
    delta: float = 0.0
    resolution: int = 96

    def __post_init__(self):
        if self.kind not in ("ball", "annulus", "grid"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "annulus" and not 0.0 < self.delta < 1.0:
            raise ValueError("annulus needs 0 < delta < 1")
        if self.kind == "grid" and self.n != 3:
            raise ValueError("grid domains are 3-dimensional")
        if self.n not in (3, 4, 5):
            raise ValueError("supported dimensions are 3, 4, 5")


def _gegenbauer_sum(
    nu: float, t: Array, coef_of_l, lmax: int, tol: float
) -> tuple[Array, Array]:
    """Sum_l coef_of_l(l) * C_l^nu(t) by the three-term recurrence,
    vectorized over points.  Returns (sum, last-increment magnitude)."""
    c_prev = np.ones_like(t)  # C_0
    total = coef_of_l(0) * c_prev
    c_curr = 2.0 * nu * t  # C_1
    inc = coef_of_l(1) * c_curr
    total = total + inc
    last = np.abs(inc)
    for l in range(2, lmax + 1):
        c_next = (2.0 * t * (l + nu - 1.0) * c_curr - (l + 2.0 * nu - 2.0) * c_prev) / l
        inc = coef_of_l(l) * c_next
        total = total + inc
        last = np.abs(inc)
        c_prev, c_curr = c_curr, c_next
        if np.max(last) < tol * max(np.max(np.abs(total)), 1e-30):
            break
    return total, last


class GreensProvider:
    """Evaluator of G, H = Gamma - G, and the Robin function H(x, x)."""

    def __init__(
        self,
        domain: DomainSpec,
        backend: str = "auto",
        series_cap: int = 80,
        series_tol: float = 1e-10,
    ):
        if backend == "auto":
            backend = {"ball": "closed-form", "annulus": "series", "grid": "grid"}[domain.kind]
        if backend == "closed-form" and domain.kind != "ball":
            raise ValueError("the closed form is only available on the ball")
        if backend == "series" and domain.kind == "grid":
            raise ValueError("the series backend needs a radial domain")
        self.domain = domain
        self.backend = backend
        self.series_cap = series_cap
        self.series_tol = series_tol
        self.bn = newton_constant(domain.n)
        self.flags: list[str] = []
        self._grid = None
        self._memo: dict = {}

    # -- backends ----------------------------------------------------------

    def _ball_h(self, x: Array, y: Array) -> float:
        n = self.domain.n
        ry = np.linalg.norm(y)
        if ry == 0:
            return self.bn
        img = x * ry - y / ry  # = |y| * (x - y/|y|^2)
        return self.bn * float(np.linalg.norm(img)) ** (2.0 - n)

    def _series_h(self, x: Array, y: Array) -> float:
        """Annulus regular part by per-degree radial transfer: the harmonic
        function matching Gamma(x - y) on both spheres.  Coefficients decay
        geometrically like max(rs, delta^2/(rs))^l."""
        n = self.domain.n
        delta = self.domain.delta
        nu = (n - 2) / 2.0
        r, s = np.linalg.norm(x), np.linalg.norm(y)
        t = np.array([float(x @ y) / max(r * s, 1e-300)])
        t = np.clip(t, -1.0, 1.0)
        dn = delta ** (n - 2.0)

        def coef(l: int) -> float:
            # A_l r^l + B_l r^{2-n-l} from the two boundary conditions:
            # A + B = s^l at r=1 and the matching condition at r=delta.
            dkl = delta ** (n - 2.0 + 2.0 * l)
            denom = 1.0 - dkl
            a = (s**l - dkl * s ** (2.0 - n - l)) / denom
            b = dkl * (s ** (2.0 - n - l) - s**l) / denom
            return a * r**l + b * r ** (2.0 - n - l)

        total, last = _gegenbauer_sum(nu, t, coef, self.series_cap, self.series_tol)
        scale = max(abs(float(total[0])), 1e-30)
        if float(last[0]) > 1e-8 * scale:
            self.flags.append(
                f"series tail {float(last[0]):.2e} above tolerance at r={r:.3f}, s={s:.3f}"
            )
        return self.bn * float(total[0])

    def _grid_field_for(self, y: Array):
        from .grids import build_domain_grid, harmonic_extension_grid

        if self._grid is None:
            delta = self.domain.delta if self.domain.kind != "ball" else 0.0
            self._grid = build_domain_grid(delta, self.domain.resolution)
        key = tuple(np.round(np.asarray(y, float), 12))
        if key not in self._memo:
            n = self.domain.n
            yv = np.asarray(y, float)

            def trace(p: Array) -> Array:
                d = np.linalg.norm(p - yv[None, :], axis=1)
                return self.bn * d ** (2.0 - n)

            fld, report = harmonic_extension_grid(self._grid, trace)
            if not report["converged"]:
                self.flags.append(f"grid solve at y={yv.tolist()}: {report}")
            self._memo[key] = fld
        return self._memo[key]

    # -- public API ---------------------------------------------------------

    def regular_part(self, x, y) -> float:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.backend == "closed-form":
            return self._ball_h(x, y)
        if self.backend == "series":
            return self._series_h(x, y)
        return float(self._grid_field_for(y).interpolate(x[None, :])[0])

    def green(self, x, y) -> float:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if np.allclose(x, y):
            raise ValueError("Green's function is singular on the diagonal")
        return float(gamma_fundamental(x - y, self.domain.n)) - self.regular_part(x, y)

    def robin(self, x) -> float:
        x = np.asarray(x, float)
        if self.backend == "closed-form":
            n = self.domain.n
            return self.bn * (1.0 - float(x @ x)) ** (2.0 - n) * 1.0  # (1-|x|^2)^{2-n}
        return self.regular_part(x, x)


def phi_pair(provider: GreensProvider, xi1, xi2) -> float:
    """phi = sqrt(H(xi1,xi1) H(xi2,xi2)) - G(xi1, xi2); negative values are
    the hole-induced interaction regime."""
    h1 = provider.robin(np.asarray(xi1, float))
    h2 = provider.robin(np.asarray(xi2, float))
    return math.sqrt(h1 * h2) - provider.green(xi1, xi2)


@dataclass(frozen=True)
class HoleCriterionReport:
    sigma: float
    samples: int
    phi_min: float
    phi_max: float
    all_negative: bool
    fraction_negative: float


def check_hole_criterion(
    provider: GreensProvider, sigma: float, samples: int = 200, seed: int = 0
) -> HoleCriterionReport:
    """Sample pairs on {|xi1| = |xi2| = sigma} and report the sign of phi."""
    n = provider.domain.n
    rng = np.random.default_rng(seed)
    vals = np.empty(samples)
    for i in range(samples):
        d1 = rng.normal(size=n)
        d2 = rng.normal(size=n)
        x1 = sigma * d1 / np.linalg.norm(d1)
        x2 = sigma * d2 / np.linalg.norm(d2)
        while np.linalg.norm(x1 - x2) < 1e-3:
            d2 = rng.normal(size=n)
            x2 = sigma * d2 / np.linalg.norm(d2)
        vals[i] = phi_pair(provider, x1, x2)
    return HoleCriterionReport(
        sigma=sigma,
        samples=samples,
        phi_min=float(vals.min()),
        phi_max=float(vals.max()),
        all_negative=bool(np.all(vals < 0)),
        fraction_negative=float(np.mean(vals < 0)),
    )
