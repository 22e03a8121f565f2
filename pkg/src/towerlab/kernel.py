"""Kernel of the linearized critical equation around a base field Q.

The 3n generators come from dilation (z_0), translation (z_1..z_n), the
distinguished plane rotations, and the Kelvin-type deformations.  Each one
equals a signed parameter-derivative of the solution family at the identity
parameters — a chain-rule fact that holds for any base field, which makes
the derivative-identity residual an exact test of the implementation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .family import BubbleParams, RotationChart, theta_family
from .fields import ScalarField, TowerProfile, critical_exponent, shrink_to_disjoint, tower_spike_specs
from .quadrature import Rule, SpikeSpec, whole_space_rule

Array = np.ndarray


@dataclass(frozen=True)
class KernelBasis:
    base: ScalarField
    members: tuple[ScalarField, ...]
    dimension: int
    spike_specs: tuple[SpikeSpec, ...] = ()

    @property
    def size(self) -> int:
        return 3 * self.dimension


def kernel_values(base: ScalarField, pts: Array) -> Array:
    """All 3n kernel functions at once: (N, n) points -> (N, 3n)."""
    n = base.dimension
    q = base.values(pts)
    g = base.grad(pts) if base.grad is not None else None
    if g is None:
        from .fields import fd_gradient

        g = fd_gradient(base.values, pts, 1e-6)
    r2 = np.sum(pts**2, axis=1)
    out = np.empty((pts.shape[0], 3 * n))
    z0 = (n - 2) / 2.0 * q + np.sum(g * pts, axis=1)
    out[:, 0] = z0
    for alpha in range(1, n + 1):
        out[:, alpha] = g[:, alpha - 1]
    out[:, n + 1] = -pts[:, 1] * g[:, 0] + pts[:, 0] * g[:, 1]
    out[:, n + 2] = -2.0 * pts[:, 0] * z0 + r2 * g[:, 0]
    out[:, n + 3] = -2.0 * pts[:, 1] * z0 + r2 * g[:, 1]
    for l in range(3, n + 1):
        xl = pts[:, l - 1]
        out[:, n + l + 1] = -xl * g[:, 0] + pts[:, 0] * g[:, l - 1]
        out[:, 2 * n + l - 1] = -xl * g[:, 1] + pts[:, 1] * g[:, l - 1]
    return out


def build_kernel_basis(source: ScalarField | TowerProfile) -> KernelBasis:
    """Kernel basis over a field or tower profile (the latter also carries
    the spike cutouts its integrals need)."""
    if isinstance(source, TowerProfile):
        base = source.field
        specs = tuple(shrink_to_disjoint(tower_spike_specs(source)))
    else:
        base = source
        specs = ()
    n = base.dimension

    def member(alpha: int) -> ScalarField:
        def values(pts: Array) -> Array:
            return kernel_values(base, pts)[:, alpha]

        return ScalarField(n, values, name=f"z{alpha}({base.name})")

    members = tuple(member(a) for a in range(3 * n))
    return KernelBasis(base, members, n, specs)


def kernel_function(basis: KernelBasis, alpha: int, x) -> float | Array:
    if not 0 <= alpha < basis.size:
        raise IndexError(f"kernel index {alpha} out of range [0, {basis.size})")
    return basis.members[alpha].evaluate(x)


# ---------------------------------------------------------------------------
# derivative identities

# sign s_alpha in  z_alpha = s_alpha * d/dA_alpha [family at identity]:
# minus for the dilation, translation, and Kelvin-type parameters, plus for
# the rotation angles.  (Derived by the chain rule and confirmed
# numerically; the identity fixes the signs, they are not adjustable.)


def _identity_sign(n: int, alpha: int) -> float:
    if alpha <= n:  # dilation and translations
        return -1.0
    if alpha in (n + 2, n + 3):  # Kelvin-type pair
        return -1.0
    return 1.0  # rotations


def _perturbed(n: int, alpha: int, t: float) -> BubbleParams:
    """Identity parameters displaced by t along the alpha-th direction."""
    lam, xi, a = 1.0, np.zeros(n), np.zeros(2)
    th = np.zeros(2 * n - 3)
    if alpha == 0:
        lam = 1.0 + t
    elif 1 <= alpha <= n:
        xi[alpha - 1] = t
    elif alpha == n + 1:
        th[0] = t
    elif alpha == n + 2:
        a[0] = t
    elif alpha == n + 3:
        a[1] = t
    elif n + 4 <= alpha <= 2 * n + 1:
        l = alpha - n - 1  # rotation plane (1, l)
        th[l - 2] = t
    elif 2 * n + 2 <= alpha <= 3 * n - 1:
        l = alpha - 2 * n + 1  # rotation plane (2, l)
        th[n + l - 4] = t
    else:
        raise IndexError(f"kernel index {alpha} out of range")
    return BubbleParams(lam, xi, a, RotationChart(th))


def derivative_identity_residual(
    basis: KernelBasis, alpha: int, x, h: float = 1e-4
) -> float:
    """|signed central-difference parameter derivative - z_alpha(x)|.

    The derivative acts on the pre-rotation composition (the family member
    evaluated at the rotated point); at the identity this agrees with the
    plain family for the non-rotation parameters and is the only form in
    which the rotation derivatives are nonzero.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    n = basis.dimension
    x = np.asarray(x, dtype=float)
    plus = theta_family(_perturbed(n, alpha, h), basis.base, x)
    minus = theta_family(_perturbed(n, alpha, -h), basis.base, x)
    fd = _identity_sign(n, alpha) * (plus - minus) / (2.0 * h)
    return abs(fd - float(basis.members[alpha].evaluate(x)))


# ---------------------------------------------------------------------------
# Gram matrix


@dataclass(frozen=True)
class GramReport:
    matrix: Array  # (3n, 3n) of integral |Q|^{p-1} z_a z_b
    coupling_blocks: dict  # the two 2x2 translation/Kelvin blocks
    condition_numbers: dict
    smallest_singular_value: float
    near_zero_pairs: list  # off-block entries below tolerance
    flagged_entries: list  # entries that moved between quadrature levels

    def to_json(self) -> str:
        payload = {
            "matrix": self.matrix.tolist(),
            "coupling_blocks": {k: np.asarray(v).tolist() for k, v in self.coupling_blocks.items()},
            "condition_numbers": self.condition_numbers,
            "smallest_singular_value": self.smallest_singular_value,
            "near_zero_pairs": self.near_zero_pairs,
            "flagged_entries": self.flagged_entries,
        }
        return json.dumps(payload, sort_keys=True)


def _gram_accumulate(basis: KernelBasis, rule: Rule, chunk: int = 100_000) -> Array:
    n = basis.dimension
    p = critical_exponent(n)
    m = np.zeros((3 * n, 3 * n))
    for i in range(0, rule.size, chunk):
        pts = rule.points[i : i + chunk]
        w = rule.weights[i : i + chunk]
        z = kernel_values(basis.base, pts)
        qp = np.abs(basis.base.values(pts)) ** (p - 1.0)
        zw = z * (w * qp)[:, None]
        m += z.T @ zw
    return m


def gram_matrix(
    basis: KernelBasis,
    rule: Optional[Rule] = None,
    check_rule: Optional[Rule] = None,
    zero_tol: float = 1e-8,
    flag_tol: float = 1e-4,
) -> GramReport:
    """All pairwise weighted inner products of the kernel functions, with a
    two-resolution consistency flag on every entry."""
    n = basis.dimension
    specs = list(basis.spike_specs)
    if rule is None:
        k = max(len(specs), 1)
        ring = max(96, 8 * k) if n < 5 else max(48, 4 * k)
        polar = {3: 16, 4: 12, 5: 6}[n]
        rule = whole_space_rule(n, nr=64, ring=ring, polar=polar, spikes=specs)
        check_rule = whole_space_rule(
            n, nr=48, ring=3 * ring // 4, polar=max(polar - 4, 4), spikes=specs,
            spike_nr=16, spike_ring=10, spike_polar=5,
        )
    m = _gram_accumulate(basis, rule)
    m = 0.5 * (m + m.T)
    flagged = []
    if check_rule is not None:
        m2 = _gram_accumulate(basis, check_rule)
        scale = max(np.max(np.abs(np.diag(m))), 1e-30)
        bad = np.argwhere(np.abs(m - m2) > flag_tol * scale)
        flagged = [[int(a), int(b)] for a, b in bad if a <= b]
    diag_scale = max(float(np.max(np.abs(np.diag(m)))), 1e-30)
    near_zero = [
        [int(a), int(b)]
        for a in range(3 * n)
        for b in range(a + 1, 3 * n)
        if abs(m[a, b]) < zero_tol * diag_scale
    ]
    blocks = {
        "(1,n+2)": m[np.ix_([1, n + 2], [1, n + 2])],
        "(2,n+3)": m[np.ix_([2, n + 3], [2, n + 3])],
    }
    svals = np.linalg.svd(m, compute_uv=False)
    conds = {
        "full": float(svals[0] / max(svals[-1], 1e-300)),
        "(1,n+2)": float(np.linalg.cond(blocks["(1,n+2)"])),
        "(2,n+3)": float(np.linalg.cond(blocks["(2,n+3)"])),
    }
    return GramReport(
        matrix=m,
        coupling_blocks=blocks,
        condition_numbers=conds,
        smallest_singular_value=float(svals[-1]),
        near_zero_pairs=near_zero,
        flagged_entries=flagged,
    )
