"""Energy functionals and the expansion constants.

Verifies the two-bubble energy expansions: J_0 of the projected pair equals
twice the free energy plus a quadratic form in lambda^{(n-2)/2} built from
the Robin function and the Green's function, and J_eps adds the eps*log(eps)
and eps terms once the scales are slaved to eps.

Gradient integrals of projected bubbles are computed through the exact
identity  integral grad(PQ_i).grad(PQ_j) = integral |Q_i|^{p-1} Q_i PQ_j
(PQ vanishes on the boundary and -Laplacian(PQ_i) = |Q_i|^{p-1} Q_i), so no
numerical differentiation enters; the harmonic corrections phi_i are
evaluated mesh-free at the quadrature nodes.  A grid-based J_eps is kept
for grid fields.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .family import BubbleParams, q_family_field
from .fields import (
    ScalarField,
    TowerProfile,
    critical_exponent,
    newton_constant,
    shrink_to_disjoint,
    tower_spike_specs,
)
from .greens import DomainSpec, GreensProvider
from .grids import GridField
from .projection import meshfree_harmonic_extension
from .quadrature import Rule, SpikeSpec, domain_rule, whole_space_rule

Array = np.ndarray


def zeta_normalizer(n: int, epsilon: float) -> float:
    """zeta = eps^{eps p / (2(p-1+eps))} - 1; tends to 0 with eps."""
    if epsilon == 0:
        return 0.0
    p = critical_exponent(n)
    return epsilon ** (epsilon * p / (2.0 * (p - 1.0 + epsilon))) - 1.0


@dataclass(frozen=True)
class EnergyConfig:
    n: int
    epsilon: float = 0.0
    nr: int = 32
    ring: int = 96
    polar: int = 24
    spike_nr: int = 40
    spike_ring: int = 12
    spike_polar: int = 6
    lmax: int = 20

    @property
    def p(self) -> float:
        return critical_exponent(self.n)

    @property
    def zeta(self) -> float:
        return zeta_normalizer(self.n, self.epsilon)


def _tower_rule(profile: TowerProfile, cfg: EnergyConfig) -> Rule:
    specs = shrink_to_disjoint(tower_spike_specs(profile))
    ring = max(cfg.ring, 8 * profile.k) if profile.n < 5 else max(48, 4 * profile.k)
    polar = cfg.polar if profile.n == 3 else min(cfg.polar, 16 if profile.n == 4 else 12)
    return whole_space_rule(
        profile.n, nr=cfg.nr, ring=ring, polar=polar, spikes=specs,
        spike_nr=cfg.spike_nr, spike_ring=cfg.spike_ring, spike_polar=cfg.spike_polar,
    )


def whole_space_energy(
    source: ScalarField | TowerProfile,
    rule: Optional[Rule] = None,
    cfg: Optional[EnergyConfig] = None,
) -> float:
    """Free energy (1/2) integral |grad Q|^2 - 1/(p+1) integral |Q|^{p+1}."""
    profile = source if isinstance(source, TowerProfile) else None
    fld = profile.field if profile is not None else source
    n = fld.dimension
    cfg = cfg or EnergyConfig(n)
    if rule is None:
        if profile is not None:
            rule = _tower_rule(profile, cfg)
        else:
            ring = cfg.ring if n < 5 else 48
            polar = cfg.polar if n == 3 else min(cfg.polar, 16 if n == 4 else 12)
            rule = whole_space_rule(n, nr=cfg.nr, ring=ring, polar=polar)
    p = critical_exponent(n)

    def integrand(pts: Array) -> Array:
        g = fld.gradient(pts)
        q = fld.values(pts)
        return 0.5 * np.sum(g * g, axis=1) - np.abs(q) ** (p + 1.0) / (p + 1.0)

    return rule.integrate(integrand)


def bubble_energy(n: int) -> float:
    """Per-bubble energy (1/n) integral U^{p+1} in closed form is not used;
    the quadrature value doubles as the calibration gate."""
    from .fields import standard_bubble

    cfg = EnergyConfig(n)
    # the integrand is radial, so the angular resolution only needs to make
    # the sphere weights sum exactly; cap it in higher dimension to keep the
    # product rule small
    ring = cfg.ring if n < 5 else 48
    polar = cfg.polar if n == 3 else min(cfg.polar, 16 if n == 4 else 12)
    rule = whole_space_rule(n, nr=cfg.nr, ring=ring, polar=polar)
    u = standard_bubble(n)
    p = critical_exponent(n)
    return rule.integrate(lambda pts: np.abs(u.values(pts)) ** (p + 1.0)) / n


# ---------------------------------------------------------------------------
# the constant zoo


@dataclass(frozen=True)
class ConstantSet:
    n: int
    b_n: float
    gamma_n: float
    alpha_n: float
    beta_n: float
    chi_n: float
    eta_n: float
    w_n: float
    s_n: float
    int_qp1: float  # integral |Q|^{p+1}
    int_grad: float  # integral |grad Q|^2
    int_qp1_log: float  # integral |Q|^{p+1} log |Q|
    log_flagged: bool

    def to_json(self) -> str:
        return json.dumps(
            {k: getattr(self, k) for k in self.__dataclass_fields__}, sort_keys=True
        )


def constant_set(base: TowerProfile, cfg: Optional[EnergyConfig] = None) -> ConstantSet:
    """All expansion constants from whole-space quadratures of the profile.

    alpha_n is fixed by the projection identity (coefficient of lambda^{n-2}
    in the boundary-correction energy) to b_n^{-2}/2; the numerical
    consistency of that identity is exercised in the test suite."""
    n = base.n
    cfg = cfg or EnergyConfig(n)
    p = critical_exponent(n)
    rule = _tower_rule(base, cfg)
    fld = base.field

    def both(pts: Array) -> Array:
        g = fld.gradient(pts)
        q = np.abs(fld.values(pts))
        qp = q ** (p + 1.0)
        # clamp below so the logarithm of the (measure-zero) zero set of a
        # sign-changing profile stays finite; the integrand qp*log(q) -> 0
        logq = np.log(np.maximum(q, 1e-300))
        return np.stack([np.sum(g * g, axis=1), qp, qp * logq], axis=1)

    int_grad, int_qp1, int_qp1_log = rule.integrate_many(both, 3)
    # flag if any node sits so close to the zero set that the clamp acted
    probe = rule.points[:: max(1, rule.size // 5000)]
    log_flagged = bool(np.any(np.abs(fld.values(probe)) < 1e-280))
    bn = newton_constant(n)
    gamma_n = 0.5 * int_grad - int_qp1 / (p + 1.0)
    alpha_n = 0.5 / bn**2
    beta_n = int_qp1 / (n * alpha_n)
    chi_n = int_qp1 / (p + 1.0)
    eta_n = 2.0 * (int_qp1 / (p + 1.0) ** 2 - int_qp1_log / (p + 1.0)) + (
        chi_n / (p + 1.0)
    ) * math.log(beta_n)
    return ConstantSet(
        n=n,
        b_n=bn,
        gamma_n=float(gamma_n),
        alpha_n=alpha_n,
        beta_n=float(beta_n),
        chi_n=float(chi_n),
        eta_n=float(eta_n),
        w_n=float(int_qp1 / n),
        s_n=float(int_qp1 / n),
        int_qp1=float(int_qp1),
        int_grad=float(int_grad),
        int_qp1_log=float(int_qp1_log),
        log_flagged=log_flagged,
    )


# ---------------------------------------------------------------------------
# grid-based domain energy


def domain_energy(domain: DomainSpec, u: GridField, epsilon: float) -> float:
    """J_eps of a grid field vanishing on the boundary: central-difference
    gradient on the interior, one-sided in the boundary layer (the field's
    exterior values are zero there, matching the trace)."""
    from .projection import get_grid

    grid = get_grid(domain, resolution=u.values.shape[0])
    h = u.spacing
    p = critical_exponent(3)
    gx, gy, gz = np.gradient(u.values, h, edge_order=1)
    dens = 0.5 * (gx**2 + gy**2 + gz**2)
    pot = np.abs(u.values) ** (p + 1.0 + epsilon) / (p + 1.0 + epsilon)
    mask = grid.interior
    return float(h**3 * (np.sum(dens[mask]) - np.sum(pot[mask])))


# ---------------------------------------------------------------------------
# mesh-free two-bubble energies


def _pair_rule(domain: DomainSpec, centers: Sequence[Array], cores: Sequence[float],
               cfg: EnergyConfig) -> Rule:
    inner = domain.delta if domain.kind == "annulus" else 0.0
    specs = []
    for c, lam in zip(centers, cores):
        # the partition of unity tolerates overlapping balls, so the radius
        # is capped by the domain boundary alone
        r = 0.9 * min(float(np.linalg.norm(c)) - inner, 1.0 - float(np.linalg.norm(c)))
        specs.append(
            SpikeSpec(center=np.asarray(c, float), radius=r, core=min(lam, r / 4.0))
        )
    return domain_rule(
        domain.n, inner, 1.0, nr=cfg.nr, ring=cfg.ring, polar=cfg.polar, spikes=specs,
        spike_nr=cfg.spike_nr, spike_ring=cfg.spike_ring, spike_polar=cfg.spike_polar,
    )


class ProjectedPair:
    """Cached node values of Q_i, phi_i, PQ_i for two bubbles on a shared
    quadrature rule over the domain."""

    def __init__(self, domain: DomainSpec, params: Sequence[BubbleParams],
                 base: TowerProfile, cfg: Optional[EnergyConfig] = None):
        self.domain = domain
        self.cfg = cfg or EnergyConfig(domain.n)
        self.params = list(params)
        self.base = base
        centers = [p.xi_hat for p in self.params]
        cores = [p.lam for p in self.params]
        self.rule = _pair_rule(domain, centers, cores, self.cfg)
        self.q = []
        self.phi = []
        for prm in self.params:
            fld = q_family_field(prm, base.field)
            self.q.append(fld.values(self.rule.points))
            self.phi.append(
                meshfree_harmonic_extension(
                    domain, fld.values, self.rule.points, lmax=self.cfg.lmax
                )
            )
        self.pq = [q - f for q, f in zip(self.q, self.phi)]

    def integrate(self, values: Array) -> float:
        return float(np.dot(self.rule.weights, values))


@dataclass(frozen=True)
class EnergyReport:
    lambdas: tuple
    direct: float
    expansion: float
    residual: float
    terms_direct: dict
    terms_expansion: dict
    breakdown_gap: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "lambdas": list(self.lambdas),
                "direct": self.direct,
                "expansion": self.expansion,
                "residual": self.residual,
                "terms_direct": self.terms_direct,
                "terms_expansion": self.terms_expansion,
                "breakdown_gap": self.breakdown_gap,
            },
            sort_keys=True,
        )


def _check_separation(domain: DomainSpec, params: Sequence[BubbleParams], delta: float):
    inner = domain.delta if domain.kind == "annulus" else 0.0
    c = [p.xi_hat for p in params]
    for x in c:
        r = float(np.linalg.norm(x))
        if min(1.0 - r, r - inner) <= delta:
            raise ValueError("bubble center violates the boundary-separation constraint")
    if float(np.linalg.norm(c[0] - c[1])) <= delta:
        raise ValueError("bubble centers violate the mutual-separation constraint")


def pair_energy(pair: ProjectedPair, epsilon: float = 0.0) -> tuple[float, dict]:
    """J_eps of PQ_1 + PQ_2 via the integration-by-parts identities, with
    the per-term breakdown (self/interaction gradient, potentials)."""
    p = critical_exponent(pair.domain.n)
    q1, q2 = pair.q
    pq1, pq2 = pair.pq
    f1 = np.abs(q1) ** (p - 1.0) * q1
    f2 = np.abs(q2) ** (p - 1.0) * q2
    grad11 = pair.integrate(f1 * pq1)
    grad22 = pair.integrate(f2 * pq2)
    grad12 = pair.integrate(f1 * pq2)
    pe = p + 1.0 + epsilon
    pot1 = pair.integrate(np.abs(pq1) ** pe) / pe
    pot2 = pair.integrate(np.abs(pq2) ** pe) / pe
    pot_sum = pair.integrate(np.abs(pq1 + pq2) ** pe) / pe
    j = 0.5 * (grad11 + grad22) + grad12 - pot_sum
    terms = {
        "grad_self_1": grad11,
        "grad_self_2": grad22,
        "grad_cross": grad12,
        "pot_self_1": pot1,
        "pot_self_2": pot2,
        "pot_cross": pot_sum - pot1 - pot2,
    }
    return j, terms


def expansion_check_j0(
    domain: DomainSpec,
    template: Sequence[BubbleParams],
    base: TowerProfile,
    lambdas: Sequence[float],
    constants: Optional[ConstantSet] = None,
    provider: Optional[GreensProvider] = None,
    cfg: Optional[EnergyConfig] = None,
    separation: float = 0.05,
) -> list[EnergyReport]:
    """Direct J_0 of the projected pair versus its small-scale expansion,
    per scale: residual should be o(lambda^{n-2})."""
    n = domain.n
    _check_separation(domain, template, separation)
    constants = constants or constant_set(base, cfg)
    provider = provider or GreensProvider(domain)
    h11 = provider.robin(template[0].xi_hat)
    h22 = provider.robin(template[1].xi_hat)
    g12 = provider.green(template[0].xi_hat, template[1].xi_hat)
    qa = [float(base.field.evaluate(p.a_hat)) for p in template]
    m = (n - 2) / 2.0
    out = []
    for lam in lambdas:
        prms = [BubbleParams(lam, p.xi, p.a, p.theta) for p in template]
        pair = ProjectedPair(domain, prms, base, cfg)
        direct, terms = pair_energy(pair, 0.0)
        a_n = constants.alpha_n
        l1, l2 = prms[0].lam, prms[1].lam
        expansion = (
            2.0 * constants.gamma_n
            + a_n * h11 * qa[0] ** 2 * l1 ** (n - 2)
            + a_n * h22 * qa[1] ** 2 * l2 ** (n - 2)
            - 2.0 * a_n * g12 * qa[0] * qa[1] * (l1 * l2) ** m
        )
        p = critical_exponent(n)
        terms_exp = {
            "grad_self_1": constants.int_grad - 2 * a_n * h11 * qa[0] ** 2 * l1 ** (n - 2),
            "grad_self_2": constants.int_grad - 2 * a_n * h22 * qa[1] ** 2 * l2 ** (n - 2),
            "grad_cross": 2 * a_n * g12 * qa[0] * qa[1] * (l1 * l2) ** m,
            "pot_self_1": constants.chi_n - 2 * a_n * h11 * qa[0] ** 2 * l1 ** (n - 2),
            "pot_self_2": constants.chi_n - 2 * a_n * h22 * qa[1] ** 2 * l2 ** (n - 2),
            "pot_cross": (p + 1.0) * 4 * a_n * g12 * qa[0] * qa[1] * (l1 * l2) ** m / (p + 1.0),
        }
        # the decomposition J0 = sum_i (grad_ii/2 - pot_i) + grad_12 - cross
        recombined = (
            0.5 * (terms["grad_self_1"] + terms["grad_self_2"])
            + terms["grad_cross"]
            - (terms["pot_self_1"] + terms["pot_self_2"] + terms["pot_cross"])
        )
        out.append(
            EnergyReport(
                lambdas=(l1, l2),
                direct=direct,
                expansion=float(expansion),
                residual=float(direct - expansion),
                terms_direct=terms,
                terms_expansion=terms_exp,
                breakdown_gap=abs(recombined - direct) / max(abs(direct), 1e-30),
            )
        )
    return out


def alpha_consistency(
    domain: DomainSpec,
    base: TowerProfile,
    lambdas: Sequence[float],
    xi: Optional[Array] = None,
    cfg: Optional[EnergyConfig] = None,
    provider: Optional[GreensProvider] = None,
) -> list[float]:
    """Ratio of the measured boundary-correction integral
    integral |Q|^{p-1} Q phi  to its predicted leading term
    2 alpha_n H Q(a)^2 lambda^{n-2}; tends to 1 as lambda -> 0."""
    from .family import RotationChart

    n = domain.n
    cfg = cfg or EnergyConfig(n)
    provider = provider or GreensProvider(domain)
    if xi is None:
        xi = np.zeros(n)
        xi[0] = 0.3
    xi = np.asarray(xi, float)
    h = provider.robin(xi)
    p = critical_exponent(n)
    out = []
    for lam in lambdas:
        prm = BubbleParams(lam, xi, np.zeros(2), RotationChart.identity(n))
        qa = float(base.field.evaluate(prm.a_hat))
        fld = q_family_field(prm, base.field)
        rule = _pair_rule(domain, [xi], [lam], cfg)
        q = fld.values(rule.points)
        phi = meshfree_harmonic_extension(domain, fld.values, rule.points, lmax=cfg.lmax)
        val = float(np.dot(rule.weights, np.abs(q) ** (p - 1.0) * q * phi))
        predicted = (newton_constant(n) ** -2) * h * qa * qa * lam ** (n - 2)
        out.append(val / predicted)
    return out


def psi_formula(h11: float, h22: float, g12: float, q1: float, q2: float,
                l1: float, l2: float) -> float:
    """Reduced two-bubble interaction: (1/2) H_ii Q_i^2 L_i^2 terms minus
    the G cross term, plus log(L1 L2)."""
    return (
        0.5 * h11 * q1 * q1 * l1 * l1
        + 0.5 * h22 * q2 * q2 * l2 * l2
        - g12 * q1 * q2 * l1 * l2
        + math.log(l1 * l2)
    )


@dataclass(frozen=True)
class EpsExpansionReport:
    epsilons: tuple
    direct: tuple
    expansion: tuple
    residual_over_eps: tuple
    fitted_eps_log_coeff: float
    chi_n: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "epsilons": list(self.epsilons),
                "direct": list(self.direct),
                "expansion": list(self.expansion),
                "residual_over_eps": list(self.residual_over_eps),
                "fitted_eps_log_coeff": self.fitted_eps_log_coeff,
                "chi_n": self.chi_n,
            },
            sort_keys=True,
        )


def lambda_from_eps(n: int, beta_n: float, big_lambda: float, epsilon: float) -> float:
    """Scale coupling lambda^{n-2} = beta_n Lambda^2 eps."""
    return (beta_n * big_lambda**2 * epsilon) ** (1.0 / (n - 2))


def expansion_check_jeps(
    domain: DomainSpec,
    template: Sequence[BubbleParams],
    base: TowerProfile,
    epsilons: Sequence[float],
    big_lambdas: tuple[float, float] = (1.0, 1.0),
    constants: Optional[ConstantSet] = None,
    provider: Optional[GreensProvider] = None,
    cfg: Optional[EnergyConfig] = None,
) -> EpsExpansionReport:
    """Direct J_eps with eps-slaved scales versus the eps-expansion
    2 gamma_n + chi_n eps log eps + eta_n eps + eps (int |Q|^{p+1}/n) Psi."""
    n = domain.n
    constants = constants or constant_set(base, cfg)
    provider = provider or GreensProvider(domain)
    h11 = provider.robin(template[0].xi_hat)
    h22 = provider.robin(template[1].xi_hat)
    g12 = provider.green(template[0].xi_hat, template[1].xi_hat)
    qa = [float(base.field.evaluate(p.a_hat)) for p in template]
    psi = psi_formula(h11, h22, g12, qa[0], qa[1], *big_lambdas)
    direct, expan = [], []
    for eps in epsilons:
        lams = [lambda_from_eps(n, constants.beta_n, bl, eps) for bl in big_lambdas]
        prms = [
            BubbleParams(lam, p.xi, p.a, p.theta) for lam, p in zip(lams, template)
        ]
        pair = ProjectedPair(domain, prms, base, cfg)
        j, _ = pair_energy(pair, eps)
        direct.append(j)
        expan.append(
            2.0 * constants.gamma_n
            + constants.chi_n * eps * math.log(eps)
            + constants.eta_n * eps
            + eps * constants.int_qp1 / n * psi
        )
    res = [abs(d - e) / eps for d, e, eps in zip(direct, expan, epsilons)]
    # separate the eps*log(eps) coefficient from the direct values alone
    e = np.asarray(epsilons, float)
    design = np.stack([np.ones_like(e), e * np.log(e), e], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.asarray(direct), rcond=None)
    return EpsExpansionReport(
        epsilons=tuple(epsilons),
        direct=tuple(direct),
        expansion=tuple(expan),
        residual_over_eps=tuple(res),
        fitted_eps_log_coeff=float(coef[1]),
        chi_n=constants.chi_n,
    )
