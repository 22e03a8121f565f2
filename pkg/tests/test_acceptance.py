"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Each test exercises the stated configuration at the stated tolerance; a
failing line reports the measured values so the gap is visible without
re-running.
"""

import json
import os

import numpy as np
import pytest

from towerlab.energy import (
    EnergyConfig,
    constant_set,
    expansion_check_j0,
    expansion_check_jeps,
    whole_space_energy,
)
from towerlab.family import BubbleParams, RotationChart, q_family
from towerlab.fields import TowerConfig, build_tower, tower_residual, weighted_norm
from towerlab.greens import DomainSpec, GreensProvider, check_hole_criterion, phi_pair
from towerlab.kernel import (
    build_kernel_basis,
    derivative_identity_residual,
    kernel_function,
)
from towerlab.projection import expansion_order_fit, newton_refine
from towerlab.reduced import assemble_ansatz, level_bracket, saddle_search


def _report(capsys, num: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _ball_pair(n: int, sep: float = 0.3) -> list:
    xi = np.zeros(n)
    xi[0] = sep
    ident = RotationChart.identity(n)
    return [
        BubbleParams(1.0, xi, np.zeros(2), ident),
        BubbleParams(1.0, -xi, np.zeros(2), ident),
    ]


def test_criterion_01_exact_identities(capsys, tower_n3_k8, tower_n4_k8, bubble_n3):
    worst = 0.0
    for profile in (tower_n3_k8, tower_n4_k8):
        n, k = profile.n, profile.k
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((100, n))
        pts *= rng.uniform(0.3, 2.5, 100)[:, None] / np.linalg.norm(pts, axis=1)[:, None]
        vals = profile.field.values(pts)
        # inversion through the unit sphere maps the profile to itself
        r2 = np.sum(pts * pts, axis=1)
        kelvin = r2 ** ((2 - n) / 2.0) * profile.field.values(pts / r2[:, None])
        worst = max(worst, float(np.max(np.abs(kelvin - vals))))
        # discrete ring rotation and coordinate reflections
        th = 2.0 * np.pi / k
        rot = np.eye(n)
        rot[:2, :2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
        worst = max(worst, float(np.max(np.abs(profile.field.values(pts @ rot.T) - vals))))
        for axis in range(1, n):
            refl = pts.copy()
            refl[:, axis] *= -1.0
            worst = max(worst, float(np.max(np.abs(profile.field.values(refl) - vals))))
    # the family at identity parameters reproduces the base profile
    rng = np.random.default_rng(3)
    pts3 = rng.standard_normal((100, 3))
    ident = BubbleParams(1.0, np.zeros(3), np.zeros(2), RotationChart.identity(3))
    fam = q_family(ident, bubble_n3.field, pts3)
    worst = max(worst, float(np.max(np.abs(fam - bubble_n3.field.values(pts3)))))
    _report(capsys, 1, worst < 1e-12, f"max identity residual {worst:.3e} (tol 1e-12)")


def test_criterion_02_kernel_derivative_identities(capsys, tower_n3_k8, tower_n4_k8):
    worst_rel, ratios = 0.0, []
    for profile in (tower_n3_k8, tower_n4_k8):
        n = profile.n
        basis = build_kernel_basis(profile)
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((50, n))
        for alpha in range(3 * n):
            for x in pts:
                z = abs(kernel_function(basis, alpha, x))
                res = derivative_identity_residual(basis, alpha, x, h=1e-4)
                worst_rel = max(worst_rel, res / (1.0 + z))
                if res > 1e-10:
                    ratios.append(
                        derivative_identity_residual(basis, alpha, x, h=2e-4) / res
                    )
    ratio = float(np.median(ratios))
    ok = worst_rel < 1e-5 and 3.2 <= ratio <= 4.8
    _report(capsys, 2, ok,
            f"max relative residual {worst_rel:.3e} (tol 1e-5), "
            f"Richardson ratio {ratio:.3f} (4 +- 20%)")


def test_criterion_03_quadrature_calibration_gate(capsys):
    gates = {}
    for n in (3, 4, 5):
        cs = constant_set(build_tower(TowerConfig(n, 0)), EnergyConfig(n))
        gates[n] = abs(cs.int_grad - cs.int_qp1) / cs.int_qp1
    worst = max(gates.values())
    _report(capsys, 3, worst < 1e-4,
            f"gradient/potential mismatch {gates} (tol 1e-4)")


def test_criterion_04_energy_per_spike(capsys):
    per = {}
    for k in (8, 16, 32):
        profile = build_tower(TowerConfig(4, k))
        per[k] = whole_space_energy(profile) / (k + 1)
    vals = np.array(list(per.values()))
    spread = float(np.max(np.abs(vals - vals.mean())) / vals.mean())
    _report(capsys, 4, spread < 0.10,
            f"energy per spike {per}, max deviation from mean {spread:.3%} (tol 10%)")


def test_criterion_05_error_norm_scaling(capsys):
    norms = {}
    for k in (8, 16, 32):
        profile = build_tower(TowerConfig(4, k))
        norms[k] = weighted_norm(tower_residual(profile), "Lq", q=3.0,
                                 spikes=profile.spikes, core=profile.mu)
    target = 2.0 ** (-1.0 / 3.0)
    ratios = [norms[16] / norms[8], norms[32] / norms[16]]
    ok = all(abs(r - target) / target < 0.30 for r in ratios)
    _report(capsys, 5, ok,
            f"per-doubling ratios {[f'{r:.3f}' for r in ratios]} "
            f"vs {target:.3f} (tol 30%)")


def test_criterion_06_greens_oracles(capsys, tmp_path):
    from towerlab.cli import DEFAULTS, cmd_greens_check

    cfg = json.loads(json.dumps(DEFAULTS))
    cfg["domain"]["grid"] = 96
    summary, failures = cmd_greens_check(cfg, str(tmp_path))
    _report(capsys, 6, not failures,
            f"ball rel err {summary['ball_closed_vs_grid_rel_err']:.3e}, "
            f"annulus rel err {summary['annulus_series_vs_grid_rel_err']:.3e} "
            f"(tol 1e-2), shrinking-annulus gaps monotone: "
            f"{summary['annulus_to_ball_monotone']}")


def test_criterion_07_projection_expansion_order(capsys, bubble_n3):
    xi = np.array([0.3, 0.0, 0.0])
    template = BubbleParams(1.0, xi, np.zeros(2), RotationChart.identity(3))
    fit = expansion_order_fit(DomainSpec("ball", 3), template, bubble_n3,
                              [0.2, 0.1, 0.05, 0.025], route="meshfree")
    ok = fit.slope >= 1.2 and fit.coefficient_rel_err < 0.10
    _report(capsys, 7, ok,
            f"decay slope {fit.slope:.3f} (>= 1.2), leading coefficient "
            f"rel err {fit.coefficient_rel_err:.3e} (tol 10%)")


def test_criterion_08_pair_energy_expansion(capsys, bubble_n3):
    dom = DomainSpec("ball", 3)
    lambdas = [0.1, 0.05, 0.025]
    reports = expansion_check_j0(dom, _ball_pair(3), bubble_n3, lambdas)
    scaled = [r.residual / r.lambdas[0] for r in reports]
    ratios = [scaled[i] / scaled[i + 1] for i in range(len(scaled) - 1)]
    cross_err = max(
        abs(r.terms_direct["grad_cross"] - r.terms_expansion["grad_cross"])
        / abs(r.terms_expansion["grad_cross"])
        for r in reports
    )
    ok = all(r >= 2.0 for r in ratios) and cross_err < 0.15
    _report(capsys, 8, ok,
            f"residual/scale halving ratios {[f'{r:.3f}' for r in ratios]} "
            f"(>= 2), interaction term rel err {cross_err:.3%} (tol 15%)")


def test_criterion_09_eps_energy_expansion(capsys, bubble_n3):
    dom = DomainSpec("ball", 3)
    report = expansion_check_jeps(dom, _ball_pair(3), bubble_n3,
                                  [0.02, 0.01, 0.005])
    seq = list(report.residual_over_eps)
    monotone = all(a > b for a, b in zip(seq, seq[1:]))
    coeff_err = abs(report.fitted_eps_log_coeff - report.chi_n) / report.chi_n
    ok = monotone and coeff_err < 0.20
    _report(capsys, 9, ok,
            f"residual/eps {[f'{v:.4f}' for v in seq]} monotone: {monotone}, "
            f"eps*log(eps) coefficient rel err {coeff_err:.3%} (tol 20%)")


def test_criterion_10_interaction_sign(capsys, ball_provider):
    ann = GreensProvider(DomainSpec("annulus", 3, delta=0.05))
    hole = check_hole_criterion(ann, sigma=0.1, samples=200, seed=0)
    ball = check_hole_criterion(ball_provider, sigma=0.5, samples=200, seed=0)
    x = np.array([0.5, 0.0, 0.0])
    antipodal = phi_pair(ball_provider, x, -x)
    ball_ok = (not ball.all_negative) and abs(antipodal - 0.090187) < 1e-4
    ok = hole.all_negative and ball_ok
    _report(capsys, 10, ok,
            f"annulus(0.05) all-negative: {hole.all_negative} "
            f"(negative fraction {hole.fraction_negative:.3f}), ball control "
            f"positive values: {not ball.all_negative}, antipodal value "
            f"{antipodal:+.6f} (expected +0.090187)")


def test_criterion_11_minmax_saddle(capsys, tower_n3_k16, annulus_provider):
    bracket = level_bracket(annulus_provider, tower_n3_k16, sigma=0.1,
                            pair_samples=24)
    result = saddle_search(annulus_provider, tower_n3_k16, bracket=bracket,
                           seeds=10)
    seeds = np.array(result.seed_psi_values)
    spread = float(seeds.max() - seeds.min()) if seeds.size else float("inf")
    ok = (bracket.ok and result.converged and result.in_bracket
          and result.signature_ok and seeds.size == 10 and spread < 1e-4)
    _report(capsys, 11, ok,
            f"bracket [{bracket.a:.4f}, {bracket.b:.4f}] ok: {bracket.ok}, "
            f"grad norm {result.grad_norm:.3e} (< 1e-6), level "
            f"{result.psi_value:.6f} in bracket: {result.in_bracket}, "
            f"signature: {result.signature_ok}, seed spread {spread:.3e}")


def test_criterion_12_end_to_end_assembly(capsys, tower_n3_k8, annulus_provider):
    dom = annulus_provider.domain
    result = saddle_search(annulus_provider, tower_n3_k8, sigma=0.1, seeds=3)
    reports = {}
    for eps in (0.04, 0.02, 0.01):
        reports[eps] = assemble_ansatz(dom, tower_n3_k8, result, eps,
                                       resolution=96)[1]
    main = reports[0.02]
    res_seq = [reports[eps].residual.l2 for eps in (0.04, 0.02, 0.01)]
    decreasing = all(a > b for a, b in zip(res_seq, res_seq[1:]))
    u64, _ = assemble_ansatz(dom, tower_n3_k8, result, 0.04, resolution=64)
    _, trace = newton_refine(dom, u64, 0.04, resolution=64)
    reduction = trace.residual_norms[0] / max(trace.residual_norms[-1], 1e-300)
    refine_ok = reduction >= 10.0 and len(trace.residual_norms) - 1 <= 10
    ok = (main.sign_changing and main.energy_rel_gap < 0.25 and decreasing
          and refine_ok)
    _report(capsys, 12, ok,
            f"sign-changing: {main.sign_changing}, energy {main.energy:.3f} vs "
            f"{main.target_energy:.3f} (gap {main.energy_rel_gap:.3f}, tol 25%), "
            f"residuals over halving eps {[f'{v:.4g}' for v in res_seq]} "
            f"decreasing: {decreasing}, refinement reduction {reduction:.3g}x "
            f"in {len(trace.residual_norms) - 1} iterations: {refine_ok}")


def test_criterion_13_determinism(capsys, tmp_path):
    from towerlab.cli import main

    cfg = {
        "dimension": 3,
        "tower": {"k": 16},
        "domain": {"kind": "annulus", "delta": 0.01, "grid": 32},
        "epsilon-sequence": [0.08],
        "search": {"sigma": 0.1, "seeds": 1},
        "rng-seed": 3,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for run in ("one", "two"):
        out = tmp_path / run
        main(["all", "--config", str(cfg_path), "--output-dir", str(out)])
        blobs.append((out / "summary.json").read_bytes())
    ok = blobs[0] == blobs[1]
    _report(capsys, 13, ok,
            f"two identical runs: summaries byte-identical: {ok} "
            f"({len(blobs[0])} bytes)")
