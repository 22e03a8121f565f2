"""Batch driver: every verification and the end-to-end pipeline as
subcommands with reproducible JSON-configured runs.

Output layout: ``<output-dir>/summary.json`` (sorted keys, no timestamps),
``effective-config.json``, ``data/*.csv``, ``fields/*.bin``.  Identical
configuration and seed produce byte-identical summaries; the worker-count
field is recorded but every reduction is sequential and deterministic.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from .energy import EnergyConfig, constant_set
from .family import BubbleParams, RotationChart
from .fields import TowerConfig, build_tower
from .greens import DomainSpec, GreensProvider, check_hole_criterion, phi_pair
from .kernel import build_kernel_basis, derivative_identity_residual, kernel_function
from .projection import expansion_order_fit, newton_refine
from .reduced import assemble_ansatz, level_bracket, saddle_search

DEFAULTS: dict = {
    "dimension": 3,
    "tower": {"k": 8},
    "domain": {"kind": "ball", "delta": 0.0, "grid": 96},
    "quadrature": {"nr": 32, "ring": 96, "polar": 24},
    "epsilon-sequence": [0.04, 0.02, 0.01],
    "lambda-sequence": [0.2, 0.1, 0.05, 0.025],
    "search": {"sigma": 0.1, "R": 10.0, "symmetry": True, "seeds": 10},
    "output-dir": "towerlab-out",
    "rng-seed": 0,
    "workers": 0,
}

# convenience flags -> dotted config paths
ALIASES = {
    "n": "dimension",
    "k": "tower.k",
    "delta": "domain.delta",
    "kind": "domain.kind",
    "grid": "domain.grid",
    "sigma": "search.sigma",
    "seeds": "search.seeds",
    "output-dir": "output-dir",
    "rng-seed": "rng-seed",
}

SUBCOMMANDS = [
    "build-tower",
    "verify-kernel",
    "greens-check",
    "projection-check",
    "energy-check",
    "hole-criterion",
    "landscape",
    "find-critical",
    "assemble",
    "all",
]


# ---------------------------------------------------------------------------
# configuration plumbing


def _get_dotted(tree: dict, path: str):
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KeyError(path)
        node = node[part]
    return node


def _set_dotted(tree: dict, path: str, raw: str) -> None:
    parts = path.split(".")
    node = tree
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise KeyError(path)
        node = node[part]
    if parts[-1] not in node:
        raise KeyError(path)
    node[parts[-1]] = _coerce(raw, node[parts[-1]])


def _coerce(raw: str, template):
    if isinstance(template, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, list):
        return [float(tok) for tok in raw.split(",") if tok]
    return raw


def _validate(cfg: dict, template: dict, prefix: str = "") -> None:
    for key, value in cfg.items():
        where = f"{prefix}{key}"
        if key not in template:
            raise ValueError(f"unknown config key: {where}")
        ref = template[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ValueError(f"{where} must be an object")
            _validate(value, ref, where + ".")
        elif isinstance(ref, bool):
            if not isinstance(value, bool):
                raise ValueError(f"{where} must be a boolean")
        elif isinstance(ref, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{where} must be a number")
        elif isinstance(ref, list):
            if not isinstance(value, list):
                raise ValueError(f"{where} must be a list")
        elif not isinstance(value, str):
            raise ValueError(f"{where} must be a string")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(argv: list[str]) -> tuple[str, dict]:
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        print("subcommands:", " | ".join(SUBCOMMANDS))
        print("options: --config FILE, plus --<dotted.path> VALUE overrides")
        print("aliases:", ", ".join(f"--{a}" for a in ALIASES))
        raise SystemExit(0)
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        raise SystemExit(f"unknown subcommand {sub!r}; choose from {SUBCOMMANDS}")
    cfg = copy.deepcopy(DEFAULTS)
    rest = list(argv[1:])
    # pass 1: config file
    if "--config" in rest:
        i = rest.index("--config")
        with open(rest[i + 1]) as fh:
            file_cfg = json.load(fh)
        _validate(file_cfg, DEFAULTS)
        cfg = _merge(cfg, file_cfg)
        del rest[i : i + 2]
    # pass 2: dotted/alias flag overrides
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or i + 1 >= len(rest):
            raise SystemExit(f"expected --flag value pairs, got {rest[i:]}")
        path = ALIASES.get(tok[2:], tok[2:])
        try:
            _set_dotted(cfg, path, rest[i + 1])
        except KeyError:
            raise SystemExit(f"unknown config path {tok[2:]!r}")
        i += 2
    env_out = os.environ.get("TOWERLAB_OUTPUT_DIR")
    if env_out:
        cfg["output-dir"] = env_out
    return sub, cfg


# ---------------------------------------------------------------------------
# small output helpers


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _domain(cfg: dict) -> DomainSpec:
    d = cfg["domain"]
    return DomainSpec(d["kind"], cfg["dimension"], float(d["delta"]), int(d["grid"]))


def _f(x) -> float:
    return float(x)


# ---------------------------------------------------------------------------
# subcommands: each returns (summary fragment, failure messages)


def cmd_build_tower(cfg: dict, out: str):
    n, k = cfg["dimension"], cfg["tower"]["k"]
    profile = build_tower(TowerConfig(n, k))
    rs = np.linspace(0.0, 3.0, 121)
    pts = np.zeros((rs.size, n))
    pts[:, 0] = rs
    vals = profile.field.values(pts)
    _write_csv(
        os.path.join(out, "data", "tower_profile.csv"),
        ["r", "value"],
        [[f"{r:.6f}", repr(float(v))] for r, v in zip(rs, vals)],
    )
    summary = {
        "n": n,
        "k": k,
        "mu": _f(profile.mu),
        "center_value": _f(profile.field.evaluate(np.zeros(n))),
        "spike_count": int(profile.spikes.shape[0]),
    }
    return summary, []


def cmd_verify_kernel(cfg: dict, out: str):
    n, k = cfg["dimension"], cfg["tower"]["k"]
    basis = build_kernel_basis(build_tower(TowerConfig(n, k)))
    rng = np.random.default_rng(cfg["rng-seed"])
    pts = rng.standard_normal((50, n))
    failures, rows = [], []
    worst_rel, ratios = 0.0, []
    for alpha in range(3 * n):
        for x in pts:
            z = abs(kernel_function(basis, alpha, x))
            res = derivative_identity_residual(basis, alpha, x, h=1e-4)
            res2 = derivative_identity_residual(basis, alpha, x, h=2e-4)
            rel = res / (1.0 + z)
            worst_rel = max(worst_rel, rel)
            if res > 1e-10:
                ratios.append(res2 / res)
            rows.append([alpha, repr(float(res)), repr(float(rel))])
    ratio_med = float(np.median(ratios)) if ratios else float("nan")
    if worst_rel >= 1e-5:
        failures.append(f"kernel identity residual {worst_rel:.3e} >= 1e-5")
    if not (0.8 * 4.0 <= ratio_med <= 1.2 * 4.0):
        failures.append(f"Richardson ratio {ratio_med:.3f} outside 4 +- 20%")
    _write_csv(os.path.join(out, "data", "kernel_residuals.csv"),
               ["alpha", "residual", "relative"], rows)
    return {
        "n": n,
        "k": k,
        "kernels": 3 * n,
        "max_identity_residual": worst_rel,
        "richardson_ratio_median": ratio_med,
    }, failures


def cmd_greens_check(cfg: dict, out: str):
    n = cfg["dimension"]
    grid = cfg["domain"]["grid"]
    failures, rows = [], []
    pairs = [
        (np.array([0.3, 0.1, 0.0][:n]), np.array([-0.2, 0.25, 0.1][:n])),
        (np.array([0.5, 0.0, 0.0][:n]), np.array([-0.5, 0.0, 0.0][:n])),
        (np.array([0.1, -0.4, 0.2][:n]), np.array([0.45, 0.1, -0.1][:n])),
    ]
    ball_cf = GreensProvider(DomainSpec("ball", n, 0.0, grid))
    ball_gr = GreensProvider(DomainSpec("ball", n, 0.0, grid), backend="grid")
    err_ball = max(
        abs(ball_cf.regular_part(x, y) - ball_gr.regular_part(x, y))
        / abs(ball_cf.regular_part(x, y))
        for x, y in pairs
    )
    rows.append(["ball-closed-vs-grid", repr(float(err_ball))])
    if err_ball >= 1e-2:
        failures.append(f"ball closed-form vs grid rel err {err_ball:.3e} >= 1e-2")
    delta = cfg["domain"]["delta"] if cfg["domain"]["kind"] == "annulus" else 0.3
    ann_se = GreensProvider(DomainSpec("annulus", n, delta, grid))
    ann_gr = GreensProvider(DomainSpec("annulus", n, delta, grid), backend="grid")
    ann_pairs = [(x, y) for x, y in pairs if np.linalg.norm(y) > delta + 0.05]
    err_ann = max(
        abs(ann_se.regular_part(x, y) - ann_gr.regular_part(x, y))
        / abs(ann_se.regular_part(x, y))
        for x, y in ann_pairs
    )
    rows.append(["annulus-series-vs-grid", repr(float(err_ann))])
    if err_ann >= 1e-2:
        failures.append(f"annulus series vs grid rel err {err_ann:.3e} >= 1e-2")
    # shrinking the inner radius must drive the annulus toward the ball
    probe = np.zeros(n)
    probe[0] = 0.5
    target = ball_cf.robin(probe)
    gaps = []
    for d in (0.3, 0.2, 0.1, 0.05):
        prv = GreensProvider(DomainSpec("annulus", n, d, grid))
        gap = abs(prv.robin(probe) - target)
        gaps.append(gap)
        rows.append([f"annulus-delta-{d}", repr(float(gap))])
    monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
    if not monotone:
        failures.append(f"annulus->ball robin gaps not monotone: {gaps}")
    _write_csv(os.path.join(out, "data", "greens_compare.csv"),
               ["check", "value"], rows)
    return {
        "ball_closed_vs_grid_rel_err": float(err_ball),
        "annulus_series_vs_grid_rel_err": float(err_ann),
        "annulus_to_ball_gaps": [float(g) for g in gaps],
        "annulus_to_ball_monotone": bool(monotone),
    }, failures


def cmd_projection_check(cfg: dict, out: str):
    n = cfg["dimension"]
    dom = _domain(cfg)
    base = build_tower(TowerConfig(n, 0))
    xi = np.zeros(n)
    xi[0] = 0.3
    template = BubbleParams(1.0, xi, np.zeros(2), RotationChart.identity(n))
    fit = expansion_order_fit(dom, template, base, cfg["lambda-sequence"],
                              route="meshfree")
    failures = []
    if fit.slope < 1.2:
        failures.append(f"expansion order slope {fit.slope:.3f} < 1.2")
    if fit.coefficient_rel_err >= 0.10:
        failures.append(
            f"leading coefficient rel err {fit.coefficient_rel_err:.3f} >= 0.10"
        )
    _write_csv(
        os.path.join(out, "data", "projection_fit.csv"),
        ["lambda", "residual"],
        [[repr(float(l)), repr(float(r))] for l, r in zip(fit.lambdas, fit.residuals)],
    )
    return {
        "slope": float(fit.slope),
        "coefficient_rel_err": float(fit.coefficient_rel_err),
        "lambdas": [float(l) for l in fit.lambdas],
        "residuals": [float(r) for r in fit.residuals],
    }, failures


def cmd_energy_check(cfg: dict, out: str):
    failures, rows, consts = [], [], {}
    for n in (3, 4, 5):
        cs = constant_set(build_tower(TowerConfig(n, 0)), EnergyConfig(n))
        gate = abs(cs.int_grad - cs.int_qp1) / cs.int_qp1
        if gate >= 1e-4:
            failures.append(f"calibration gate n={n}: rel err {gate:.3e} >= 1e-4")
        consts[str(n)] = {
            "gamma_n": cs.gamma_n,
            "alpha_n": cs.alpha_n,
            "beta_n": cs.beta_n,
            "chi_n": cs.chi_n,
            "eta_n": cs.eta_n,
            "s_n": cs.s_n,
            "calibration_rel_err": float(gate),
        }
        rows.append([n, repr(cs.int_grad), repr(cs.int_qp1), repr(float(gate))])
    _write_csv(os.path.join(out, "data", "energy_constants.csv"),
               ["n", "int_grad", "int_qp1", "rel_err"], rows)
    return {"constants": consts}, failures


def cmd_hole_criterion(cfg: dict, out: str):
    dom = _domain(cfg)
    provider = GreensProvider(dom)
    report = check_hole_criterion(
        provider, cfg["search"]["sigma"], samples=200, seed=cfg["rng-seed"]
    )
    failures = []
    if dom.kind == "annulus" and not report.all_negative:
        failures.append(
            f"interaction sign not uniformly negative on the annulus "
            f"(fraction {report.fraction_negative:.3f})"
        )
    if dom.kind == "ball" and report.all_negative:
        failures.append("expected some positive interaction values on the ball")
    summary = {
        "kind": dom.kind,
        "sigma": float(report.sigma),
        "samples": int(report.samples),
        "phi_min": float(report.phi_min),
        "phi_max": float(report.phi_max),
        "all_negative": bool(report.all_negative),
        "fraction_negative": float(report.fraction_negative),
    }
    return summary, failures


def cmd_landscape(cfg: dict, out: str):
    dom = _domain(cfg)
    provider = GreensProvider(dom)
    base = build_tower(TowerConfig(cfg["dimension"], cfg["tower"]["k"]))
    br = level_bracket(
        provider,
        base,
        sigma=cfg["search"]["sigma"],
        r_init=cfg["search"]["R"],
        seed=cfg["rng-seed"],
    )
    inner = dom.delta if dom.kind == "annulus" else 0.0
    rows = []
    for s in np.linspace(inner + 0.02, 0.5, 49):
        x = np.zeros(dom.n)
        x[0] = s
        rows.append([repr(float(s)), repr(float(phi_pair(provider, x, -x)))])
    _write_csv(os.path.join(out, "data", "landscape_phi.csv"),
               ["separation", "phi"], rows)
    failures = [] if br.hole_ok else ["level bracket needs a negative-interaction seed"]
    return json.loads(br.to_json()), failures


def cmd_find_critical(cfg: dict, out: str):
    dom = _domain(cfg)
    provider = GreensProvider(dom)
    base = build_tower(TowerConfig(cfg["dimension"], cfg["tower"]["k"]))
    res = saddle_search(
        provider,
        base,
        sigma=cfg["search"]["sigma"],
        symmetric=cfg["search"]["symmetry"],
        seeds=cfg["search"]["seeds"],
        seed=cfg["rng-seed"],
    )
    failures = []
    if not res.converged:
        failures.append(f"gradient norm {res.grad_norm:.3e} above tolerance")
    if not res.signature_ok:
        failures.append("critical point lacks the saddle signature")
    if not res.in_bracket:
        failures.append("critical level outside the bracket")
    _write_csv(
        os.path.join(out, "data", "critical_seeds.csv"),
        ["seed", "psi"],
        [[i, repr(float(v))] for i, v in enumerate(res.seed_psi_values)],
    )
    return json.loads(res.to_json()), failures


def cmd_assemble(cfg: dict, out: str):
    dom = _domain(cfg)
    provider = GreensProvider(dom)
    base = build_tower(TowerConfig(cfg["dimension"], cfg["tower"]["k"]))
    res = saddle_search(
        provider,
        base,
        sigma=cfg["search"]["sigma"],
        symmetric=cfg["search"]["symmetry"],
        seeds=min(3, cfg["search"]["seeds"]),
        seed=cfg["rng-seed"],
    )
    failures, reports, rows = [], {}, []
    prev = None
    for eps in cfg["epsilon-sequence"]:
        try:
            u, rep = assemble_ansatz(dom, base, res, eps,
                                     resolution=cfg["domain"]["grid"])
        except ValueError as exc:
            reports[repr(float(eps))] = {"error": str(exc)}
            failures.append(f"assembly at eps={eps}: {exc}")
            continue
        reports[repr(float(eps))] = json.loads(rep.to_json())
        rows.append([repr(float(eps)), repr(rep.residual.l2), repr(rep.energy)])
        if not rep.sign_changing:
            failures.append(f"assembled field at eps={eps} does not change sign")
        if rep.energy_rel_gap >= 0.25:
            failures.append(
                f"energy gap {rep.energy_rel_gap:.3f} >= 0.25 at eps={eps}"
            )
        if prev is not None and rep.residual.l2 >= prev:
            failures.append(f"nonlinear residual not decreasing at eps={eps}")
        prev = rep.residual.l2
        field_path = os.path.join(out, "fields", f"ansatz_eps_{eps:g}.bin")
        os.makedirs(os.path.dirname(field_path), exist_ok=True)
        u.save(field_path)
        if "refine" not in reports and cfg["domain"]["grid"] >= 64:
            u64, rep64 = assemble_ansatz(dom, base, res, eps, resolution=64)
            _, trace = newton_refine(dom, u64, eps, resolution=64)
            reports["refine"] = {
                "epsilon": float(eps),
                "residual_norms": [float(v) for v in trace.residual_norms],
                "reduction": float(trace.residual_norms[0]
                                   / max(trace.residual_norms[-1], 1e-300)),
                "converged": bool(trace.converged),
                "trivial_basin": bool(trace.trivial_basin),
            }
            if reports["refine"]["reduction"] < 10.0:
                failures.append("newton refinement reduced the residual < 10x")
    _write_csv(os.path.join(out, "data", "assembly_residuals.csv"),
               ["epsilon", "residual_l2", "energy"], rows)
    return reports, failures


COMMANDS = {
    "build-tower": cmd_build_tower,
    "verify-kernel": cmd_verify_kernel,
    "greens-check": cmd_greens_check,
    "projection-check": cmd_projection_check,
    "energy-check": cmd_energy_check,
    "hole-criterion": cmd_hole_criterion,
    "landscape": cmd_landscape,
    "find-critical": cmd_find_critical,
    "assemble": cmd_assemble,
}


def main(argv=None) -> int:
    sub, cfg = load_config(sys.argv[1:] if argv is None else list(argv))
    out = cfg["output-dir"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "effective-config.json"), "w") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=1)
    summary: dict = {}
    failures: list[str] = []
    names = list(COMMANDS) if sub == "all" else [sub]
    for name in names:
        try:
            fragment, fails = COMMANDS[name](cfg, out)
        except Exception as exc:  # keep partial output on hard errors
            fragment, fails = {"error": str(exc)}, [f"{name}: {exc}"]
        summary[name] = fragment
        failures.extend(f"{name}: {msg}" for msg in fails)
    summary["failures"] = failures
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
    print(json.dumps(summary, sort_keys=True, indent=1))
    return 0 if not failures else 1


if __name__ == "__main__":
    raise SystemExit(main())
