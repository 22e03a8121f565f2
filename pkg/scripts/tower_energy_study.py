#!/usr/bin/env python3
"""Energy-per-spike and error-norm scaling study across ring sizes.

Prints, for each configuration, the whole-space free energy divided by the
number of concentration sites and the weighted norm of the profile's
equation residual, together with the per-doubling decay ratios.
"""

import argparse

import numpy as np

from towerlab.fields import TowerConfig, build_tower, tower_residual, weighted_norm


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4, choices=(3, 4, 5))
    ap.add_argument("--ks", type=str, default="8,16,32")
    ap.add_argument("--q", type=float, default=3.0)
    args = ap.parse_args()

    ks = [int(tok) for tok in args.ks.split(",")]
    per, norms = {}, {}
    for k in ks:
        profile = build_tower(TowerConfig(args.n, k))
        from towerlab.energy import whole_space_energy

        per[k] = whole_space_energy(profile) / (k + 1)
        norms[k] = weighted_norm(tower_residual(profile), "Lq", q=args.q,
                                 spikes=profile.spikes, core=profile.mu)
        print(f"k={k:3d}  mu={profile.mu:.6f}  energy/site={per[k]:.6f}  "
              f"residual norm={norms[k]:.4f}")
    for a, b in zip(ks, ks[1:]):
        print(f"k {a} -> {b}:  energy/site ratio {per[b] / per[a]:.4f},  "
              f"residual ratio {norms[b] / norms[a]:.4f} "
              f"(pure power target {2 ** (1 - args.n / args.q):.4f})")


if __name__ == "__main__":
    main()
