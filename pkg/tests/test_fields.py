import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerlab.fields import (
    TowerConfig,
    bubble_radial_laplacian,
    build_tower,
    critical_exponent,
    green_representation_check,
    solve_mu,
    spike_points,
    standard_bubble,
    tower_residual,
)


def test_scale_factor_matches_closed_form():
    # n = 4, k = 8: the ring sum telescopes to the rational value 2/21
    assert solve_mu(TowerConfig(4, 8)) == pytest.approx(2.0 / 21.0, abs=1e-12)


@pytest.mark.parametrize(
    "n,k,center",
    [(4, 8, 0.6734350297), (3, 8, -0.0110552119), (3, 16, 0.3071375986)],
)
def test_profile_center_values(n, k, center):
    profile = build_tower(TowerConfig(n, k))
    assert float(profile.field.evaluate(np.zeros(n))) == pytest.approx(
        center, abs=5e-6
    )


def test_bubble_solves_its_equation(rng):
    # -Laplacian U = U^p pointwise for the radial profile
    for n in (3, 4, 5):
        u = standard_bubble(n)
        r = rng.uniform(0.05, 4.0, 60)
        pts = np.zeros((60, n))
        pts[:, 0] = r
        lhs = -bubble_radial_laplacian(n, r)
        rhs = u.values(pts) ** critical_exponent(n)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_spike_points_lie_on_shrinking_ring():
    cfg = TowerConfig(3, 8)
    mu = solve_mu(cfg)
    pts = spike_points(cfg, mu)
    radii = np.linalg.norm(pts, axis=1)
    assert pts.shape == (8, 3)
    assert np.allclose(radii, radii[0])
    assert np.allclose(pts[:, 2], 0.0)


def test_tower_kelvin_invariance(tower_n3_k8, rng):
    pts = rng.standard_normal((50, 3))
    pts *= rng.uniform(0.3, 2.0, 50)[:, None] / np.linalg.norm(pts, axis=1)[:, None]
    r2 = np.sum(pts * pts, axis=1)
    kelvin = r2 ** (-0.5) * tower_n3_k8.field.values(pts / r2[:, None])
    assert np.max(np.abs(kelvin - tower_n3_k8.field.values(pts))) < 1e-12


@settings(max_examples=20, deadline=None)
@given(angle=st.floats(-3.0, 3.0), radius=st.floats(0.2, 2.0))
def test_tower_is_ring_symmetric(angle, radius):
    profile = _CACHED.setdefault("t38", build_tower(TowerConfig(3, 8)))
    k = profile.k
    snapped = 2.0 * np.pi * round(angle) / k
    x = np.array([radius * np.cos(0.3), radius * np.sin(0.3), 0.1])
    rot = np.array(
        [
            [np.cos(snapped), -np.sin(snapped), 0.0],
            [np.sin(snapped), np.cos(snapped), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    assert float(profile.field.evaluate(rot @ x)) == pytest.approx(
        float(profile.field.evaluate(x)), abs=1e-12
    )


_CACHED: dict = {}


def test_residual_field_decays(tower_n3_k8):
    res = tower_residual(tower_n3_k8)
    near = abs(float(res.evaluate(np.array([0.5, 0.0, 0.0]))))
    far = abs(float(res.evaluate(np.array([40.0, 0.0, 0.0]))))
    assert far < near


def test_newton_potential_representation(tower_n3_k8):
    err = green_representation_check(tower_n3_k8, np.array([0.7, 0.2, 0.1]))
    assert err < 1e-3
