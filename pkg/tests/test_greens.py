import numpy as np
import pytest

from towerlab.greens import (
    DomainSpec,
    GreensProvider,
    check_hole_criterion,
    gamma_fundamental,
    phi_pair,
)


def test_ball_robin_closed_form(ball_provider):
    # 1/(4 pi) * (1 - |x|^2)^{-1} at |x| = 0.5
    x = np.array([0.5, 0.0, 0.0])
    assert ball_provider.robin(x) == pytest.approx(0.1061032954, abs=1e-9)


def test_ball_antipodal_green_value(ball_provider):
    x = np.array([0.5, 0.0, 0.0])
    assert ball_provider.green(x, -x) == pytest.approx(0.0159154943, abs=1e-9)


def test_ball_antipodal_interaction_sign(ball_provider):
    x = np.array([0.5, 0.0, 0.0])
    assert phi_pair(ball_provider, x, -x) == pytest.approx(0.090187, abs=1e-5)


def test_green_symmetry_and_positivity(annulus_provider, rng):
    for _ in range(5):
        x = rng.uniform(-0.4, 0.4, 3)
        y = rng.uniform(-0.4, 0.4, 3)
        if np.linalg.norm(x) < 0.05 or np.linalg.norm(y) < 0.05:
            continue
        if np.linalg.norm(x - y) < 0.05:
            continue
        g_xy = annulus_provider.green(x, y)
        g_yx = annulus_provider.green(y, x)
        assert g_xy == pytest.approx(g_yx, rel=1e-8)
        assert g_xy > 0


def test_green_vanishes_toward_boundary(ball_provider):
    y = np.array([0.2, 0.0, 0.0])
    values = [
        ball_provider.green(np.array([r, 0.1, 0.0]), y) for r in (0.6, 0.8, 0.95)
    ]
    assert values[0] > values[1] > values[2] > 0


def test_fundamental_solution_normalization():
    x = np.array([0.25, 0.0, 0.0])
    assert gamma_fundamental(x, 3) == pytest.approx(1.0 / (4 * np.pi * 0.25), rel=1e-12)


def test_diagonal_rejected(ball_provider):
    x = np.array([0.3, 0.0, 0.0])
    with pytest.raises(ValueError):
        ball_provider.green(x, x)


def test_hole_criterion_annulus_vs_ball(annulus_provider, ball_provider):
    narrow = check_hole_criterion(annulus_provider, sigma=0.1, samples=50, seed=0)
    # on the ball, well-separated pairs at mid radius see a positive value
    ball = check_hole_criterion(ball_provider, sigma=0.5, samples=50, seed=0)
    assert narrow.all_negative
    assert not ball.all_negative
    assert 0.0 <= narrow.fraction_negative <= 1.0
