import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerlab.family import (
    BubbleParams,
    RotationChart,
    plane_rotation,
    q_family,
    q_family_field,
    rotation_matrix,
)
from towerlab.fields import TowerConfig, build_tower

_BASE: dict = {}


def _bubble(n=3):
    key = f"b{n}"
    if key not in _BASE:
        _BASE[key] = build_tower(TowerConfig(n, 0)).field
    return _BASE[key]


def test_chart_angle_count():
    for n in (3, 4, 5):
        chart = RotationChart.identity(n)
        assert chart.dimension == n
        assert len(chart.theta) == 2 * n - 3
        assert np.all(chart.theta == 0.0)


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(-3.0, 3.0))
def test_plane_rotation_is_orthogonal(angle):
    r = plane_rotation(4, 0, 2, angle)
    assert np.allclose(r @ r.T, np.eye(4), atol=1e-14)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


def test_identity_parameters_reproduce_base(rng):
    base = _bubble()
    params = BubbleParams(1.0, np.zeros(3), np.zeros(2), RotationChart.identity(3))
    pts = rng.standard_normal((100, 3))
    assert np.max(np.abs(q_family(params, base, pts) - base.values(pts))) < 1e-12


def test_family_scaling_covariance(rng):
    # member at scale lam is the lam-zoom of the identity member
    base = _bubble()
    lam = 0.25
    params = BubbleParams(lam, np.zeros(3), np.zeros(2), RotationChart.identity(3))
    pts = rng.standard_normal((50, 3)) * 0.3
    direct = q_family(params, base, pts)
    zoomed = lam ** (-0.5) * base.values(pts / lam)
    assert np.max(np.abs(direct - zoomed)) < 1e-12


def test_translation_moves_the_peak():
    base = _bubble()
    xi = np.array([0.4, -0.1, 0.2])
    params = BubbleParams(0.1, xi, np.zeros(2), RotationChart.identity(3))
    fld = q_family_field(params, base)
    at_center = float(fld.evaluate(params.xi_hat))
    away = float(fld.evaluate(params.xi_hat + np.array([0.5, 0.0, 0.0])))
    assert at_center > away


def test_rotation_matrix_identity_chart():
    for n in (3, 4, 5):
        assert np.allclose(rotation_matrix(RotationChart.identity(n)), np.eye(n))


def test_gradient_matches_finite_differences(rng):
    base = _bubble()
    pts = rng.standard_normal((20, 3))
    grad = base.gradient(pts)
    h = 1e-6
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        fd = (base.values(pts + step) - base.values(pts - step)) / (2 * h)
        assert np.max(np.abs(fd - grad[:, axis])) < 1e-6
