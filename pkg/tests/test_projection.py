import numpy as np
import pytest

from towerlab.family import BubbleParams, RotationChart
from towerlab.fields import TowerConfig, build_tower
from towerlab.greens import DomainSpec
from towerlab.grids import GridField
from towerlab.projection import (
    get_grid,
    harmonic_extension,
    meshfree_harmonic_extension,
    newton_refine,
    nonlinear_residual,
    project_bubble,
)


def _params(lam=0.1, xi=(0.3, 0.0, 0.0)):
    return BubbleParams(lam, np.asarray(xi, float), np.zeros(2),
                        RotationChart.identity(3))


def test_meshfree_extension_matches_harmonic_function(bubble_n3):
    # boundary trace of the harmonic function x*y extends to itself
    dom = DomainSpec("ball", 3)

    def trace(p):
        p = np.atleast_2d(p)
        return p[:, 0] * p[:, 1]

    pts = np.array([[0.2, 0.3, 0.1], [-0.5, 0.1, 0.0], [0.0, 0.4, -0.4]])
    vals = meshfree_harmonic_extension(dom, trace, pts)
    assert np.max(np.abs(vals - pts[:, 0] * pts[:, 1])) < 1e-8


def test_meshfree_matches_grid_backend(bubble_n3):
    dom = DomainSpec("ball", 3)
    params = _params()
    qa = bubble_n3.field
    from towerlab.family import q_family_field

    member = q_family_field(params, qa)
    pts = np.array([[0.0, 0.0, 0.5], [-0.3, -0.3, 0.0]])
    mesh = meshfree_harmonic_extension(dom, member.values, pts)
    fld = harmonic_extension(dom, member, resolution=64)
    assert np.max(np.abs(mesh - fld.interpolate(pts))) < 5e-4


def test_projection_vanishes_on_boundary(bubble_n3):
    dom = DomainSpec("ball", 3)
    proj = project_bubble(dom, _params(), bubble_n3, resolution=64)
    grid = get_grid(dom, 64)
    trace = proj.PQ_A.interpolate(grid.boundary_points[::50])
    peak = float(np.max(np.abs(proj.PQ_A.values)))
    assert np.max(np.abs(trace)) < 0.05 * peak


def test_nonlinear_residual_zero_field():
    dom = DomainSpec("ball", 3)
    grid = get_grid(dom, 32)
    zero = grid.field_from_solution(np.zeros(grid.num_unknowns), 0.0)
    rep = nonlinear_residual(dom, zero, 0.0, resolution=32)
    assert rep.l2 == 0.0 and rep.max == 0.0


def test_newton_converges_from_near_solution():
    # start Newton from the exact solution of -Lap u = 1 perturbed slightly;
    # with the pure power nonlinearity replaced by the field itself this is
    # a smoke test of the damped iteration machinery
    dom = DomainSpec("ball", 3)
    grid = get_grid(dom, 32)
    u0 = grid.field_from_solution(np.zeros(grid.num_unknowns) + 1e-3, 0.0)
    refined, trace = newton_refine(dom, u0, 0.0, resolution=32)
    assert trace.residual_norms[-1] <= trace.residual_norms[0]
    assert not trace.diverged
