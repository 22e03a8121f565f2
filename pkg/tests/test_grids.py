import numpy as np
import pytest

from towerlab.grids import (
    GridField,
    build_domain_grid,
    harmonic_extension_grid,
    poisson_solve_grid,
)


def test_grid_field_roundtrip(tmp_path, rng):
    fld = GridField(np.array([-1.0, -1.0, -1.0]), 0.125, rng.standard_normal((9, 9, 9)))
    path = str(tmp_path / "field.bin")
    fld.save(path)
    back = GridField.load(path)
    assert back.spacing == fld.spacing
    assert np.array_equal(back.values, fld.values)
    assert np.array_equal(back.origin, fld.origin)


def test_trilinear_interpolation_exact_on_affine(rng):
    origin = np.array([-1.0, -1.0, -1.0])
    h = 0.25
    idx = np.arange(9)
    x, y, z = np.meshgrid(
        origin[0] + h * idx, origin[1] + h * idx, origin[2] + h * idx, indexing="ij"
    )
    fld = GridField(origin, h, 1.0 + 2.0 * x - 3.0 * y + 0.5 * z)
    pts = rng.uniform(-0.9, 0.9, (40, 3))
    expect = 1.0 + 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 0.5 * pts[:, 2]
    assert np.max(np.abs(fld.interpolate(pts) - expect)) < 1e-12


def test_harmonic_extension_reproduces_harmonic_polynomial():
    grid = build_domain_grid(0.0, resolution=48)

    def trace(p):
        return p[:, 0] * p[:, 1]  # harmonic

    fld, report = harmonic_extension_grid(grid, trace)
    assert report["converged"]
    pts = np.array([[0.2, 0.3, 0.0], [-0.4, 0.1, 0.2], [0.0, 0.0, 0.5]])
    assert np.max(np.abs(fld.interpolate(pts) - pts[:, 0] * pts[:, 1])) < 5e-4


def test_poisson_solve_matches_manufactured_solution():
    # u = (1 - |x|^2) / 6 solves -Laplacian u = 1 with zero boundary data
    grid = build_domain_grid(0.0, resolution=48)
    rhs = np.ones(grid.num_unknowns)
    fld, report = poisson_solve_grid(grid, rhs)
    assert report["converged"]
    pts = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.2, -0.3, 0.4]])
    expect = (1.0 - np.sum(pts * pts, axis=1)) / 6.0
    assert np.max(np.abs(fld.interpolate(pts) - expect)) < 5e-4


def test_annulus_grid_excludes_inner_hole():
    grid = build_domain_grid(0.3, resolution=32)
    node = grid.node_coords()
    radii = np.linalg.norm(node, axis=1).reshape(grid.interior.shape)
    assert not np.any(grid.interior & (radii < 0.28))
    assert not np.any(grid.interior & (radii > 1.0))
