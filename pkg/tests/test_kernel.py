import numpy as np
import pytest

from towerlab.fields import TowerConfig, build_tower
from towerlab.kernel import (
    build_kernel_basis,
    derivative_identity_residual,
    gram_matrix,
    kernel_function,
)


def test_basis_size_and_dimension(tower_n3_k8):
    basis = build_kernel_basis(tower_n3_k8)
    assert basis.dimension == 3
    assert len(basis.members) == 9


def test_derivative_identities_spot_check(tower_n3_k8, rng):
    basis = build_kernel_basis(tower_n3_k8)
    pts = rng.standard_normal((10, 3))
    for alpha in range(9):
        for x in pts:
            z = abs(kernel_function(basis, alpha, x))
            assert derivative_identity_residual(basis, alpha, x) < 1e-5 * (1 + z)


def test_richardson_order_two(tower_n3_k8):
    basis = build_kernel_basis(tower_n3_k8)
    x = np.array([0.4, -0.2, 0.3])
    r1 = derivative_identity_residual(basis, 0, x, h=1e-4)
    r2 = derivative_identity_residual(basis, 0, x, h=2e-4)
    assert r2 / r1 == pytest.approx(4.0, rel=0.2)


def test_gram_matrix_is_symmetric_positive(tower_n3_k8):
    # the ring profile breaks every continuous symmetry, so all nine
    # deformation directions carry weight and the Gram form is definite
    basis = build_kernel_basis(tower_n3_k8)
    report = gram_matrix(basis)
    g = np.asarray(report.matrix)
    assert np.allclose(g, g.T, atol=1e-10)
    assert np.min(np.linalg.eigvalsh(g)) > 0
    assert report.smallest_singular_value > 0


def test_gram_matrix_radial_base_degenerates(bubble_n3):
    # a radial base is invariant under rotations, so the Gram form picks up
    # null directions that the tower does not have
    report = gram_matrix(build_kernel_basis(bubble_n3))
    eigs = np.linalg.eigvalsh(np.asarray(report.matrix))
    assert np.min(eigs) > -1e-8
    assert np.sum(np.abs(eigs) < 1e-8) > 0
