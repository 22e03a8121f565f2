import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerlab.energy import (
    EnergyConfig,
    bubble_energy,
    constant_set,
    lambda_from_eps,
    psi_formula,
    whole_space_energy,
    zeta_normalizer,
)
from towerlab.fields import TowerConfig, build_tower

# independently computed whole-space integrals of the standard profile
FROZEN = {
    3: {"int_qp1": 12.82099220, "gamma_n": 4.27366407, "chi_n": 2.136832,
        "beta_n": 0.054127, "eta_n": 0.393711},
    4: {"int_qp1": 105.27578028, "gamma_n": 26.318945, "chi_n": 26.318945,
        "beta_n": 0.033774, "eta_n": -19.996947},
    5: {"int_qp1": 844.36026476, "gamma_n": 168.872053, "chi_n": 253.308079,
        "beta_n": 0.054176, "eta_n": -488.339081},
}

_SETS: dict = {}


def _constants(n):
    if n not in _SETS:
        _SETS[n] = constant_set(build_tower(TowerConfig(n, 0)), EnergyConfig(n))
    return _SETS[n]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_constants_match_frozen_values(n):
    cs = _constants(n)
    for name, value in FROZEN[n].items():
        assert getattr(cs, name) == pytest.approx(value, rel=1e-5), name


@pytest.mark.parametrize("n", [3, 4, 5])
def test_gradient_potential_identity(n):
    cs = _constants(n)
    assert abs(cs.int_grad - cs.int_qp1) / cs.int_qp1 < 1e-12


@pytest.mark.parametrize("n", [3, 4, 5])
def test_single_bubble_free_energy(n):
    # (1/2 - 1/(p+1)) * int |Q|^{p+1} = int |Q|^{p+1} / n
    cs = _constants(n)
    profile = build_tower(TowerConfig(n, 0))
    assert whole_space_energy(profile) == pytest.approx(cs.int_qp1 / n, rel=1e-8)
    assert bubble_energy(n) == pytest.approx(cs.int_qp1 / n, rel=1e-8)


def test_zeta_normalizer_vanishes_with_eps():
    vals = [abs(zeta_normalizer(3, e)) for e in (0.1, 0.01, 0.001)]
    assert vals[0] > vals[1] > vals[2]
    assert zeta_normalizer(3, 0.0) == 0.0


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.5, 8.0), eps=st.floats(1e-4, 0.1))
def test_scale_coupling_inverts(lam, eps):
    cs = _constants(3)
    scale = lambda_from_eps(3, cs.beta_n, lam, eps)
    assert scale == pytest.approx(cs.beta_n * lam**2 * eps, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(l1=st.floats(0.5, 5.0), l2=st.floats(0.5, 5.0))
def test_reduced_level_swap_symmetry(l1, l2):
    # swapping the two components leaves the level unchanged
    a = psi_formula(0.3, 0.4, 0.1, 1.0, 0.9, l1, l2)
    b = psi_formula(0.4, 0.3, 0.1, 0.9, 1.0, l2, l1)
    assert a == pytest.approx(b, rel=1e-12)
