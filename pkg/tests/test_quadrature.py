import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerlab.quadrature import (
    SpikeSpec,
    domain_rule,
    gauss_legendre,
    sphere_area,
    sphere_rule,
    whole_space_rule,
)


@settings(max_examples=25, deadline=None)
@given(deg=st.integers(0, 8))
def test_gauss_legendre_is_exact_on_polynomials(deg):
    x, w = gauss_legendre(-1.0, 2.0, 8)
    exact = (2.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
    assert float(w @ x**deg) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sphere_rule_weights_sum_to_area(n):
    pts, w = sphere_rule(n, ring=24, polar=12)
    assert float(np.sum(w)) == pytest.approx(sphere_area(n), rel=1e-12)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    # odd moments vanish by symmetry
    assert abs(float(w @ pts[:, 0])) < 1e-12


def test_whole_space_rule_gaussian():
    rule = whole_space_rule(3, nr=48, ring=32, polar=12)
    val = rule.integrate(lambda p: np.exp(-np.sum(p * p, axis=1)))
    assert val == pytest.approx(np.pi**1.5, rel=1e-6)


def test_spike_partition_reproduces_plain_integral():
    # overlapping spike patches must not double count: the weighted union
    # integrates a smooth bump to the same value as the background rule
    def f(p):
        return np.exp(-2.0 * np.sum(p * p, axis=1))

    plain = whole_space_rule(3, nr=64, ring=48, polar=16)
    spikes = [
        SpikeSpec(center=np.array([0.3, 0.0, 0.0]), radius=0.5, core=0.05),
        SpikeSpec(center=np.array([-0.1, 0.2, 0.0]), radius=0.5, core=0.05),
    ]
    spiked = whole_space_rule(3, nr=64, ring=48, polar=16, spikes=spikes,
                              spike_nr=48, spike_ring=24, spike_polar=12)
    assert spiked.integrate(f) == pytest.approx(plain.integrate(f), rel=1e-5)


def test_domain_rule_ball_volume():
    rule = domain_rule(3, 0.0, 1.0, nr=32, ring=32, polar=12)
    vol = rule.integrate(lambda p: np.ones(p.shape[0]))
    assert vol == pytest.approx(4.0 * np.pi / 3.0, rel=1e-10)


def test_domain_rule_shell_volume():
    delta = 0.25
    rule = domain_rule(3, delta, 1.0, nr=32, ring=32, polar=12)
    vol = rule.integrate(lambda p: np.ones(p.shape[0]))
    assert vol == pytest.approx(4.0 * np.pi / 3.0 * (1 - delta**3), rel=1e-10)
