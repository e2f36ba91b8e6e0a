import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etype_interp.errors import PolicyError
from etype_interp.interp import TruncationPolicy, hermite_eval, lagrange_eval, reproduce_check
from etype_interp.nodes import find_nodes
from etype_interp.systems import HBSystem
from etype_interp.targets import (
    Decay,
    TargetFunction,
    constant,
    gaussian,
    kernel_section,
    rational,
    sinc_function,
    system_b,
    zero,
)

SYSTEMS8 = [
    HBSystem.sinc(8.0),
    HBSystem.bessel(0.0, 8.0, 0.5),
    HBSystem.bessel(-0.75, 8.0, 0.5),
    HBSystem.bessel(3.0, 8.0, 0.0),
    HBSystem.expw(8.0, "linear"),
]


def cardinal(x):
    return np.sinc(x / math.pi)


def test_single_term_cardinal_series():
    sys = HBSystem.sinc(1.0)
    ns = find_nodes(sys, (-400, 400))
    F = sinc_function(1.0)
    z = np.linspace(-20, 20, 81) + 0.0137
    v = lagrange_eval(sys, ns, F, z, TruncationPolicy(node_window=40))
    assert np.max(np.abs(v.value - cardinal(z))) < 1e-15
    # the samples sin(pi k)/(pi k) vanish up to rounding, so the tail is at rounding level
    assert np.max(v.tail_bound) < 1e-15


@pytest.mark.parametrize("sys", SYSTEMS8, ids=lambda s: s.label())
def test_node_values_exact(sys):
    ns = find_nodes(sys, (-40, 40))
    f = gaussian(1.0)
    pol = TruncationPolicy(radius=12)
    t = ns.nodes[np.abs(ns.nodes) <= 9]
    assert np.all(lagrange_eval(sys, ns, f, t, pol).value == f(t))
    assert np.max(np.abs(hermite_eval(sys, ns, f, t, pol).value - f(t))) <= 1e-9


@pytest.mark.parametrize("sys", SYSTEMS8, ids=lambda s: s.label())
def test_hermite_derivative_at_nodes(sys):
    ns = find_nodes(sys, (-40, 40))
    f = gaussian(1.0)
    pol = TruncationPolicy(radius=12)
    t = ns.nodes[np.abs(ns.nodes) <= 9]
    h = 1e-5
    d = (hermite_eval(sys, ns, f, t + h, pol).value - hermite_eval(sys, ns, f, t - h, pol).value) / (2 * h)
    fp = f.deriv(t)
    assert np.max(np.abs(d - fp) / np.maximum(1.0, np.abs(fp))) <= 1e-5


def test_wider_window_oracle_sinc():
    sys = HBSystem.sinc(8.0)
    f = gaussian(1.0)
    ns = find_nodes(sys, (-460, 460))
    small = lagrange_eval(sys, ns, f, 0.3, TruncationPolicy(radius=40))
    big = lagrange_eval(sys, ns, f, 0.3, TruncationPolicy(radius=400))
    assert abs(small.value - big.value) <= small.tail_bound + small.rounding + 1e-16


def test_cardinal_series_oracle_for_gaussian():
    """Sum over all nodes with |t| <= 12 equals a direct cardinal-series sum."""
    tau = 8.0
    sys = HBSystem.sinc(tau)
    ns = find_nodes(sys, (-60, 60))
    f = gaussian(1.0)
    z = np.linspace(-3, 3, 31) + 0.01
    v = lagrange_eval(sys, ns, f, z, TruncationPolicy(radius=12)).value
    k = np.arange(-40, 41)
    t = math.pi * k / tau
    ref = np.array([math.fsum(f(t) * cardinal(tau * (zz - t))) for zz in z])
    assert np.max(np.abs(v - ref)) < 1e-14


def test_hermite_constant():
    sys = HBSystem.sinc(1.0)
    ns = find_nodes(sys, (-2000, 2000))
    z = np.linspace(-3, 3, 13) + 0.1
    v = hermite_eval(sys, ns, constant(1.0), z, TruncationPolicy(node_window=400))
    assert np.all(np.abs(v.value - 1.0) <= v.tail_bound + v.rounding)
    assert np.max(v.tail_bound) < 1e-2


def test_zero_target():
    sys = HBSystem.bessel(0.5, 4.0, 0.0)
    ns = find_nodes(sys, (-80, 80))
    v = lagrange_eval(sys, ns, zero(), np.linspace(-2, 2, 9), TruncationPolicy(node_window=20))
    assert np.all(v.value == 0) and np.all(v.tail_bound == 0)


def test_reproduce_check_sinc():
    sys = HBSystem.sinc(4.0)
    ns = find_nodes(sys, (-200, 200))
    pol = TruncationPolicy(node_window=150)
    r = reproduce_check(sys, ns, kernel_section(sys, 0.0), pol, np.linspace(-3, 3, 61), tol=1e-9)
    assert r.success


@pytest.mark.parametrize("mode", ["direct_sum", "holder_bound"])
def test_reproduce_check_bessel(mode):
    sys = HBSystem.bessel(0.0, 16.0, 0.0)
    ns = find_nodes(sys, (-60, 60))
    pol = TruncationPolicy(node_window=200, tail_mode=mode)
    r = reproduce_check(sys, ns, kernel_section(sys, 0.37), pol, np.linspace(-2, 2, 81))
    assert r.success


def test_b_is_not_reproduced():
    sys = HBSystem.bessel(0.0, 2.0, 0.0)
    ns = find_nodes(sys, (-150, 150))
    z = np.linspace(-2, 2, 41) + 0.05
    B = system_b(sys)
    v = lagrange_eval(sys, ns, B, z, TruncationPolicy(node_window=20))
    # samples B(t) are zero up to node residuals, so the series is ~0 while B is not
    assert np.max(np.abs(v.value)) < 1e-12
    assert np.max(np.abs(B(z) - v.value)) > 0.1


def test_policy_errors():
    sys = HBSystem.sinc(1.0)
    ns = find_nodes(sys, (-30, 30))
    with pytest.raises(PolicyError):
        lagrange_eval(sys, ns, gaussian(), 0.1, TruncationPolicy(node_window=40))
    with pytest.raises(PolicyError):
        TruncationPolicy(node_window=10, radius=3.0)
    with pytest.raises(PolicyError):
        TruncationPolicy(tail_mode="guess")
    with pytest.raises(PolicyError):
        TruncationPolicy(near_threshold=1.0).threshold(ns)


def test_safe_region_enforced():
    sys = HBSystem.sinc(1.0)
    ns = find_nodes(sys, (-300, 300))
    pol = TruncationPolicy(node_window=20)
    with pytest.raises(PolicyError):
        lagrange_eval(sys, ns, gaussian(), 55.0, pol)
    lagrange_eval(sys, ns, gaussian(), 45.0, pol)


def test_near_node_switch_is_continuous():
    sys = HBSystem.bessel(0.0, 8.0, 0.5)
    ns = find_nodes(sys, (-40, 40))
    pol = TruncationPolicy(radius=12)
    thr = pol.threshold(ns)
    t = ns.nodes[np.abs(ns.nodes) <= 5]
    f = gaussian(1.0)
    for ev in (lagrange_eval, hermite_eval):
        a = ev(sys, ns, f, t + thr * (1 - 1e-7), pol).value
        b = ev(sys, ns, f, t + thr * (1 + 1e-7), pol).value
        assert np.max(np.abs(a - b)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.3, 3.0))
def test_linearity_property(a, b, g):
    sys = HBSystem.expw(3.0)
    ns = find_nodes(sys, (-200, 200))
    f1, f2 = gaussian(g), rational(2.0)
    h = TargetFunction("combo", lambda x: a * f1(x) + b * f2(x), None, Decay("rational", 2.0, abs(a) + abs(b)))
    z = np.linspace(-5, 5, 21) + 0.03
    pol = TruncationPolicy(radius=40)
    lhs = lagrange_eval(sys, ns, h, z, pol).value
    rhs = a * lagrange_eval(sys, ns, f1, z, pol).value + b * lagrange_eval(sys, ns, f2, z, pol).value
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(SYSTEMS8[:4]), st.floats(-3, 3))
def test_window_doubling_property(sys, z):
    ns = find_nodes(sys, (-160, 160))
    for f in (gaussian(1.0), rational(2.0), kernel_section(sys, 0.37)):
        v1 = lagrange_eval(sys, ns, f, z, TruncationPolicy(node_window=100))
        v2 = lagrange_eval(sys, ns, f, z, TruncationPolicy(node_window=200))
        assert abs(v1.value - v2.value) <= v1.tail_bound + v1.rounding
