import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etype_interp import quadrature as qd
from etype_interp.errors import ConfigError, PolicyError, TailUnavailable
from etype_interp.nodes import find_nodes
from etype_interp.systems import HBSystem, WeightDescriptor, WeightKind
from etype_interp.targets import Decay, TargetFunction, bump, gaussian, rational, sinc_function, zero


def test_power_weighted_gaussian_closed_form():
    w = WeightDescriptor(WeightKind.POWER, 0.5)
    g = qd.make_grid(12.0, 1.0, 16, origin_exponent=1.0)
    norm, tail = qd.weighted_lp_norm(gaussian(1.0), w, 2.0, g)
    assert norm == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert 0 <= tail < 1e-30


def test_sinc_plancherel():
    f = sinc_function(1.0)
    g = qd.make_grid(2000.0, 1.0, 16)
    norm, tail = qd.weighted_lp_norm(f, WeightDescriptor(WeightKind.UNIT), 2.0, g)
    # the kernel-type tail bounds the omitted mass 2 (1/X) / 1 = 1e-3; true mass ~ 5e-4
    assert abs(norm**2 - math.pi) <= tail
    assert tail == pytest.approx(1e-3)


def test_zero_function():
    g = qd.make_grid(5.0, 1.0)
    assert qd.weighted_lp_norm(zero(), WeightDescriptor(WeightKind.UNIT), 2.0, g) == (0.0, 0.0)


@pytest.mark.parametrize("s", [-0.9, -0.5, -0.25, 0.5, 1.0, 2.4])
def test_singular_power_integral(s):
    g = qd.make_grid(1.0, 1.0, 16, origin_exponent=s)
    val = qd.integrate_grid(lambda x: np.abs(x) ** s, g)
    assert val == pytest.approx(2.0 / (1.0 + s), rel=1e-12)


def test_example_singular_integrals():
    # |x|^{-1/2} on [-1, 1] gives 4; |x|^{-0.9} gives 20
    g = qd.make_grid(1.0, 1.0, 16, origin_exponent=-0.5)
    assert qd.integrate_grid(lambda x: np.abs(x) ** -0.5, g) == pytest.approx(4.0, rel=1e-13)
    g = qd.make_grid(1.0, 1.0, 16, origin_exponent=-0.9)
    assert qd.integrate_grid(lambda x: np.abs(x) ** -0.9, g) == pytest.approx(20.0, rel=1e-12)


def test_admissibility_message():
    with pytest.raises(ConfigError, match=r"p < 1/\|nu\+1/2\| = 4"):
        qd.check_admissible(8.0, -0.75)
    qd.check_admissible(3.9, -0.75)
    qd.check_admissible(100.0, 0.0)
    with pytest.raises(ConfigError):
        qd.LpExponent(1.0)
    assert qd.LpExponent(3.0).q == pytest.approx(1.5)


def test_mz_discrete_sum_sinc_example():
    tau = 4.0
    sys = HBSystem.sinc(tau)
    ns = find_nodes(sys, (-400, 400))
    F = sinc_function(tau)
    assert qd.mz_discrete_sum(F, sys, ns, 2.0) == pytest.approx(0.25, abs=1e-15)
    assert qd.mz_discrete_sum(zero(), sys, ns, 2.0) == 0.0


def test_mz_discrete_sum_window_too_small():
    sys = HBSystem.sinc(1.0)
    ns = find_nodes(sys, (-20, 20))
    F = TargetFunction("flat", lambda x: np.ones_like(x), None, Decay("rational", 0.0))
    with pytest.raises(PolicyError):
        qd.mz_discrete_sum(F, sys, ns, 2.0)


def test_tail_unavailable():
    g = qd.make_grid(1.0, 1.0)
    with pytest.raises(TailUnavailable):
        qd.weighted_lp_norm(bump(3.0), WeightDescriptor(WeightKind.UNIT), 2.0, g)
    with pytest.raises(TailUnavailable):
        qd.weighted_lp_norm(lambda x: x, WeightDescriptor(WeightKind.UNIT), 2.0, g)


def test_rational_tail_matches_closed_form():
    # integral over |x| > X of (1+x^2)^{-2} in closed form
    X = 10.0
    g = qd.make_grid(X, 1.0)
    _, tail = qd.weighted_lp_norm(rational(2.0), WeightDescriptor(WeightKind.UNIT), 2.0, g)
    F = lambda x: 0.5 * (x / (1 + x * x) + math.atan(x))
    assert tail == pytest.approx(2 * (math.pi / 4 - F(X)), rel=1e-8)


def test_riemann_sum_converges():
    f = gaussian(1.0)
    w = WeightDescriptor(WeightKind.POWER, 0.5)
    exact = 0.5
    gaps = []
    for tau in (4.0, 16.0, 64.0):
        sys = HBSystem.bessel(0.0, tau, 0.5)
        gaps.append(abs(qd.riemann_sum(f, w, 2.0, sys, find_nodes(sys, (-12, 12))) - exact))
    assert gaps[0] > gaps[1] > gaps[2]


def test_sin_power_mean():
    assert qd.sin_power_mean(2.0) == pytest.approx(0.5)
    assert qd.sin_power_mean(3.0) == pytest.approx(4.0 / (3.0 * math.pi), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(1.2, 4.0), st.sampled_from([0.0, 0.5, 1.5]))
def test_grid_refinement_property(a, p, s):
    w = WeightDescriptor(WeightKind.POWER, s) if s else WeightDescriptor(WeightKind.UNIT)
    f = gaussian(a)
    g = qd.make_grid(15.0 / math.sqrt(a), 2.0, 16, origin_exponent=p * s if s else None)
    n1, _ = qd.weighted_lp_norm(f, w, p, g)
    n2, _ = qd.weighted_lp_norm(f, w, p, g.refined())
    assert n1 == pytest.approx(n2, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(1.1, 5.0))
def test_gaussian_lp_norm_closed_form_property(a, p):
    """||e^{-a x^2}||_p^p = sqrt(pi / (a p))."""
    g = qd.make_grid(12.0 / math.sqrt(a), 1.0, 16)
    n, _ = qd.weighted_lp_norm(gaussian(a), WeightDescriptor(WeightKind.UNIT), p, g)
    assert n**p == pytest.approx(math.sqrt(math.pi / (a * p)), rel=1e-12)
