import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etype_interp.nodes import (
    NodeSet,
    consecutive_phase_steps,
    find_nodes,
    interlacing_counts,
    phase_count_gap,
    phase_increment,
    spacing_report,
)
from etype_interp.systems import HBSystem, eval_E

# zeros of J_nu from 40-digit mpmath
J0_ZEROS = [2.404825557695773, 5.520078110286311, 8.653727912911013]
J1_ZEROS = [3.8317059702075123, 7.0155866698156188]
J3_ZEROS = [6.3801618959239835, 9.7610231299816697, 13.015200721698434, 16.223466160318768, 19.409415226435012]
JM34_ZEROS = [1.0585082594041192, 4.2840538127246981, 7.4404544040048113]

SYSTEMS = (
    [HBSystem.sinc(1.0)]
    + [HBSystem.bessel(nu, 1.0, a) for nu in (-0.75, -0.5, 0.0, 0.5, 3.0) for a in (0.0, 0.5)]
    + [HBSystem.expw(1.0, "linear"), HBSystem.expw(1.0, "exp")]
)


def test_sinc_nodes():
    ns = find_nodes(HBSystem.sinc(2.0), (-5, 5))
    assert np.allclose(ns.nodes, math.pi * np.arange(-3, 4) / 2, atol=1e-14)
    assert list(ns.indices) == list(range(-3, 4))
    assert np.allclose(ns.spacings_times_tau, math.pi)


def test_bessel_nodes_zeros_of_j0():
    ns = find_nodes(HBSystem.bessel(0.0, 1.0, 0.5), (0.1, 10))
    assert np.max(np.abs(ns.nodes - J0_ZEROS)) < 1e-10


def test_bessel_alpha0_nodes_are_zeros_of_j1_and_origin():
    ns = find_nodes(HBSystem.bessel(0.0, 1.0, 0.0), (-0.1, 8))
    assert np.max(np.abs(ns.nodes - np.array([0.0] + J1_ZEROS))) < 1e-10


def test_negative_order_nodes():
    ns = find_nodes(HBSystem.bessel(-0.75, 1.0, 0.5), (0.01, 8))
    assert np.max(np.abs(ns.nodes - JM34_ZEROS)) < 1e-10


def test_spacing_examples():
    ns = find_nodes(HBSystem.bessel(0.0, 1.0, 0.5), (0.1, 10))
    s = ns.nodes[2] - ns.nodes[1]
    assert s == pytest.approx(3.13365, abs=1e-5)
    assert abs(s / math.pi - 1) < 3e-3
    ns3 = find_nodes(HBSystem.bessel(3.0, 1.0, 0.5), (0.1, 20))
    assert np.max(np.abs(ns3.nodes - J3_ZEROS)) < 1e-10
    d = np.diff(ns3.nodes)
    assert np.all(np.diff(d) < 0) and np.all(d > math.pi)
    rep = spacing_report(ns3)
    assert rep.min == pytest.approx(d.min())


def test_nodeset_is_read_only():
    ns = find_nodes(HBSystem.sinc(1.0), (-5, 5))
    with pytest.raises(ValueError):
        ns.nodes[0] = 1.0
    assert isinstance(ns, NodeSet) and len(ns) == 3


@pytest.mark.parametrize("sys", SYSTEMS, ids=lambda s: s.label())
def test_phase_count_and_interlacing(sys):
    ns = find_nodes(sys, (-50, 50))
    assert phase_count_gap(sys, ns) <= 1.0
    assert np.max(np.abs(consecutive_phase_steps(sys, ns) - 1.0)) < 1e-6
    assert np.all(interlacing_counts(sys, ns) == 1)
    a = np.abs(np.asarray(eval_E(sys, ns.nodes).A))
    assert np.all(ns.residuals <= 1e-11 * np.maximum(1.0, a))


def test_phase_increment_sinc():
    assert phase_increment(HBSystem.sinc(3.0), -1.0, 2.0) == pytest.approx(9.0, rel=1e-14)


def test_parallel_search_matches_serial():
    sys = HBSystem.bessel(0.5, 3.0, 0.25)
    a = find_nodes(sys, (-40, 40))
    b = find_nodes(sys, (-40, 40), workers=4)
    assert np.array_equal(a.nodes, b.nodes)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([-0.75, 0.0, 0.5, 3.0]), st.sampled_from([0.0, 0.5]), st.floats(0.5, 32.0))
def test_scale_covariance_property(nu, alpha, tau):
    n1 = find_nodes(HBSystem.bessel(nu, 1.0, alpha), (-30.3, 30.3)).nodes
    nt = find_nodes(HBSystem.bessel(nu, tau, alpha), (-30.3 / tau, 30.3 / tau)).nodes
    assert nt.size == n1.size
    assert np.max(np.abs(nt - n1 / tau)) <= 1e-12 * 30 / tau


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(SYSTEMS), st.floats(-30, 20), st.floats(7, 15))
def test_windowed_search_consistency_property(sys, lo, width):
    """A sub-window search returns exactly the nodes of the big window inside it."""
    big = find_nodes(sys, (-60, 60)).nodes
    sub = find_nodes(sys, (lo, lo + width)).nodes
    ref = big[(big >= lo) & (big <= lo + width)]
    assert sub.size == ref.size
    assert np.allclose(sub, ref, atol=1e-12)
