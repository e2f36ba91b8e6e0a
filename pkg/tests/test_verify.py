import math

import numpy as np
import pytest

from etype_interp.errors import ClassMismatch, ConfigError
from etype_interp.systems import HBSystem
from etype_interp.targets import gaussian, kernel_section, rational, zero
from etype_interp.verify import (
    bessel_zeros,
    gr_node_identity,
    mz_point,
    run_hbweight_convergence,
    run_lagrange_convergence,
    run_mz_sweep,
    run_reproducing_check,
    sandwich_bracket,
    weight_mode_ratio,
)

TAUS = (8.0, 16.0, 32.0, 64.0)


def test_mz_sinc_lower_ratio_is_pi():
    rep = run_mz_sweep(HBSystem.sinc(1.0), TAUS, 2.0, test_function="sinc")
    for r in rep.records:
        assert r.lower_ratio == pytest.approx(math.pi, abs=1e-6)
        assert r.discrete_sum == pytest.approx(1.0 / r.tau, rel=1e-12)
    assert rep.success


def test_mz_sinc_kernel_section():
    rep = run_mz_sweep(HBSystem.sinc(1.0), TAUS, 2.0)
    assert rep.success and rep.lower_spread < 10 and rep.upper_spread < 10


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_mz_bessel_uniformity(p):
    rep = run_mz_sweep(HBSystem.bessel(0.0, 1.0, 0.5), TAUS, p)
    assert rep.success
    for r in rep.records:
        assert r.lower_ratio > 0 and math.isfinite(r.lower_ratio)
        assert r.lower_ratio * r.upper_ratio == pytest.approx(1.0, rel=1e-14)


def test_mz_rejects_non_kernel_test_function():
    with pytest.raises(ConfigError):
        mz_point(HBSystem.sinc(4.0), gaussian(), 2.0)
    with pytest.raises(ConfigError):
        run_mz_sweep(HBSystem.bessel(-0.75, 1.0, 0.5), TAUS, 8.0)


def test_reproducing_sinc_closed_form():
    r = run_reproducing_check(HBSystem.sinc(4.0), 0.0)
    assert r.K_diag == pytest.approx(4 / math.pi, rel=1e-14)
    assert r.S_value == pytest.approx(4 / math.pi, rel=1e-6)
    assert r.success


def test_reproducing_sinc_translation_invariance():
    for w0 in (0.37, -1.2):
        r = run_reproducing_check(HBSystem.sinc(4.0), w0)
        assert r.S_value == pytest.approx(4 / math.pi, rel=1e-6)


@pytest.mark.parametrize("nu", [0.0, 0.5])
def test_reproducing_bessel(nu):
    r = run_reproducing_check(HBSystem.bessel(nu, 16.0, 0.0), 0.37)
    assert r.relative_deviation <= 1e-6 and r.success


def test_lagrange_zero_target():
    rep = run_lagrange_convergence(HBSystem.sinc(1.0), "target", zero(), 2.0, (8.0, 16.0))
    assert np.all(rep.errors == 0)


def test_hbweight_exp_is_sinc():
    f = gaussian(16.0)
    a = run_hbweight_convergence("exp", f, 2.0, (8.0, 16.0))
    b = run_lagrange_convergence(HBSystem.sinc(1.0), "target", f, 2.0, (8.0, 16.0))
    assert np.array_equal(a.errors, b.errors)


def test_hbweight_linear_rational_target():
    """1/(1+x^2) is analytic in a strip, so the interpolation error falls below
    the truncation floor of a finite node window by tau = 16; from there on the
    measured error is flat to within the reported budget."""
    rep = run_hbweight_convergence("linear", rational(2.0), 2.0, TAUS, radius=60.0)
    e = rep.errors
    assert np.all(e[1:] < e[0])
    assert np.ptp(e[1:]) <= min(r.tail_budget for r in rep.records[1:])


def test_class_mismatch():
    # (1+x^2)^{-1/4} against |x|^{1/2}: not in L^2
    with pytest.raises(ClassMismatch):
        run_lagrange_convergence(HBSystem.bessel(0.0, 1.0, 0.5), "target", rational(0.5), 2.0, (8.0,))


def test_grozev_rahman_nodes():
    for nu in (-0.75, 0.0, 0.5, 3.0):
        assert gr_node_identity(nu, 1.0, 20.0) <= 1e-11
        assert gr_node_identity(nu, 8.0, 4.0) <= 1e-11
    z = bessel_zeros(0.0, 1.0, 10.0)
    assert z == pytest.approx([2.404825557695773, 5.520078110286311, 8.653727912911013], abs=1e-13)


def test_sandwich_uniform_in_tau():
    base = HBSystem.bessel(0.5, 1.0, 0.5)
    lo, hi = sandwich_bracket(base, 1.0, X=50.0 * 16, n=200001)
    a, b = sandwich_bracket(base, 16.0)
    assert lo * (1 - 1e-4) <= a and b <= hi * (1 + 1e-4)


def test_weight_mode_ratio_in_bracket():
    base = HBSystem.bessel(0.0, 1.0, 0.5)
    lo, hi = sandwich_bracket(base, 1.0, X=50.0 * 16, n=200001)
    r = weight_mode_ratio(base.with_tau(16.0), gaussian(1.0))
    assert lo**2 <= r <= hi**2


def test_records_sorted_and_nonnegative():
    rep = run_lagrange_convergence(HBSystem.bessel(0.0, 1.0, 0.5), "smoothed", gaussian(16.0), 2.0, (32.0, 8.0, 16.0))
    assert [r.tau for r in rep.records] == [8.0, 16.0, 32.0]
    assert np.all(rep.errors >= 0)
