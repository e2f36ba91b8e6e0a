"""Invariant suite at reduced sizes. Each check returns (ok, detail)."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import quadrature as qd
from . import specfun
from .interp import TruncationPolicy, hermite_eval, lagrange_eval
from .nodes import (
    consecutive_phase_steps,
    find_nodes,
    interlacing_counts,
    phase_count_gap,
)
from .systems import (
    Family,
    HBSystem,
    E_complex,
    WeightDescriptor,
    WeightKind,
    abs_E,
    eval_E,
    hb_inequality_probe,
    kernel,
    kernel_diag,
    phase_derivative,
)
from .targets import bump, gaussian, kernel_section, rational
from .verify import (
    convergence_point,
    gr_node_identity,
    mz_point,
    origin_integral,
    phase_rate_bracket,
    sandwich_bracket,
    weight_mode_ratio,
)

NU_GRID = (-0.75, -0.5, 0.0, 0.5, 3.0)


def shipped_systems(tau: float = 1.0) -> list[HBSystem]:
    out = [HBSystem.sinc(tau)]
    out += [HBSystem.bessel(nu, tau, a) for nu in NU_GRID for a in (0.0, 0.5)]
    out += [HBSystem.expw(max(tau, 1.0), "linear"), HBSystem.expw(max(tau, 1.0), "exp")]
    return out


@dataclass(frozen=True)
class InvariantResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _rng(seed=20240617):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- specfun


def inv_derivative_closure():
    rng = _rng()
    nus = rng.uniform(-0.9, 3.0, 1000)
    xs = rng.uniform(0.1, 50.0, 1000)
    worst = 0.0
    for nu, x in zip(nus, xs):
        a, b = specfun.ab_pair(nu, x)
        da, db = specfun.ab_first_derivs_direct(nu, x)
        e1 = abs(da + b) / (1 + abs(b))
        e2 = abs(db - a + (2 * nu + 1) * b / x) / (1 + abs(a))
        worst = max(worst, e1, e2)
    return worst <= 1e-10, f"max scaled closure defect {worst:.3e} (limit 1e-10)"


def inv_finite_difference():
    rng = _rng(1)
    worst = 0.0
    h = 1e-5
    for nu in (-0.9, -0.5, 0.0, 0.7, 3.0):
        x = rng.uniform(0.1, 50.0, 100)
        d = specfun.ab_derivs(nu, x)
        dp = specfun.ab_derivs(nu, x + h)
        dm = specfun.ab_derivs(nu, x - h)
        for k, j in ((4, 2), (5, 3)):
            fd = (dp[j] - dm[j]) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - d[k]) / np.maximum(1.0, np.abs(d[k])))))
    return worst <= 1e-6, f"max relative FD mismatch {worst:.3e} (limit 1e-6)"


def inv_sinc_reduction():
    x = np.linspace(0.0, 50.0, 5001)
    a, b = specfun.ab_pair(-0.5, x)
    e = max(np.max(np.abs(a - np.cos(x))), np.max(np.abs(b - np.sin(x))))
    return e <= 1e-12, f"max deviation from (cos, sin) {e:.3e}"


# ---------------------------------------------------------------- systems


def inv_phase_kernel():
    rng = _rng(2)
    worst = 0.0
    for sys in shipped_systems(4.0):
        x = rng.uniform(-20, 20, 1000)
        lhs = math.pi * kernel_diag(sys, x)
        rhs = phase_derivative(sys, x) * abs_E(sys, x) ** 2
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    return worst <= 1e-10, f"max relative mismatch {worst:.3e}"


def inv_scaling_law():
    worst = 0.0
    for nu in NU_GRID:
        for a in (0.0, 0.5):
            for tau in (0.5, 4.0, 16.0):
                sys = HBSystem.bessel(nu, tau, a)
                x = np.linspace(-10 / tau, 10 / tau, 101)
                x = x[x != 0] if nu < -0.5 else x
                lhs = abs_E(sys, x)
                rhs = tau ** (nu + 0.5) * np.abs(E_complex(HBSystem.bessel(nu, 1.0, a), tau * x))
                worst = max(worst, float(np.max(np.abs(lhs - rhs) / rhs)))
    return worst <= 1e-12, f"max relative deviation {worst:.3e}"


def inv_weight_sandwich():
    bad = []
    for nu in NU_GRID:
        if nu == -0.5:
            continue
        base = HBSystem.bessel(nu, 1.0, 0.5)
        # the tau = 1 bracket covers every scaled abscissa tau x reached below;
        # 1e-4 absorbs the sampling of a continuous inf/sup
        lo, hi = sandwich_bracket(base, 1.0, X=50.0 * 64, n=400001)
        for tau in (4.0, 16.0, 64.0):
            a, b = sandwich_bracket(base, tau)
            if not (lo * (1 - 1e-4) <= a and b <= hi * (1 + 1e-4)):
                bad.append(f"nu={nu} tau={tau}: [{a:.4g},{b:.4g}] vs [{lo:.4g},{hi:.4g}]")
    return not bad, "; ".join(bad) or "tau=1 bracket contains tau in {4,16,64}"


def inv_node_kernel_orthogonality():
    worst = 0.0
    for sys in shipped_systems(2.0):
        ns = find_nodes(sys, (-15, 15))
        t = ns.nodes
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        off = T1 != T2
        k = kernel(sys, T1[off], T2[off]).value
        kd = kernel_diag(sys, T1[off])
        worst = max(worst, float(np.max(np.abs(k) / kd)))
    return worst <= 1e-9, f"max |K(t,t')|/K(t,t) {worst:.3e}"


def inv_phase_rate():
    bad = []
    for sys in shipped_systems(1.0):
        if sys.family is Family.EXPW and sys.w == "linear":
            # phi'/tau = 1 + 1/(tau (1 + x^2)) lies in [1, 2] for tau >= 1
            for tau in (1.0, 4.0, 16.0, 64.0):
                a, b = phase_rate_bracket(sys, tau)
                if not (1.0 - 1e-12 <= a and b <= 2.0 + 1e-12):
                    bad.append(f"{sys.label()} tau={tau}")
            continue
        lo, hi = phase_rate_bracket(sys, 1.0)
        for tau in (4.0, 16.0, 64.0):
            a, b = phase_rate_bracket(sys, tau)
            if not (lo - 1e-9 <= a and b <= hi + 1e-9):
                bad.append(f"{sys.label()} tau={tau}: [{a:.5g},{b:.5g}] vs [{lo:.5g},{hi:.5g}]")
    return not bad, "; ".join(bad) or "phi'/tau brackets uniform in tau"


def inv_hermite_biehler():
    rng = _rng(3)
    worst = np.inf
    for sys in shipped_systems(1.0):
        z = rng.uniform(-6, 6, 200) + 1j * rng.uniform(0.01, 6, 200)
        rep = hb_inequality_probe(sys, z)
        worst = min(worst, rep.min_difference)
        if not rep.success:
            return False, f"{sys.label()}: |E(z)| - |E(conj z)| = {rep.min_difference:.3e} at {rep.argmin}"
    return True, f"min difference {worst:.3e} > 0"


# ---------------------------------------------------------------- nodes


def inv_phase_count():
    worst = 0.0
    for sys in shipped_systems(1.0):
        ns = find_nodes(sys, (-50, 50))
        worst = max(worst, phase_count_gap(sys, ns))
    return worst <= 1.0, f"max |dphi/pi - count| {worst:.3f} (limit 1)"


def inv_phase_steps():
    worst = 0.0
    for sys in shipped_systems(1.0):
        ns = find_nodes(sys, (-50, 50))
        worst = max(worst, float(np.max(np.abs(consecutive_phase_steps(sys, ns) - 1.0))))
    return worst <= 1e-6, f"max |phase step / pi - 1| {worst:.3e}"


def inv_node_residuals():
    worst = 0.0
    for tau in (1.0, 16.0):
        for sys in shipped_systems(tau):
            ns = find_nodes(sys, (-50, 50))
            a = np.abs(np.asarray(eval_E(sys, ns.nodes).A))
            worst = max(worst, float(np.max(ns.residuals / np.maximum(1.0, a))))
    return worst <= 1e-11, f"max |B(t)|/max(1,|A(t)|) {worst:.3e}"


def inv_spacing_bracket():
    bad = []
    for sys in shipped_systems(1.0):
        lo, hi = phase_rate_bracket(sys, 1.0)
        c = max(1.0 / lo, hi) * 1.001
        ns = find_nodes(sys, (-50, 50))
        s = ns.spacings_times_tau
        if not (np.all(s >= math.pi / c) and np.all(s <= math.pi * c)):
            bad.append(f"{sys.label()}: [{s.min():.4g},{s.max():.4g}] vs c={c:.4g}")
    return not bad, "; ".join(bad) or "all spacings inside [pi/c, pi c]"


def inv_scale_covariance():
    worst = 0.0
    for nu in NU_GRID:
        for a in (0.0, 0.5):
            n1 = find_nodes(HBSystem.bessel(nu, 1.0, a), (-40, 40)).nodes
            for tau in (4.0, 16.0):
                nt = find_nodes(HBSystem.bessel(nu, tau, a), (-40 / tau, 40 / tau)).nodes
                if nt.size != n1.size:
                    return False, f"nu={nu} alpha={a} tau={tau}: node counts differ"
                worst = max(worst, float(np.max(np.abs(nt - n1 / tau) * tau)))
    return worst <= 1e-12 * 40, f"max tau |t_tau - t_1/tau| {worst:.3e} (limit 4e-11 = 1e-12 x window)"


def inv_interlacing():
    for sys in shipped_systems(1.0):
        ns = find_nodes(sys, (-50, 50))
        c = interlacing_counts(sys, ns)
        if not np.all(c == 1):
            return False, f"{sys.label()}: counts {sorted(set(c.tolist()))}"
    return True, "exactly one zero of A between consecutive nodes"


# ---------------------------------------------------------------- interp


def _interp_setup(sys, R=60.0):
    ns = find_nodes(sys, (-R, R))
    return ns


def inv_window_doubling():
    rng = _rng(4)
    worst = 0.0
    sys = HBSystem.bessel(0.0, 4.0, 0.5)
    ns = find_nodes(sys, (-160, 160))
    for f in (gaussian(1.0), rational(2.0), bump(2.0), kernel_section(sys, 0.37)):
        p1 = TruncationPolicy(node_window=40)
        p2 = TruncationPolicy(node_window=80)
        span = ns.nodes[ns.indices == 40][0]
        z = rng.uniform(-0.7 * span, 0.7 * span, 200)
        v1 = lagrange_eval(sys, ns, f, z, p1)
        v2 = lagrange_eval(sys, ns, f, z, p2)
        excess = np.abs(v1.value - v2.value) - v1.tail_bound - v1.rounding
        worst = max(worst, float(np.max(excess)))
        if worst > 0:
            return False, f"{f.id}: change exceeds tail bound by {worst:.3e}"
    return True, "window doubling stays within the reported tail bound"


def inv_linearity():
    rng = _rng(5)
    sys = HBSystem.expw(3.0)
    ns = find_nodes(sys, (-200, 200))
    f, g = gaussian(1.0), rational(2.0)
    a, b = 0.7, -1.3
    from .targets import TargetFunction, Decay

    h = TargetFunction("combo", lambda x: a * f(x) + b * g(x), None, Decay("rational", 2.0, 2.0))
    z = rng.uniform(-10, 10, 200)
    pol = TruncationPolicy(radius=40)
    lh = lagrange_eval(sys, ns, h, z, pol).value
    comb = a * lagrange_eval(sys, ns, f, z, pol).value + b * lagrange_eval(sys, ns, g, z, pol).value
    e = float(np.max(np.abs(lh - comb) / np.maximum(1.0, np.abs(comb))))
    return e <= 1e-12, f"max relative defect {e:.3e}"


def inv_node_exactness():
    worst_v, worst_d = 0.0, 0.0
    f = gaussian(1.0)
    for sys in (HBSystem.sinc(8.0), HBSystem.bessel(0.0, 8.0, 0.5), HBSystem.bessel(-0.75, 8.0, 0.5), HBSystem.expw(8.0)):
        ns = find_nodes(sys, (-40, 40))
        pol = TruncationPolicy(radius=12)
        t = ns.nodes[np.abs(ns.nodes) <= 9.0]
        lv = lagrange_eval(sys, ns, f, t, pol).value
        hv = hermite_eval(sys, ns, f, t, pol).value
        worst_v = max(worst_v, float(np.max(np.abs(lv - f(t)))), float(np.max(np.abs(hv - f(t)))))
        h = 1e-5
        dh = (hermite_eval(sys, ns, f, t + h, pol).value - hermite_eval(sys, ns, f, t - h, pol).value) / (2 * h)
        fp = f.deriv(t)
        worst_d = max(worst_d, float(np.max(np.abs(dh - fp) / np.maximum(1.0, np.abs(fp)))))
    ok = worst_v <= 1e-9 and worst_d <= 1e-5
    return ok, f"value residual {worst_v:.3e} (1e-9), derivative residual {worst_d:.3e} (1e-5)"


def inv_entirety_proxy():
    f = gaussian(1.0)
    worst = 0.0
    for sys in (HBSystem.sinc(8.0), HBSystem.bessel(0.0, 8.0, 0.5)):
        ns = find_nodes(sys, (-40, 40))
        pol = TruncationPolicy(radius=12)
        thr = pol.threshold(ns)
        t = ns.nodes[np.abs(ns.nodes) <= 6.0]
        for ev in (lagrange_eval, hermite_eval):
            for sgn in (1.0, -1.0):
                zin = t + sgn * thr * (1 - 1e-6)
                zout = t + sgn * thr * (1 + 1e-6)
                vin = ev(sys, ns, f, zin, pol).value
                vout = ev(sys, ns, f, zout, pol).value
                # the exact change over 2e-6 thr is bounded by slope * 2e-6 thr
                slope = 10.0 * sys.tau
                jump = np.abs(vin - vout) - slope * 2e-6 * thr
                worst = max(worst, float(np.max(jump)))
    return worst <= 1e-9, f"max jump across the near-node switch {worst:.3e} (limit 1e-9)"


# ---------------------------------------------------------------- quadrature


def inv_grid_refinement():
    worst = 0.0
    w = WeightDescriptor(WeightKind.POWER, 0.5)
    for f in (gaussian(1.0), rational(2.0), bump(2.0)):
        for wd, s in ((w, 1.0), (WeightDescriptor(WeightKind.UNIT), None)):
            g = qd.make_grid(40.0, 4.0, 16, origin_exponent=s)
            a, _ = qd.weighted_lp_norm(f, wd, 2.0, g)
            b, _ = qd.weighted_lp_norm(f, wd, 2.0, g.refined())
            worst = max(worst, abs(a - b) / b)
    return worst < 1e-9, f"max relative change {worst:.3e}"


def inv_singularity():
    worst = 0.0
    for nu in (-0.9, -0.75, -0.6):
        for p in (1.5, 2.0):
            if not p < 1 / abs(nu + 0.5):
                continue
            s = p * (nu + 0.5)
            g = qd.make_grid(1.0, 1.0, 16, origin_exponent=s)
            val = qd.integrate_grid(lambda x: np.abs(x) ** s, g)
            worst = max(worst, abs(val - 2 / (1 + s)) / (2 / (1 + s)))
    return worst <= 1e-8, f"max relative error {worst:.3e}"


def inv_riemann_sum():
    f = gaussian(1.0)
    sys0 = HBSystem.bessel(0.0, 1.0, 0.5)
    w = sys0.weight_descriptor
    g = qd.make_grid(12.0, 1.0, 16, origin_exponent=1.0)
    exact = qd.weighted_lp_norm(f, w, 2.0, g)[0] ** 2
    gaps = []
    for tau in (8.0, 16.0, 32.0, 64.0):
        sys = sys0.with_tau(tau)
        ns = find_nodes(sys, (-12, 12))
        gaps.append(abs(qd.riemann_sum(f, w, 2.0, sys, ns) - exact) / exact)
    return gaps[-1] < 0.02, "relative gaps " + ", ".join(f"{x:.2e}" for x in gaps)


# ---------------------------------------------------------------- verify


def inv_mz_sandwich():
    worst = np.inf
    for p in (1.5, 2.0, 3.0):
        for sys in (HBSystem.sinc(8.0), HBSystem.bessel(0.0, 8.0, 0.5)):
            r = mz_point(sys, kernel_section(sys, 0.37), p, unit_window=400.0)
            prod = r.lower_ratio * r.upper_ratio
            if not (np.isfinite(prod) and r.lower_ratio > 0):
                return False, "non-finite ratio"
            worst = min(worst, prod)
    return worst >= 1 - 1e-12, f"min lower*upper {worst:.15g}"


def inv_weight_mode():
    f = gaussian(1.0)
    bad = []
    for nu in (0.0, 0.5, 3.0):
        base = HBSystem.bessel(nu, 1.0, 0.5)
        lo, hi = sandwich_bracket(base, 1.0)
        for tau in (8.0, 16.0):
            r = weight_mode_ratio(base.with_tau(tau), f, 2.0)
            if not (lo**2 * (1 - 1e-9) <= r <= hi**2 * (1 + 1e-9)):
                bad.append(f"nu={nu} tau={tau}: {r:.4g} not in [{lo**2:.4g},{hi**2:.4g}]")
    return not bad, "; ".join(bad) or "error-integral ratio inside the squared sandwich bracket"


def inv_grozev_rahman():
    worst = 0.0
    for nu in NU_GRID:
        for tau in (1.0, 8.0):
            worst = max(worst, gr_node_identity(nu, tau, 20.0 if tau == 1 else 5.0))
    return worst <= 1e-11, f"max node deviation from zeros of J_nu(tau .) {worst:.3e}"


def inv_origin_control():
    base = HBSystem.bessel(-0.75, 1.0, 0.5)
    f = gaussian(1.0)
    vals = []
    for tau in (8.0, 16.0, 32.0, 64.0):
        sys = base.with_tau(tau)
        edge = 7.0 + 110 * math.pi / tau
        ns = find_nodes(sys, (-edge, edge))
        vals.append(origin_integral(sys, ns, f, TruncationPolicy(radius=7.0, safe_fraction=None), 2.0))
    ok = all(b < a for a, b in zip(vals, vals[1:]))
    return ok, "origin integrals " + ", ".join(f"{v:.3e}" for v in vals)


def inv_target_derivatives():
    rng = _rng(6)
    sys = HBSystem.bessel(0.0, 4.0, 0.5)
    worst = 0.0
    x = rng.uniform(-5, 5, 100)
    h = 1e-6
    for f in (gaussian(1.0), rational(2.0), bump(2.0), kernel_section(sys, 0.37)):
        fd = (f(x + h) - f(x - h)) / (2 * h)
        d = f.deriv(x)
        worst = max(worst, float(np.max(np.abs(fd - d) / np.maximum(1.0, np.abs(d)))))
    return worst <= 1e-6, f"max relative mismatch {worst:.3e}"


INVARIANTS: list[tuple[str, Callable]] = [
    ("specfun.derivative_closure", inv_derivative_closure),
    ("specfun.finite_difference", inv_finite_difference),
    ("specfun.sinc_reduction", inv_sinc_reduction),
    ("hb.phase_kernel_consistency", inv_phase_kernel),
    ("hb.scaling_law", inv_scaling_law),
    ("hb.weight_sandwich", inv_weight_sandwich),
    ("hb.node_kernel_orthogonality", inv_node_kernel_orthogonality),
    ("hb.phase_rate_uniformity", inv_phase_rate),
    ("hb.hermite_biehler", inv_hermite_biehler),
    ("nodes.phase_count_completeness", inv_phase_count),
    ("nodes.phase_steps", inv_phase_steps),
    ("nodes.residuals", inv_node_residuals),
    ("nodes.spacing_bracket", inv_spacing_bracket),
    ("nodes.scale_covariance", inv_scale_covariance),
    ("nodes.interlacing", inv_interlacing),
    ("interp.target_derivatives", inv_target_derivatives),
    ("interp.window_doubling", inv_window_doubling),
    ("interp.linearity", inv_linearity),
    ("interp.node_exactness", inv_node_exactness),
    ("interp.entirety_proxy", inv_entirety_proxy),
    ("quadrature.grid_refinement", inv_grid_refinement),
    ("quadrature.singularity", inv_singularity),
    ("quadrature.riemann_sum", inv_riemann_sum),
    ("verify.mz_sandwich", inv_mz_sandwich),
    ("verify.weight_mode_consistency", inv_weight_mode),
    ("verify.grozev_rahman_nodes", inv_grozev_rahman),
    ("verify.origin_control_monotone", inv_origin_control),
]


def names() -> list[str]:
    return [n for n, _ in INVARIANTS]


def run_one(name: str, fn: Callable) -> InvariantResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure of that invariant
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return InvariantResult(name, bool(ok), detail, time.perf_counter() - t0)


def run_all(only: list[str] | None = None, stop_on_failure: bool = False) -> list[InvariantResult]:
    out = []
    for name, fn in INVARIANTS:
        if only and name not in only:
            continue
        r = run_one(name, fn)
        out.append(r)
        if stop_on_failure and not r.ok:
            break
    return out
