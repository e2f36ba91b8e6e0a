"""Experiment drivers: MZ ratio sweeps, the reproducing identity, convergence sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from . import quadrature as qd
from .errors import ClassMismatch, ConfigError, PolicyError
from .interp import TruncationPolicy, hermite_eval, lagrange_eval
from .nodes import find_nodes
from .systems import Family, HBSystem, WeightDescriptor, WeightKind, abs_E, eval_E
from .targets import TargetFunction, kernel_section, sinc_function

log = logging.getLogger(__name__)

WEIGHT_MODES = ("smoothed", "target")


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- MZ sweeps


@dataclass(frozen=True)
class MZRecord:
    tau: float
    p: float
    discrete_sum: float
    continuous_norm_p: float
    lower_ratio: float
    upper_ratio: float


@dataclass(frozen=True)
class MZReport:
    system: str
    target: str
    records: tuple[MZRecord, ...]
    factor: float
    lower_spread: float
    upper_spread: float
    success: bool


def _kernel_tail_mean(decay, p: float, X: float, amp: float) -> float:
    """Mean-value estimate of sum over |x| > X of (amp |sin(.)| / |x - c|)^p-type tails,
    without the sin factor: amp^p sum_sides (X -+ c)^(1-p) / (p - 1)."""
    c = decay.center
    return amp**p * ((X - c) ** (1.0 - p) + (X + c) ** (1.0 - p)) / (p - 1.0)


def mz_point(sys: HBSystem, F: TargetFunction, p: float, unit_window: float = 2000.0, points: int = 16) -> MZRecord:
    """Discrete and continuous functionals for one tau.

    Window X = unit_window / tau. Tails beyond X use the phase form of kernel
    sections: |F/E| = amp |sin(phi - phi_c)| / |x - c| on R and
    node_amp / |t - c| on nodes, with |sin|^p replaced by its mean.
    """
    qd.LpExponent(p)
    if F.decay.kind != "kernel":
        raise ConfigError("MZ sweeps use kernel sections (or scaled sinc) as test functions")
    X = unit_window / sys.tau
    ns = find_nodes(sys, (-X, X))
    disc = qd.mz_discrete_sum(F, sys, ns, p)
    dec = F.decay
    disc += _kernel_tail_mean(dec, p, X, dec.node_amp) / math.pi
    if not disc > 0:
        raise ConfigError("degenerate test function: vanishes at every node")
    grid = qd.make_grid(X, sys.tau, points)
    cont = qd.integrate_grid(lambda x: np.abs(F(x) / abs_E(sys, x)) ** p, grid)
    cont += qd.sin_power_mean(p) * _kernel_tail_mean(dec, p, X, dec.amp)
    return MZRecord(sys.tau, p, disc, cont, cont / disc, disc / cont)


def run_mz_sweep(
    base: HBSystem,
    taus,
    p: float,
    test_function: str = "kernel",
    w0: float = 0.37,
    factor: float = 10.0,
    unit_window: float = 2000.0,
    workers: int = 1,
) -> MZReport:
    """Lower/upper MZ ratios across tau; success iff each ratio's max/min < factor."""
    if base.family is Family.BESSEL:
        qd.check_admissible(p, base.nu)

    def one(tau):
        sys = base.with_tau(tau)
        if test_function == "kernel":
            F = kernel_section(sys, w0)
        elif test_function == "sinc":
            F = sinc_function(tau)
        else:
            raise ConfigError(f"unknown MZ test function '{test_function}'")
        return mz_point(sys, F, p, unit_window)

    recs = tuple(_map(one, sorted(taus), workers))
    lo = np.array([r.lower_ratio for r in recs])
    up = np.array([r.upper_ratio for r in recs])
    ls, us = float(lo.max() / lo.min()), float(up.max() / up.min())
    ok = bool(np.all(np.isfinite(lo)) and np.all(lo > 0) and ls < factor and us < factor)
    tf = f"kernel(w0={w0:g})" if test_function == "kernel" else "sinc(tau x)/(tau x)"
    return MZReport(base.label(), tf, recs, factor, ls, us, ok)


# --------------------------------------------------------- reproducing identity


@dataclass(frozen=True)
class ReproducingResult:
    w0: float
    S_value: float
    K_diag: float
    deviation: float
    relative_deviation: float
    tail: float
    success: bool


def run_reproducing_check(sys: HBSystem, w0: float, unit_window: float = 2e4, points: int = 16, tol: float = 1e-6) -> ReproducingResult:
    """S_E(K(w0, .), w0) = integral of K(w0,u)^2 / |E(u)|^2 du against K(w0, w0).

    The integral over |u| > X is the mean-value tail (|E(w0)|/pi)^2 / 2 *
    sum 1/(X -+ w0); its own error is O(tail / (tau X)), reported in ``tail``.
    """
    F = kernel_section(sys, w0)
    kd = float(F(np.array([w0]))[0])
    X = unit_window / sys.tau
    if X <= 2 * abs(w0):
        raise ConfigError("window too small for the kernel centre")
    grid = qd.make_grid(X, sys.tau, points)
    S = qd.integrate_grid(lambda u: (F(u) / abs_E(sys, u)) ** 2, grid)
    tail = qd.sin_power_mean(2.0) * _kernel_tail_mean(F.decay, 2.0, X, F.decay.amp)
    S += tail
    resid = 4.0 * tail * math.pi / (sys.tau * (X - abs(w0)))
    dev = abs(S - kd)
    rel = dev / abs(kd)
    return ReproducingResult(w0, S, kd, dev, rel, resid, bool(dev <= tol * abs(kd) + resid))


# ------------------------------------------------------------ convergence


@dataclass(frozen=True)
class ConvergenceRecord:
    tau: float
    weighted_error: float
    tail_budget: float
    nodes_used: int
    origin_integral: float = float("nan")
    value_residual: float = float("nan")
    derivative_residual: float = float("nan")
    derivative_damping: float = float("nan")


@dataclass(frozen=True)
class ConvergenceReport:
    kind: str
    system: str
    target: str
    weight_mode: str
    p: float
    records: tuple[ConvergenceRecord, ...]
    reference: ConvergenceRecord | None = None
    extra: dict = field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.weighted_error for r in self.records])

    @property
    def strictly_decreasing(self) -> bool:
        e = self.errors
        return bool(np.all(np.diff(e) < 0))

    @property
    def damping_ratios(self) -> np.ndarray:
        d = np.array([r.derivative_damping for r in self.records])
        return d[1:] / d[:-1]


def _moment_bound(c: np.ndarray, t: np.ndarray, x: np.ndarray, n: int, squared: bool) -> np.ndarray:
    """Bound of |sum c_t / (x - t)| (or / (x - t)^2) for |x| > T = max|t|, by the
    moment expansion with n terms and an explicit remainder."""
    T = float(np.max(np.abs(t)))
    ax = np.abs(x)
    tm = np.ones_like(t)
    s = np.zeros_like(x)
    for m in range(n):
        M = float(np.sum(c * tm))
        if squared:
            s += (m + 1) * M / x ** (m + 2)
        else:
            s += M / x ** (m + 1)
        tm = tm * t
    Qn = float(np.sum(np.abs(c) * np.abs(t) ** n))
    if squared:
        Qn1 = float(np.sum(np.abs(c) * np.abs(t) ** (n + 1)))
        rem = (n + 1) * Qn / (ax ** (n + 1) * (ax - T)) + Qn1 / (ax ** (n + 1) * (ax - T) ** 2)
    else:
        rem = Qn / (ax**n * (ax - T))
    return np.abs(s) + rem


def _effective_weight(sys: HBSystem, mode: str, power: int):
    if mode == "smoothed":
        return lambda x: abs_E(sys, x) ** (-power)
    wd = sys.weight_descriptor
    return lambda x: wd(x) ** power


def _sandwich_sup(sys: HBSystem, mode: str, X: float, power: int) -> float:
    """sup over |x| >= X of |B(x)|^power * w_eff(x) (sampled with margin)."""
    if mode == "smoothed":
        return 1.0
    x = np.concatenate([np.linspace(X, 10 * X, 4001), -np.linspace(X, 10 * X, 4001)])
    d = eval_E(sys, x)
    wd = sys.weight_descriptor
    return 1.25 * float(np.max((np.hypot(d.A, d.B) * wd(x)) ** power))


def _outer_tail(fn, X: float, p: float) -> float:
    total = 0.0
    for sgn in (1.0, -1.0):
        v, _ = integrate.quad(lambda u: float(fn(np.array([sgn * u]))[0]) ** p, X, np.inf, limit=200)
        total += v
    return total


def _check_class(f: TargetFunction, p: float, sys: HBSystem, power: int):
    wd = sys.weight_descriptor
    if power == 2:
        wd = WeightDescriptor(wd.kind, 2 * wd.exponent) if wd.kind is WeightKind.POWER else wd
    if not f.claims(p, wd):
        raise ClassMismatch(f"target '{f.id}' is not claimed in R_p(w) for p = {p:g}, w = {wd.label()}")


def convergence_point(
    sys: HBSystem,
    f: TargetFunction,
    p: float,
    weight_mode: str = "target",
    hermite: bool = False,
    radius: float | None = None,
    points: int = 16,
    moment_terms: int = 12,
    X: float | None = None,
) -> ConvergenceRecord:
    """One tau of a convergence sweep.

    Nodes with |t| <= R enter the series (R = where f falls below 1e-20, or
    ``radius`` for slowly decaying targets). The error integral runs over
    |x| <= 2R; beyond, the tail budget combines the decay of f, a moment
    bound for the series, and the probe-ring truncation estimate.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
    power = 2 if hermite else 1
    if sys.family is Family.BESSEL:
        qd.check_admissible(p, sys.nu)
    _check_class(f, p, sys, power)
    R = f.decay.radius(1e-20)
    if R is None or radius is not None:
        R = radius if radius is not None else 50.0
    R = max(R, 8.0 * math.pi / sys.tau)
    tau = sys.tau
    ring = 64
    ns = find_nodes(sys, (-(R + 1.5 * (ring + 4) * math.pi / tau), R + 1.5 * (ring + 4) * math.pi / tau))
    pol = TruncationPolicy(radius=R, probe_ring=ring, safe_fraction=None)
    ev = hermite_eval if hermite else lagrange_eval
    weff = _effective_weight(sys, weight_mode, power)
    X = 2.0 * R if X is None else float(X)
    if X < R:
        raise ConfigError(f"quadrature X = {X:g} must cover the retained radius {R:g}")
    wd = sys.weight_descriptor
    s = wd.origin_exponent
    origin = p * power * s if (weight_mode == "target" and s is not None) else None
    grid = qd.make_grid(X, tau, points, origin_exponent=origin)
    xg, wq = grid.rule
    sv = ev(sys, ns, f, xg, pol)
    ww = weff(xg)
    err_mass = math.fsum((np.abs(f(xg) - sv.value) * ww) ** p * wq)
    trunc = math.fsum(((sv.tail_bound + sv.rounding) * ww) ** p * wq) ** (1.0 / p)
    keep = (np.abs(ns.nodes) <= R)
    t = ns.nodes[keep]
    d = eval_E(sys, t)
    b1 = np.asarray(d.B1)
    ft = f(t)
    # outer region |x| > X
    tail_f = qd._envelope_tail(f.decay, weff, p, X)
    mw = _sandwich_sup(sys, weight_mode, X, power)
    if hermite:
        beta = np.asarray(d.B2) / b1
        dd = ft / b1**2
        ee = (f.deriv(t) - beta * ft) / b1**2

        def gfun(x):
            return mw * (_moment_bound(dd, t, x, moment_terms, True) + _moment_bound(ee, t, x, moment_terms, False))
    else:
        cc = ft / b1

        def gfun(x):
            return mw * _moment_bound(cc, t, x, moment_terms, False)

    tail_l = _outer_tail(gfun, X, p)
    budget = trunc + tail_f ** (1.0 / p) + tail_l ** (1.0 / p)
    rec = dict(tau=tau, weighted_error=err_mass ** (1.0 / p), tail_budget=budget, nodes_used=int(sv.nodes_used))
    if not hermite:
        rec["origin_integral"] = origin_integral(sys, ns, f, pol, p)
    else:
        tt = t[np.abs(t) <= R]
        hv = hermite_eval(sys, ns, f, tt, pol).value
        h = 1e-5
        dh = (hermite_eval(sys, ns, f, tt + h, pol).value - hermite_eval(sys, ns, f, tt - h, pol).value) / (2 * h)
        fp = f.deriv(tt)
        rec["value_residual"] = float(np.max(np.abs(hv - f(tt))))
        rec["derivative_residual"] = float(np.max(np.abs(dh - fp) / np.maximum(1.0, np.abs(fp))))
        w2 = weff(tt) if weight_mode == "target" else 1.0 / np.asarray(eval_E(sys, tt).A) ** 2
        rec["derivative_damping"] = (1.0 / tau) * (math.fsum(np.abs(fp * w2) ** p) / tau) ** (1.0 / p)
    log.info("%s %s tau=%g error=%.3e budget=%.3e", "hermite" if hermite else "lagrange", f.id, tau, rec["weighted_error"], budget)
    return ConvergenceRecord(**rec)


def origin_integral(sys: HBSystem, ns, f: TargetFunction, pol: TruncationPolicy, p: float = 2.0, panels: int = 8) -> float:
    """Integral of |L f / E|^p over |x| <= 1/tau."""
    r = 1.0 / sys.tau
    grid = qd.QuadratureGrid(np.stack([np.linspace(-r, r, panels + 1)[:-1], np.linspace(-r, r, panels + 1)[1:]], 1), 16, r)
    x, w = grid.rule
    v = lagrange_eval(sys, ns, f, x, pol).value
    return math.fsum(np.abs(v / abs_E(sys, x)) ** p * w)


def _sweep(base, f, p, taus, weight_mode, hermite, reference_tau, radius, workers, kind, points=16, X=None):
    taus = sorted(float(t) for t in taus)

    def one(tau):
        return convergence_point(base.with_tau(tau), f, p, weight_mode, hermite, radius, points, X=X)

    recs = _map(one, taus, workers)
    ref = one(float(reference_tau)) if reference_tau else None
    label = base.with_tau(taus[0]).label()
    return ConvergenceReport(kind, label, f.id, weight_mode, p, tuple(recs), ref)


def run_lagrange_convergence(
    base: HBSystem,
    weight_mode: str,
    f: TargetFunction,
    p: float,
    taus,
    reference_tau: float | None = None,
    radius: float | None = None,
    workers: int = 1,
    points: int = 16,
    X: float | None = None,
) -> ConvergenceReport:
    return _sweep(base, f, p, taus, weight_mode, False, reference_tau, radius, workers, "lagrange", points, X)


def run_hermite_convergence(
    base: HBSystem,
    f: TargetFunction,
    p: float,
    taus,
    weight_mode: str = "smoothed",
    reference_tau: float | None = None,
    radius: float | None = None,
    workers: int = 1,
    points: int = 16,
    X: float | None = None,
) -> ConvergenceReport:
    if f.deriv is None:
        raise ConfigError("Hermite convergence needs a target with a derivative")
    return _sweep(base, f, p, taus, weight_mode, True, reference_tau, radius, workers, "hermite", points, X)


def run_hbweight_convergence(
    w: str,
    f: TargetFunction,
    p: float,
    taus,
    reference_tau: float | None = None,
    radius: float | None = None,
    workers: int = 1,
    points: int = 16,
    X: float | None = None,
    tau0: float = 1.0,
) -> ConvergenceReport:
    """Lagrange sweep on E = W exp(-i (tau - tau0) z) with weight 1/|W| (= 1/|E|)."""
    base = HBSystem.expw(max(tau0, min(taus)), w, tau0)
    return run_lagrange_convergence(base, "target", f, p, taus, reference_tau, radius, workers, points, X)


# ------------------------------------------------------------ node identities


def bessel_zeros(nu: float, tau: float, X: float) -> np.ndarray:
    """Positive zeros of J_nu(tau x) on (0, X], by scanning and Brent refinement."""
    u = np.linspace(1e-3, tau * X, int(tau * X * 8) + 16)
    j = special.jv(nu, u)
    idx = np.flatnonzero(np.sign(j[:-1]) * np.sign(j[1:]) < 0)
    roots = [optimize.brentq(lambda v: special.jv(nu, v), u[i], u[i + 1], xtol=1e-15, rtol=1e-15) for i in idx]
    return np.array(roots) / tau


def gr_node_identity(nu: float, tau: float, X: float = 20.0) -> float:
    """max |node - zero of J_nu(tau .)| for the alpha = 1/2 system (inf on count mismatch)."""
    sys = HBSystem.bessel(nu, tau, 0.5)
    ns = find_nodes(sys, (-X, X))
    z = bessel_zeros(nu, tau, X)
    ref = np.sort(np.concatenate([-z, z]))
    if ref.size != len(ns):
        return float("inf")
    return float(np.max(np.abs(ns.nodes - ref)))


def sandwich_bracket(base: HBSystem, tau: float, X: float = 50.0, n: int = 20001) -> tuple[float, float]:
    """min and max of |x|^(nu+1/2) |E_tau(x)| over 1/tau <= |x| <= X."""
    sys = base.with_tau(tau)
    x = np.geomspace(1.0 / tau, X, n)
    r = sys.weight_descriptor(x) * abs_E(sys, x)
    return float(r.min()), float(r.max())


def phase_rate_bracket(base: HBSystem, tau: float, X: float = 50.0) -> tuple[float, float]:
    """min and max of phi'_tau(x) / tau over [-X, X]."""
    from .systems import phase_derivative

    sys = base.with_tau(tau)
    x = np.linspace(-X, X, int(2 * X * tau * 8) + 1)
    r = phase_derivative(sys, x) / tau
    return float(r.min()), float(r.max())


def weight_mode_ratio(sys: HBSystem, f: TargetFunction, p: float = 2.0, X: float | None = None) -> float:
    """Ratio of Target-mode to SmoothedE-mode error integrals restricted to |x| >= 1/tau."""
    R = f.decay.radius(1e-20) or 20.0
    ns = find_nodes(sys, (-(R + 110 * math.pi / sys.tau), R + 110 * math.pi / sys.tau))
    pol = TruncationPolicy(radius=R, safe_fraction=None)
    X = X or 2 * R
    grid = qd.make_grid(X, sys.tau, 16)
    x, w = grid.rule
    m = np.abs(x) >= 1.0 / sys.tau
    x, w = x[m], w[m]
    e = np.abs(f(x) - lagrange_eval(sys, ns, f, x, pol).value) ** p
    tgt = math.fsum(e * sys.weight_descriptor(x) ** p * w)
    smo = math.fsum(e * abs_E(sys, x) ** (-p) * w)
    return tgt / smo


def record_dict(rec) -> dict:
    return asdict(rec)
