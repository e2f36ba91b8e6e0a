"""Lagrange and Hermite interpolation series on the zeros of B.

    L f(z) = sum_t f(t) B(z) / (B'(t) (z - t))
    H f(z) = sum_t f(t) U(t, z) + f'(t) V(t, z)

with U = l^2 (1 - 2 K'(t,t)/K(t,t) (z - t)), V = l^2 (z - t) and
l = K(t, z) / K(t, t) = B(z) / (B'(t) (z - t)) at nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PolicyError
from .nodes import NodeSet
from .systems import HBSystem, default_near_threshold, eval_E, kernel, kernel_diag, kernel_diag_prime, phase_derivative
from .targets import TargetFunction

TAIL_MODES = ("direct_sum", "holder_bound")
_EPS = np.finfo(float).eps
_BLOCK = 1 << 22


@dataclass(frozen=True)
class TruncationPolicy:
    """Which nodes enter the partial sum, and how the omitted part is bounded.

    node_window: nodes per side of index 0 (k = -n .. n); radius: keep |t| <= radius.
    With neither set, every node except the probe rings is retained.
    safe_fraction: z must lie in this inner fraction of the retained span
    (None disables the check for callers that account for edge effects).
    """

    node_window: int | None = None
    radius: float | None = None
    near_threshold: float | None = None
    tail_mode: str = "direct_sum"
    probe_ring: int = 64
    holder_p: float = 2.0
    safe_fraction: float | None = 0.8

    def __post_init__(self):
        if self.tail_mode not in TAIL_MODES:
            raise PolicyError(f"tail_mode must be one of {TAIL_MODES}")
        if self.node_window is not None and self.node_window < 8:
            raise PolicyError("node_window must be >= 8")
        if self.node_window is not None and self.radius is not None:
            raise PolicyError("give node_window or radius, not both")
        if self.probe_ring < 1:
            raise PolicyError("probe_ring must be >= 1")
        if self.near_threshold is not None and not self.near_threshold > 0:
            raise PolicyError("near_threshold must be positive")
        if not self.holder_p > 1:
            raise PolicyError("holder_p must exceed 1")

    def threshold(self, ns: NodeSet) -> float:
        thr = default_near_threshold(ns.tau) if self.near_threshold is None else self.near_threshold
        if len(ns) > 1 and not thr < 0.25 * float(np.min(np.diff(ns.nodes))):
            raise PolicyError("near_threshold must be below a quarter of the node spacing")
        return thr


@dataclass(frozen=True)
class SeriesValue:
    value: np.ndarray
    tail_bound: np.ndarray
    nodes_used: int
    rounding: np.ndarray


def _select(ns: NodeSet, pol: TruncationPolicy) -> tuple[slice, slice, slice]:
    n = len(ns)
    ring = pol.probe_ring
    if pol.node_window is not None:
        k = ns.indices
        lo = int(np.searchsorted(k, -pol.node_window))
        hi = int(np.searchsorted(k, pol.node_window, side="right"))
        if k[0] > -pol.node_window or k[-1] < pol.node_window:
            raise PolicyError("node set too small for node_window")
    elif pol.radius is not None:
        lo = int(np.searchsorted(ns.nodes, -pol.radius, side="left"))
        hi = int(np.searchsorted(ns.nodes, pol.radius, side="right"))
    else:
        lo, hi = ring, n - ring
    if hi - lo < 8:
        raise PolicyError("node set too small for policy: fewer than 8 retained nodes")
    if lo < ring or n - hi < ring:
        raise PolicyError(
            f"node set too small for policy: need {ring} probe nodes beyond the retained window "
            f"(have {lo} left, {n - hi} right)"
        )
    return slice(lo, hi), slice(lo - ring, lo), slice(hi, hi + ring)


class _Prepared:
    """Per-node data shared by all evaluation points."""

    def __init__(self, sys: HBSystem, ns: NodeSet, f: TargetFunction, pol: TruncationPolicy, hermite: bool):
        if hermite and f.deriv is None:
            raise PolicyError(f"target '{f.id}' has no derivative; Hermite series needs f'")
        self.sys, self.ns, self.pol, self.hermite = sys, ns, pol, hermite
        self.thr = pol.threshold(ns)
        keep, left, right = _select(ns, pol)
        self.t = ns.nodes[keep]
        self.ring = np.concatenate([ns.nodes[left], ns.nodes[right]])
        self.span = (self.t[0], self.t[-1])
        self.data = self._node_data(self.t, f)
        self.ring_data = self._node_data(self.ring, f)

    def _node_data(self, t, f):
        d = eval_E(self.sys, t)
        out = {"B1": np.asarray(d.B1), "B2": np.asarray(d.B2), "B3": np.asarray(d.B3), "A": np.asarray(d.A)}
        out["f"] = np.asarray(f(t), dtype=float)
        if self.hermite:
            out["df"] = np.asarray(f.deriv(t), dtype=float)
            out["beta"] = 2.0 * np.asarray(kernel_diag_prime(self.sys, t)) / np.asarray(kernel_diag(self.sys, t))
        return out

    def check_safe(self, z: np.ndarray) -> None:
        if self.pol.safe_fraction is None:
            return
        m = 0.5 * (self.span[0] + self.span[1])
        h = 0.5 * (self.span[1] - self.span[0]) * self.pol.safe_fraction
        if np.any(np.abs(z - m) > h * (1 + 1e-12)):
            raise PolicyError(
                f"z outside safe region [{m - h:g}, {m + h:g}] of the retained node window"
            )


def _bz(sys: HBSystem, z: np.ndarray, t: np.ndarray, data: dict, thr: float):
    """B(z), replaced by its Taylor expansion around the nearest node when within thr.

    Returns (Bz, index of nearest node, offset, near mask)."""
    bz = np.asarray(eval_E(sys, z).B, dtype=float)
    j = np.clip(np.searchsorted(t, z), 1, len(t) - 1)
    j = np.where(np.abs(z - t[j - 1]) <= np.abs(z - t[j]), j - 1, j)
    h = z - t[j]
    near = np.abs(h) < thr
    taylor = h * (data["B1"][j] + h * (data["B2"][j] / 2.0 + h * data["B3"][j] / 6.0))
    return np.where(near, taylor, bz), j, h, near


def _terms(prep: _Prepared, z: np.ndarray, bz: np.ndarray, t: np.ndarray, data: dict):
    """Matrix of series terms (rows z, columns nodes)."""
    d = z[:, None] - t[None, :]
    own = np.abs(d) < prep.thr
    b1, b2, b3 = data["B1"], data["B2"], data["B3"]
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = bz[:, None] / (b1[None, :] * d)
    ell_own = 1.0 + d * (b2[None, :] / (2.0 * b1[None, :]) + d * b3[None, :] / (6.0 * b1[None, :]))
    ell = np.where(own, ell_own, ell)
    if not prep.hermite:
        return data["f"][None, :] * ell
    l2 = ell * ell
    u = l2 * (1.0 - data["beta"][None, :] * d)
    v = l2 * d
    return data["f"][None, :] * u + data["df"][None, :] * v


def _extrapolate(t: np.ndarray, mags: np.ndarray, tau: float) -> np.ndarray:
    """Sum of term magnitudes beyond the ring, from a log-log power-law fit.

    t: ring nodes ordered by increasing |t|; mags: (rows, len(t)). The fitted
    law C |t|^(-beta) is integrated against the node density tau/pi from half a
    spacing past the last ring node, with a safety factor of 2.
    """
    mags = np.atleast_2d(mags)
    n = t.size
    if n < 4:
        return np.zeros(mags.shape[0])
    x = np.log(np.abs(t))
    zero = np.any(mags <= 0, axis=1)
    with np.errstate(divide="ignore"):
        y = np.log(np.where(mags > 0, mags, 1.0))
    xc = x - x.mean()
    slope = (y - y.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
    beta = -slope
    tl = abs(float(t[-1]))
    fit_last = np.exp(y.mean(axis=1) + slope * (x[-1] - x.mean()))
    start = tl + 0.5 * math.pi / tau
    with np.errstate(over="ignore"):
        est = 2.0 * (tau / math.pi) * fit_last * tl * (tl / start) ** (beta - 1.0) / np.maximum(beta - 1.0, 0.05)
    return np.where(zero, 0.0, est)


def _direct_tail(prep: _Prepared, z: np.ndarray, bz: np.ndarray) -> np.ndarray:
    rd = prep.ring_data
    tr = prep.ring
    mags = np.abs(_terms_far(prep, z, bz, tr, rd))
    nl = tr.size // 2
    out = mags.sum(axis=1)
    for part in (slice(0, nl), slice(nl, None)):
        tp = tr[part]
        order = np.argsort(np.abs(tp))
        out += _extrapolate(tp[order], mags[:, part][:, order], prep.sys.tau)
    return out


def _terms_far(prep, z, bz, t, data):
    d = z[:, None] - t[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = bz[:, None] / (data["B1"][None, :] * d)
    ell = np.where(np.abs(d) < prep.thr, 1.0, ell)
    if not prep.hermite:
        return data["f"][None, :] * ell
    l2 = ell * ell
    return np.abs(data["f"][None, :] * l2 * (1.0 - data["beta"][None, :] * d)) + np.abs(
        data["df"][None, :] * l2 * d
    )


def _holder_tail(prep: _Prepared, z: np.ndarray, bz: np.ndarray) -> np.ndarray:
    """Hoelder estimate: (sum (1/phi')|c|^p)^(1/p) (sum (1/phi')|B(z)/(z-t)|^q)^(1/q) over
    excluded nodes; the second factor uses the integral bound (2/pi) d^(1-q)/(q-1) with d
    the distance from z to the edge of the retained window."""
    p = prep.pol.holder_p
    q = p / (p - 1.0)
    rd = prep.ring_data
    tr = prep.ring
    c = rd["f"] / rd["A"]
    if prep.hermite:
        c = np.abs(c) + np.abs(rd["df"] / rd["A"] ** 2)
    dens = 1.0 / phase_derivative(prep.sys, tr)
    cp = dens * np.abs(c) ** p
    nl = tr.size // 2
    sp = cp.sum()
    for part in (slice(0, nl), slice(nl, None)):
        tp = tr[part]
        order = np.argsort(np.abs(tp))
        sp += float(_extrapolate(tp[order], (cp[part])[order] * prep.sys.tau / math.pi, prep.sys.tau)[0])
    dist = np.minimum(z - prep.span[0], prep.span[1] - z)
    dist = np.maximum(dist, math.pi / prep.sys.tau)
    sq = np.abs(bz) ** q * 2.0 * dist ** (1.0 - q) / (math.pi * (q - 1.0))
    return sp ** (1.0 / p) * sq ** (1.0 / q)


def _evaluate(sys, ns, f, z, pol, hermite) -> SeriesValue:
    pol = pol or TruncationPolicy()
    prep = _Prepared(sys, ns, f, pol, hermite)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    prep.check_safe(z)
    val = np.empty(z.shape)
    tail = np.empty(z.shape)
    rnd = np.empty(z.shape)
    nt = prep.t.size
    rows = max(1, _BLOCK // max(nt, 1))
    for s in range(0, z.size, rows):
        zc = z[s : s + rows]
        bz, _, _, _ = _bz(sys, zc, prep.t, prep.data, prep.thr)
        m = _terms(prep, zc, bz, prep.t, prep.data)
        val[s : s + rows] = m.sum(axis=1)
        rnd[s : s + rows] = 4.0 * _EPS * (1.0 + math.log2(nt)) * np.abs(m).sum(axis=1)
        if pol.tail_mode == "direct_sum":
            tail[s : s + rows] = _direct_tail(prep, zc, bz)
        else:
            tail[s : s + rows] = _holder_tail(prep, zc, bz)
    return SeriesValue(val, tail, nt, rnd)


def lagrange_eval(sys: HBSystem, ns: NodeSet, f: TargetFunction, z, pol: TruncationPolicy | None = None) -> SeriesValue:
    """Partial sum of the Lagrange series at real z (vectorized)."""
    return _evaluate(sys, ns, f, z, pol, hermite=False)


def hermite_eval(sys: HBSystem, ns: NodeSet, f: TargetFunction, z, pol: TruncationPolicy | None = None) -> SeriesValue:
    """Partial sum of the Hermite series at real z (vectorized); needs f.deriv."""
    return _evaluate(sys, ns, f, z, pol, hermite=True)


@dataclass(frozen=True)
class ReproduceResult:
    max_deviation: float
    max_excess: float
    max_tail: float
    success: bool


def reproduce_check(
    sys: HBSystem, ns: NodeSet, F: TargetFunction, pol: TruncationPolicy | None = None, zgrid=None, tol: float = 1e-6
) -> ReproduceResult:
    """max over zgrid of |F(z) - sum F(t) K(t,z)/K(t,t)|, with the kernels from
    the system module, against the Lagrange tail bound."""
    pol = pol or TruncationPolicy()
    keep, _, _ = _select(ns, pol)
    t = ns.nodes[keep]
    if zgrid is None:
        m, h = 0.5 * (t[0] + t[-1]), 0.4 * (t[-1] - t[0])
        zgrid = np.linspace(m - h, m + h, 201)
    z = np.asarray(zgrid, dtype=float)
    thr = pol.threshold(ns)
    ft = F(t) / kernel_diag(sys, t)
    s = np.array([np.sum(ft * kernel(sys, t, zi, thr).value) for zi in z])
    dev = np.abs(F(z) - s)
    tail = lagrange_eval(sys, ns, F, z, pol)
    excess = dev - tail.tail_bound - tail.rounding
    mx = float(np.max(excess))
    return ReproduceResult(float(dev.max()), mx, float(tail.tail_bound.max()), bool(mx <= tol))
