"""Zeros of B inside a window: the interpolation nodes."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NodeSearchError
from .systems import HBSystem, eval_E, phase_derivative

log = logging.getLogger(__name__)

MAX_NEWTON = 50
MAX_BISECT = 200


@dataclass(frozen=True)
class NodeSet:
    nodes: np.ndarray
    window: tuple[float, float]
    tau: float
    residuals: np.ndarray

    def __post_init__(self):
        for name in ("nodes", "residuals"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def indices(self) -> np.ndarray:
        """k = 0 at the smallest non-negative node, negative to the left."""
        k0 = int(np.searchsorted(self.nodes, 0.0, side="left"))
        return np.arange(len(self.nodes)) - k0

    @property
    def spacings_times_tau(self) -> np.ndarray:
        return np.diff(self.nodes) * self.tau


@dataclass(frozen=True)
class SpacingReport:
    min: float
    max: float
    mean: float
    flagged: bool
    flagged_indices: tuple[int, ...]


def _sup_phase_rate(sys: HBSystem, lo: float, hi: float) -> float:
    n = max(64, int(math.ceil((hi - lo) * sys.tau / (math.pi / 16.0))) + 1)
    xs = np.linspace(lo, hi, n)
    return float(np.max(phase_derivative(sys, xs)))


def _refine(sys: HBSystem, a: np.ndarray, b: np.ndarray, fa: np.ndarray) -> np.ndarray:
    """Safeguarded Newton on brackets [a, b] with sign(B(a)) = sign(fa) != sign(B(b))."""
    x = 0.5 * (a + b)
    done = np.zeros(x.shape, dtype=bool)
    tiny = 4.0 * np.finfo(float).eps
    for it in range(MAX_NEWTON + MAX_BISECT):
        act = ~done
        if not np.any(act):
            break
        xa = x[act]
        d = eval_E(sys, xa)
        fx = np.asarray(d.B)
        same = np.sign(fx) == np.sign(fa[act])
        aa = np.where(same, xa, a[act])
        bb = np.where(same, b[act], xa)
        a[act], b[act] = aa, bb
        if it < MAX_NEWTON:
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = xa - fx / np.asarray(d.B1)
            lo = np.minimum(aa, bb)
            hi = np.maximum(aa, bb)
            bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
            xn = np.where(bad, 0.5 * (aa + bb), xn)
        else:
            xn = 0.5 * (aa + bb)
        scale = np.maximum(np.abs(xa), 1.0 / sys.tau)
        conv = (fx == 0) | (np.abs(xn - xa) <= tiny * scale) | (np.abs(bb - aa) <= tiny * scale)
        x[act] = np.where(fx == 0, xa, xn)
        idx = np.flatnonzero(act)
        done[idx[conv]] = True
    if not np.all(done):
        raise NodeSearchError(f"{int((~done).sum())} nodes failed to converge")
    return _polish(sys, x)


def _polish(sys: HBSystem, x: np.ndarray, steps: int = 3) -> np.ndarray:
    """A few extra Newton steps, keeping the iterate with the smallest |B|."""
    d = eval_E(sys, x)
    best = x.copy()
    res = np.abs(np.asarray(d.B))
    cur = x
    for _ in range(steps):
        with np.errstate(divide="ignore", invalid="ignore"):
            cur = cur - np.asarray(d.B) / np.asarray(d.B1)
        cur = np.where(np.isfinite(cur) & (np.abs(cur - x) < 1e-6 * np.maximum(1.0, np.abs(x))), cur, x)
        d = eval_E(sys, cur)
        r = np.abs(np.asarray(d.B))
        better = r < res
        best = np.where(better, cur, best)
        res = np.where(better, r, res)
    return best


def _brackets(sys: HBSystem, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    fb = np.asarray(eval_E(sys, xs).B)
    s = np.sign(fb)
    change = np.flatnonzero(s[:-1] * s[1:] < 0)
    return xs[change], xs[change + 1], fb[change], xs[fb == 0]


def find_nodes(sys: HBSystem, window, workers: int = 1) -> NodeSet:
    """Zeros of B in the window: sign changes of B on a grid finer than a
    quarter of the local node spacing, refined by safeguarded Newton.

    The grid does not depend on ``workers``; brackets are split across
    threads, so the result is identical for any worker count.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi - lo >= 2 * math.pi / sys.tau * (1 - 1e-12):
        raise ValueError(f"window length must be at least 2 pi / tau = {2 * math.pi / sys.tau:g}")
    rate = 1.25 * _sup_phase_rate(sys, lo, hi)
    step = math.pi / (4.0 * rate)
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    a, b, fa, exact = _brackets(sys, xs)
    workers = max(1, int(workers))
    if workers == 1 or a.size < 2 * workers:
        parts = [_refine(sys, a, b, fa)] if a.size else []
    else:
        cuts = np.array_split(np.arange(a.size), workers)
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda idx: _refine(sys, a[idx], b[idx], fa[idx]), cuts))
    t = np.sort(np.concatenate(parts + [exact]))
    if t.size > 1:
        keep = np.concatenate([[True], np.diff(t) > 1e-9 / sys.tau])
        t = t[keep]
    t = t[(t >= lo) & (t <= hi)]
    res = np.abs(np.asarray(eval_E(sys, t).B)) if t.size else np.zeros(0)
    log.debug("find_nodes %s on [%g, %g]: %d nodes, scan step %g", sys.label(), lo, hi, t.size, step)
    return NodeSet(t, (lo, hi), sys.tau, res)


def spacing_report(ns: NodeSet) -> SpacingReport:
    if len(ns) < 3:
        raise ValueError("spacing report needs at least 3 nodes")
    s = ns.spacings_times_tau
    k = ns.indices[:-1]
    far = np.abs(k) >= 10
    dev = np.abs(s - math.pi) > 0.25 * math.pi
    bad = np.flatnonzero(far & dev)
    return SpacingReport(
        float(s.min()), float(s.max()), float(s.mean()), bool(bad.size), tuple(int(i) for i in k[bad])
    )


def phase_increment(sys: HBSystem, a, b, points: int = 16):
    """phi(b) - phi(a) by composite Gauss-Legendre on phi' (vectorized over intervals)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    width = math.pi / (2.0 * sys.tau)
    xg, wg = np.polynomial.legendre.leggauss(points)
    out = np.empty(a.shape)
    for i, (lo, hi) in enumerate(zip(a, b)):
        m = max(1, int(math.ceil(abs(hi - lo) / width)))
        e = np.linspace(lo, hi, m + 1)
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        vals = phase_derivative(sys, x).reshape(m, points)
        out[i] = math.fsum((vals @ wg) * half)
    return out


def phase_count_gap(sys: HBSystem, ns: NodeSet) -> float:
    """|Delta phi / pi - node count| over the window."""
    lo, hi = ns.window
    return float(abs(phase_increment(sys, lo, hi)[0] / math.pi - len(ns)))


def consecutive_phase_steps(sys: HBSystem, ns: NodeSet) -> np.ndarray:
    """Phase increase between consecutive nodes divided by pi (should all be 1)."""
    return phase_increment(sys, ns.nodes[:-1], ns.nodes[1:]) / math.pi


def interlacing_counts(sys: HBSystem, ns: NodeSet, samples: int = 16) -> np.ndarray:
    """Number of sign changes of A strictly between consecutive nodes."""
    t = ns.nodes
    u = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    x = t[:-1, None] + (t[1:] - t[:-1])[:, None] * u[None, :]
    a = np.asarray(eval_E(sys, x.ravel()).A).reshape(x.shape)
    s = np.sign(a)
    return np.sum(s[:, :-1] * s[:, 1:] < 0, axis=1)
