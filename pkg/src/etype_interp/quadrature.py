"""Weighted L^p norms by composite Gauss rules, and discrete MZ functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, PolicyError, TailUnavailable
from .nodes import NodeSet
from .systems import HBSystem, WeightDescriptor, eval_E, phase_derivative

CHUNK = 1 << 16


@dataclass(frozen=True)
class LpExponent:
    p: float

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ConfigError(f"p must satisfy 1 < p < inf, got {self.p}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)


def check_admissible(p: float, nu: float | None) -> None:
    """Range restriction for power weights with -1 < nu < -1/2: p < 1/|nu + 1/2|."""
    LpExponent(p)
    if nu is not None and -1.0 < nu < -0.5:
        bound = 1.0 / abs(nu + 0.5)
        if not p < bound:
            raise ConfigError(
                f"(nu, p) = ({nu:g}, {p:g}) not admissible: need p < 1/|nu+1/2| = {bound:g}"
            )


def sin_power_mean(p: float) -> float:
    """Mean value of |sin|^p over a period."""
    return math.exp(math.lgamma((p + 1) / 2) - math.lgamma(p / 2 + 1)) / math.sqrt(math.pi)


@dataclass(frozen=True)
class QuadratureGrid:
    panels: np.ndarray
    points_per_panel: int
    X: float
    origin_exponent: float | None = None
    tail_estimate: float = 0.0

    def __post_init__(self):
        if self.points_per_panel < 8:
            raise ValueError("points_per_panel must be >= 8")
        pan = np.array(self.panels, dtype=float)
        pan.setflags(write=False)
        object.__setattr__(self, "panels", pan)

    @cached_property
    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, w). Panels touching 0 under a power weight |x|^s carry
        Gauss-Jacobi weights divided by |x|^s, so a plain weighted sum of the
        full integrand integrates it exactly against the singular factor."""
        n = self.points_per_panel
        xg, wg = np.polynomial.legendre.leggauss(n)
        a, b = self.panels[:, 0], self.panels[:, 1]
        half = 0.5 * (b - a)
        x = (0.5 * (a + b))[:, None] + half[:, None] * xg[None, :]
        w = half[:, None] * wg[None, :]
        s = self.origin_exponent
        if s is not None:
            xj, wj = special.roots_jacobi(n, 0.0, s)
            for i in np.flatnonzero((a == 0) | (b == 0)):
                d = b[i] - a[i]
                if b[i] == 0:
                    # mirror: x = -d (1 + xi) / 2
                    xi = -0.5 * d * (1.0 + xj[::-1])
                    wi = wj[::-1]
                else:
                    xi = 0.5 * d * (1.0 + xj)
                    wi = wj
                x[i] = xi
                w[i] = wi * (0.5 * d) ** (1.0 + s) / np.abs(xi) ** s
        return x.ravel(), w.ravel()

    @property
    def size(self) -> int:
        return self.panels.shape[0] * self.points_per_panel

    def refined(self) -> "QuadratureGrid":
        return QuadratureGrid(self.panels, 2 * self.points_per_panel, self.X, self.origin_exponent, self.tail_estimate)


def make_grid(
    X: float,
    tau: float,
    points_per_panel: int = 16,
    origin_exponent: float | None = None,
    min_width: float = 1e-8,
    width: float | None = None,
) -> QuadratureGrid:
    """Symmetric panels on [-X, X] with 0 as an endpoint, geometrically refined
    towards 0 when a power weight is present."""
    h = min(1.0, math.pi / (2.0 * tau)) if width is None else width
    m = max(1, int(math.ceil(X / h)))
    e = np.linspace(0.0, X, m + 1)
    if origin_exponent is not None:
        first = e[1]
        g = [first]
        while g[-1] / 2.0 > min_width:
            g.append(g[-1] / 2.0)
        g.append(0.0)
        e = np.concatenate([np.array(g[::-1]), e[2:]])
    right = np.stack([e[:-1], e[1:]], axis=1)
    left = -right[::-1, ::-1]
    return QuadratureGrid(np.concatenate([left, right]), points_per_panel, float(X), origin_exponent)


def integrate_grid(fun, grid: QuadratureGrid) -> float:
    """sum of fun over the rule, reduced per panel with compensated summation."""
    x, w = grid.rule
    n = grid.points_per_panel
    sums = []
    step = (CHUNK // n) * n
    for s in range(0, x.size, step):
        v = np.asarray(fun(x[s : s + step]), dtype=float) * w[s : s + step]
        sums.append(v.reshape(-1, n).sum(axis=1))
    return math.fsum(np.concatenate(sums)) if sums else 0.0


def _envelope_tail(decay, w, p: float, X: float) -> float:
    """Bound on the integral of |g w|^p over |x| > X from decay metadata."""
    k = decay.kind
    if k == "zero":
        return 0.0
    if k == "compact":
        if X >= abs(decay.center) + decay.rate:
            return 0.0
        raise TailUnavailable("compact support extends beyond the quadrature window")
    if k == "kernel":
        lo = X - abs(decay.center)
        if lo <= 0:
            raise TailUnavailable("window does not contain the kernel centre")
        return 2.0 * decay.amp**p * lo ** (1.0 - p) / (p - 1.0)
    if k in ("gaussian", "rational", "bandlimited"):
        if k == "bandlimited" and X - abs(decay.center) < 1:
            raise TailUnavailable("window too small for the band-limited envelope")

        def dens(x):
            return float((decay.envelope(x) * w(x)) ** p)

        total = 0.0
        for sgn in (1.0, -1.0):
            val, _ = integrate.quad(lambda u: dens(sgn * u), X, np.inf, limit=200)
            total += val
        if not math.isfinite(total):
            raise TailUnavailable("envelope tail diverges")
        return total
    raise TailUnavailable(f"no tail bound for decay kind '{k}'")


def weighted_lp_norm(g, w, p, grid: QuadratureGrid, decay=None) -> tuple[float, float]:
    """(||g w||_p over the grid window, bound on the omitted mass over |x| > X).

    ``w`` is a WeightDescriptor or a callable; ``decay`` defaults to g.decay.
    The tail is reported as an integral of |g w|^p (p-th power units).
    """
    p = LpExponent(p).p if not isinstance(p, LpExponent) else p.p
    decay = decay if decay is not None else getattr(g, "decay", None)
    if decay is None:
        raise TailUnavailable("unknown decay; supply decay metadata or widen X explicitly")
    wf = w if callable(w) else (lambda x: np.ones_like(x))
    tail = _envelope_tail(decay, wf, p, grid.X)
    val = integrate_grid(lambda x: np.abs(g(x) * wf(x)) ** p, grid)
    return val ** (1.0 / p), tail


def mz_discrete_sum(F, sys: HBSystem, ns: NodeSet, p) -> float:
    """(1/tau) sum over nodes of |F(t)/E(t)|^p, using |E(t)| = |A(t)| at nodes."""
    p = p.p if isinstance(p, LpExponent) else LpExponent(p).p
    if len(ns) == 0:
        raise PolicyError("empty node set")
    t = ns.nodes
    a = np.abs(np.asarray(eval_E(sys, t).A))
    terms = np.abs(np.asarray(F(t)) / a) ** p
    total = math.fsum(terms) / sys.tau
    if total > 0 and len(t) >= 6:
        edge = max(terms[:3].max(), terms[-3:].max()) / sys.tau
        if edge > 1e-3 * total:
            raise PolicyError("node window too small relative to the decay of F/E")
    return total


def riemann_sum(g, w, p: float, sys: HBSystem, ns: NodeSet) -> float:
    """sum over nodes of (pi / phi'(t)) |g(t) w(t)|^p: a Riemann sum for the integral."""
    t = ns.nodes
    wt = w(t) if callable(w) else 1.0
    return math.fsum(math.pi / phase_derivative(sys, t) * np.abs(g(t) * wt) ** p)
