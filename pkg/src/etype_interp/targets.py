"""Target functions with derivative and decay metadata."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .systems import HBSystem, WeightDescriptor, WeightKind, eval_E

DECAY_KINDS = ("gaussian", "rational", "compact", "bandlimited", "kernel", "zero")


@dataclass(frozen=True)
class Decay:
    """Envelope metadata.

    gaussian:    |f| <= amp exp(-rate (x - center)^2)
    rational:    |f| <= amp (1 + x^2)^(-rate/2)
    compact:     f = 0 for |x - center| > rate
    bandlimited: |f| <= amp / |x - center| for |x - center| >= 1
    kernel:      |f / E| = amp |sin(phi(x) - phi_c)| / |x - center|, and at
                 nodes |f / E| = node_amp / |t - center| (kernel sections)
    zero:        f == 0
    """

    kind: str
    rate: float = 0.0
    amp: float = 1.0
    center: float = 0.0
    node_amp: float = 0.0

    def __post_init__(self):
        if self.kind not in DECAY_KINDS:
            raise ValueError(f"unknown decay kind '{self.kind}'")

    def envelope(self, x):
        """Pointwise upper bound of |f| (|f/E| for kernel sections)."""
        x = np.asarray(x, dtype=float)
        u = np.abs(x - self.center)
        if self.kind == "gaussian":
            return self.amp * np.exp(-self.rate * u * u)
        if self.kind == "rational":
            return self.amp * (1.0 + x * x) ** (-self.rate / 2.0)
        if self.kind == "compact":
            return np.where(u > self.rate, 0.0, np.inf)
        if self.kind in ("bandlimited", "kernel"):
            with np.errstate(divide="ignore"):
                return self.amp / np.maximum(u, 1e-300)
        return np.zeros_like(x)

    def radius(self, rel: float = 1e-20) -> float | None:
        """|x| beyond which |f| <= rel * amp, if the decay allows one."""
        if self.kind == "gaussian":
            return abs(self.center) + math.sqrt(math.log(1.0 / rel) / self.rate)
        if self.kind == "compact":
            return abs(self.center) + self.rate
        if self.kind == "zero":
            return 0.0
        return None


@dataclass(frozen=True)
class TargetFunction:
    id: str
    eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    decay: Decay = field(default_factory=lambda: Decay("gaussian", 1.0))

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def claims(self, p: float, w: WeightDescriptor) -> bool:
        """Whether f w (and f' w for Hermite) lies in L^p: the R_p(w) membership claim."""
        e = w.growth
        s = w.origin_exponent
        if s is not None and p * s <= -1.0:
            return False
        k = self.decay.kind
        if k in ("gaussian", "compact", "zero"):
            return True
        if k == "rational":
            return p * (self.decay.rate - e) > 1.0
        if k in ("bandlimited", "kernel"):
            return p * (1.0 - e) > 1.0
        return False


def gaussian(a: float = 1.0, center: float = 0.0) -> TargetFunction:
    def f(x):
        return np.exp(-a * (x - center) ** 2)

    def df(x):
        return -2.0 * a * (x - center) * np.exp(-a * (x - center) ** 2)

    cid = f"gaussian(a={a:g})" if center == 0 else f"gaussian(a={a:g},c={center:g})"
    return TargetFunction(cid, f, df, Decay("gaussian", a, 1.0, center))


def rational(power: float = 2.0) -> TargetFunction:
    """(1 + x^2)^(-power/2); power 2 gives 1/(1+x^2)."""
    q = power / 2.0

    def f(x):
        return (1.0 + x * x) ** (-q)

    def df(x):
        return -2.0 * q * x * (1.0 + x * x) ** (-q - 1.0)

    return TargetFunction(f"rational(q={power:g})", f, df, Decay("rational", power, 1.0))


def bump(radius: float = 1.0) -> TargetFunction:
    """Smooth compactly supported exp(-1/(1 - (x/r)^2))."""

    def f(x):
        u = x / radius
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
        return out

    def df(x):
        u = x / radius
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        g = 1.0 - u[m] ** 2
        out[m] = np.exp(-1.0 / g) * (-2.0 * u[m] / g**2) / radius
        return out

    return TargetFunction(f"bump(r={radius:g})", f, df, Decay("compact", radius, 1.0))


def sinc_function(tau: float, shift: float = 0.0) -> TargetFunction:
    """sin(tau (x - s)) / (tau (x - s)), a band-limited basis function."""

    def f(x):
        return np.sinc(tau * (x - shift) / math.pi)

    def df(x):
        u = tau * (x - shift)
        out = np.zeros_like(u)
        m = np.abs(u) > 1e-4
        out[m] = (np.cos(u[m]) * u[m] - np.sin(u[m])) / u[m] ** 2
        out[~m] = -u[~m] / 3.0 + u[~m] ** 3 / 30.0
        return tau * out

    # f = (pi / tau) K_sinc(shift, .), so |f/E| = |sin(phi - phi_c)| / (tau |x - s|)
    decay = Decay("kernel", 0.0, 1.0 / tau, shift, abs(math.sin(tau * shift)) / tau)
    return TargetFunction(f"sinc(tau={tau:g},s={shift:g})", f, df, decay)


def kernel_section(sys: HBSystem, w0: float) -> TargetFunction:
    """x -> K(w0, x) for the given system; lies in H^p(E) for every p > 1."""
    d0 = eval_E(sys, w0)
    a0, b0 = d0.A, d0.B
    n1 = d0.B1 * a0 - d0.A1 * b0
    n2 = d0.B2 * a0 - d0.A2 * b0
    n3 = d0.B3 * a0 - d0.A3 * b0
    thr = 1e-4 * math.pi / sys.tau

    def num(x):
        d = eval_E(sys, x)
        return d, d.B * a0 - d.A * b0

    def f(x):
        x = np.asarray(x, dtype=float)
        h = x - w0
        _, n = num(x)
        near = np.abs(h) < thr
        with np.errstate(divide="ignore", invalid="ignore"):
            far = n / (math.pi * h)
        lim = (n1 + h * n2 / 2.0 + h * h * n3 / 6.0) / math.pi
        return np.where(near, lim, far)

    def df(x):
        x = np.asarray(x, dtype=float)
        h = x - w0
        d, n = num(x)
        dn = d.B1 * a0 - d.A1 * b0
        near = np.abs(h) < thr
        with np.errstate(divide="ignore", invalid="ignore"):
            far = (dn * h - n) / (math.pi * h * h)
        lim = (n2 / 2.0 + h * n3 / 3.0) / math.pi
        return np.where(near, lim, far)

    e0 = math.hypot(a0, b0)
    decay = Decay("kernel", 0.0, e0 / math.pi, w0, abs(b0) / math.pi)
    return TargetFunction(f"kernel(w0={w0:g})", f, df, decay)


def system_b(sys: HBSystem) -> TargetFunction:
    """B itself: vanishes at every node but is not reproduced by the series."""
    return TargetFunction(
        "B", lambda x: eval_E(sys, x).B, lambda x: eval_E(sys, x).B1, Decay("rational", -1.0, 1.0)
    )


def constant(c: float = 1.0) -> TargetFunction:
    return TargetFunction(
        f"constant({c:g})",
        lambda x: np.full(np.shape(x), float(c)),
        lambda x: np.zeros(np.shape(x)),
        Decay("rational", 0.0, abs(c)) if c else Decay("zero"),
    )


def zero() -> TargetFunction:
    return TargetFunction("zero", lambda x: np.zeros(np.shape(x)), lambda x: np.zeros(np.shape(x)), Decay("zero"))


BUILTIN = {
    "gaussian": gaussian,
    "rational": rational,
    "bump": bump,
    "zero": zero,
    "constant": constant,
}


def from_spec(spec: dict) -> TargetFunction:
    """Build a target from {"id": name, **params}; system-dependent ids are handled by callers."""
    params = dict(spec)
    name = params.pop("id")
    if name not in BUILTIN:
        raise KeyError(f"unknown target '{name}'")
    return BUILTIN[name](**params)
