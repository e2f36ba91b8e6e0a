"""Hermite-Biehler systems E = A - iB: values, phase, reproducing kernel, weight.

Three families are provided:

* ``sinc``: E = exp(-i tau z), A = cos(tau x), B = sin(tau x).
* ``bessel``: E = exp(i pi alpha) tau^(nu+1/2) E_nu(tau z) with
  E_nu = A_nu - i B_nu; alpha is measured in units of pi.
* ``expw``: E = W(z) exp(-i (tau - tau0) z) with W either
  exp(-i tau0 z) ("exp") or (z + i) exp(-i z) ("linear", tau0 = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import specfun
from .errors import ConfigError, EnvelopeError, SystemError_


class Family(str, Enum):
    BESSEL = "bessel"
    EXPW = "expw"
    SINC = "sinc"


class WeightKind(str, Enum):
    POWER = "power"
    INVERSE_W = "inverse_w"
    UNIT = "unit"


@dataclass(frozen=True)
class WeightDescriptor:
    """Target weight w; ``exponent`` is used by the power kind only."""

    kind: WeightKind
    exponent: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is WeightKind.UNIT:
            return np.ones_like(x)
        if self.kind is WeightKind.INVERSE_W:
            return 1.0 / np.sqrt(1.0 + x * x)
        if self.exponent < 0 and np.any(x == 0):
            raise EnvelopeError("negative-exponent power weight is singular at 0")
        with np.errstate(divide="ignore"):
            return np.abs(x) ** self.exponent

    @property
    def growth(self) -> float:
        """e such that w(x) <= |x|^e for |x| >= 1."""
        if self.kind is WeightKind.POWER:
            return self.exponent
        if self.kind is WeightKind.INVERSE_W:
            return -1.0
        return 0.0

    @property
    def origin_exponent(self) -> float | None:
        """Exponent s of |x|^s at 0 if the weight is a non-smooth power there."""
        if self.kind is WeightKind.POWER and self.exponent != 0:
            return self.exponent
        return None

    def label(self) -> str:
        if self.kind is WeightKind.POWER:
            return f"|x|^{self.exponent:g}"
        if self.kind is WeightKind.INVERSE_W:
            return "1/sqrt(1+x^2)"
        return "1"


class Derivs(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    A3: np.ndarray
    B3: np.ndarray


@dataclass(frozen=True)
class KernelValue:
    value: np.ndarray
    regularized: np.ndarray


@dataclass(frozen=True)
class HBProbeReport:
    min_difference: float
    argmin: complex
    success: bool


def _unit_rotation(alpha: float) -> tuple[float, float]:
    """cos(pi alpha), sin(pi alpha), exact at multiples of 1/2."""
    two = 2.0 * alpha
    if two == round(two):
        k = int(round(two)) % 4
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k]
    return math.cos(math.pi * alpha), math.sin(math.pi * alpha)


@dataclass(frozen=True)
class HBSystem:
    family: Family
    tau: float
    nu: float | None = None
    alpha: float = 0.0
    w: str = "exp"
    tau0: float = 1.0
    accuracy: specfun.SpecfunAccuracy = field(
        default_factory=specfun.SpecfunAccuracy, compare=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.family is Family.BESSEL:
            if self.nu is None:
                raise ConfigError("bessel family requires nu")
            specfun.check_order(self.nu)
        elif self.nu is not None:
            raise ConfigError(f"nu is only meaningful for the bessel family")
        if self.family is Family.EXPW:
            if self.w not in ("exp", "linear"):
                raise ConfigError(f"unknown W '{self.w}' (expected 'exp' or 'linear')")
            if self.w == "linear" and self.tau0 != 1.0:
                raise ConfigError("W = (z+i)exp(-iz) has tau0 = 1")
            if self.tau < self.tau0:
                raise ConfigError(f"expw requires tau >= tau0 = {self.tau0}")

    # constructors
    @classmethod
    def sinc(cls, tau: float) -> "HBSystem":
        return cls(Family.SINC, tau)

    @classmethod
    def bessel(cls, nu: float, tau: float, alpha: float = 0.0, accuracy=None) -> "HBSystem":
        kw = {"accuracy": accuracy} if accuracy is not None else {}
        return cls(Family.BESSEL, tau, nu=nu, alpha=alpha, **kw)

    @classmethod
    def expw(cls, tau: float, w: str = "linear", tau0: float = 1.0) -> "HBSystem":
        return cls(Family.EXPW, tau, w=w, tau0=tau0)

    def with_tau(self, tau: float) -> "HBSystem":
        return replace(self, tau=float(tau))

    @property
    def weight_descriptor(self) -> WeightDescriptor:
        if self.family is Family.BESSEL:
            return WeightDescriptor(WeightKind.POWER, self.nu + 0.5)
        if self.family is Family.EXPW and self.w == "linear":
            return WeightDescriptor(WeightKind.INVERSE_W)
        return WeightDescriptor(WeightKind.UNIT)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "tau": self.tau}
        if self.family is Family.BESSEL:
            d.update(nu=self.nu, alpha=self.alpha)
        elif self.family is Family.EXPW:
            d.update(w=self.w, tau0=self.tau0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HBSystem":
        fam = Family(d["family"])
        if fam is Family.BESSEL:
            return cls.bessel(d["nu"], d["tau"], d.get("alpha", 0.0))
        if fam is Family.EXPW:
            return cls.expw(d["tau"], d.get("w", "linear"), d.get("tau0", 1.0))
        return cls.sinc(d["tau"])

    def label(self) -> str:
        if self.family is Family.BESSEL:
            return f"bessel(nu={self.nu:g}, alpha={self.alpha:g}pi, tau={self.tau:g})"
        if self.family is Family.EXPW:
            return f"expw(W={self.w}, tau0={self.tau0:g}, tau={self.tau:g})"
        return f"sinc(tau={self.tau:g})"


def _trig_derivs(tau: float, x: np.ndarray) -> Derivs:
    c = np.cos(tau * x)
    s = np.sin(tau * x)
    t2 = tau * tau
    return Derivs(c, s, -tau * s, tau * c, -t2 * c, -t2 * s, t2 * tau * s, -t2 * tau * c)


def _linear_w_derivs(tau: float, x: np.ndarray) -> Derivs:
    c = np.cos(tau * x)
    s = np.sin(tau * x)
    t2 = tau * tau
    return Derivs(
        x * c + s,
        x * s - c,
        (1 + tau) * c - tau * x * s,
        (1 + tau) * s + tau * x * c,
        -tau * (2 + tau) * s - t2 * x * c,
        tau * (2 + tau) * c - t2 * x * s,
        -t2 * (3 + tau) * c + t2 * tau * x * s,
        -t2 * (3 + tau) * s - t2 * tau * x * c,
    )


def _bessel_derivs(sys: HBSystem, x: np.ndarray) -> Derivs:
    tau = sys.tau
    vals = specfun.ab_derivs3(sys.nu, tau * x, sys.accuracy)
    k = tau ** (sys.nu + 0.5)
    cr, sr = _unit_rotation(sys.alpha)
    out = []
    for j in range(4):
        a = vals[2 * j] * (k * tau**j)
        b = vals[2 * j + 1] * (k * tau**j)
        # exp(i pi alpha)(a - i b) = (cr a + sr b) - i (cr b - sr a)
        out += [cr * a + sr * b, cr * b - sr * a]
    return Derivs(*out)


def eval_E(sys: HBSystem, x) -> Derivs:
    """A, B and their first three derivatives at real x."""
    xa = np.asarray(x, dtype=float)
    if sys.family is Family.BESSEL:
        d = _bessel_derivs(sys, xa)
    elif sys.family is Family.EXPW and sys.w == "linear":
        d = _linear_w_derivs(sys.tau, xa)
    else:
        d = _trig_derivs(sys.tau, xa)
    if np.ndim(x) == 0:
        return Derivs(*(float(np.asarray(v).reshape(-1)[0]) for v in d))
    return d


def abs_E(sys: HBSystem, x):
    d = eval_E(sys, x)
    return np.hypot(d.A, d.B)


def E_complex(sys: HBSystem, z):
    """E(z) for complex z (Bessel family limited to |tau z| <= 10)."""
    z = np.asarray(z, dtype=complex)
    tau = sys.tau
    if sys.family is Family.BESSEL:
        a, b = specfun.ab_complex(sys.nu, tau * z, sys.accuracy)
        cr, sr = _unit_rotation(sys.alpha)
        return complex(cr, sr) * tau ** (sys.nu + 0.5) * (np.asarray(a) - 1j * np.asarray(b))
    e = np.exp(-1j * tau * z)
    if sys.family is Family.EXPW and sys.w == "linear":
        return (z + 1j) * e
    return e


def phase_derivative(sys: HBSystem, x):
    """phi'(x) = Re(i E'/E) = (B'A - A'B) / (A^2 + B^2)."""
    d = eval_E(sys, x)
    e2 = np.asarray(d.A) ** 2 + np.asarray(d.B) ** 2
    if np.any(e2 < 1e-28):
        raise SystemError_("|E(x)| below 1e-14: E vanishes or envelope exceeded")
    out = (d.B1 * d.A - d.A1 * d.B) / e2
    return out if np.ndim(x) else float(out)


def kernel_diag(sys: HBSystem, t):
    d = eval_E(sys, t)
    k = (d.B1 * d.A - d.A1 * d.B) / math.pi
    if np.any(np.asarray(k) <= 0):
        raise SystemError_("non-positive kernel diagonal")
    return k


def kernel_diag_prime(sys: HBSystem, t):
    """d/dz K(t, z) at z = t."""
    d = eval_E(sys, t)
    return (d.B2 * d.A - d.A2 * d.B) / (2.0 * math.pi)


def default_near_threshold(tau: float) -> float:
    return 1e-4 * math.pi / tau


def kernel(sys: HBSystem, t, z, near_threshold: float | None = None) -> KernelValue:
    """K(t, z) for real t, z (broadcast), regularized near the diagonal."""
    thr = default_near_threshold(sys.tau) if near_threshold is None else near_threshold
    t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
    dt = eval_E(sys, t)
    dz = eval_E(sys, z)
    h = z - t
    near = np.abs(h) < thr
    with np.errstate(divide="ignore", invalid="ignore"):
        far = (dz.B * dt.A - dz.A * dt.B) / (math.pi * h)
    n1 = dt.B1 * dt.A - dt.A1 * dt.B
    n2 = dt.B2 * dt.A - dt.A2 * dt.B
    n3 = dt.B3 * dt.A - dt.A3 * dt.B
    lim = (n1 + h * n2 / 2.0 + h * h * n3 / 6.0) / math.pi
    val = np.where(near, lim, far)
    if val.ndim == 0:
        return KernelValue(float(val), bool(near))
    return KernelValue(val, near)


def weight(sys: HBSystem, x):
    return sys.weight_descriptor(x)


def hb_inequality_probe(sys: HBSystem, samples) -> HBProbeReport:
    z = np.asarray(samples, dtype=complex).reshape(-1)
    if np.any(z.imag <= 0):
        raise ValueError("samples must lie in the upper half-plane")
    diff = np.abs(E_complex(sys, z)) - np.abs(E_complex(sys, np.conj(z)))
    i = int(np.argmin(diff))
    return HBProbeReport(float(diff[i]), complex(z[i]), bool(diff[i] > 0))
