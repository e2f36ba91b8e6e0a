"""Real-order Bessel J and the normalized entire pair A_nu, B_nu.

    A_nu(z) = Gamma(nu+1) (z/2)^(-nu) J_nu(z)
    B_nu(z) = Gamma(nu+1) (z/2)^(-nu) J_(nu+1)(z)

Both are entire, real on the real axis, with A even and B odd. Small
arguments go through the power series (which also resolves the removable
singularity at 0); larger ones use scipy's J_nu with the power prefactor.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import EnvelopeError, OrderError

log = logging.getLogger(__name__)

ENV_ABS_TOL = "ETYPE_INTERP_SPECFUN_ABS_TOL"
COMPLEX_RADIUS = 10.0
_MAX_TERMS = 400


def _default_abs_tol() -> float:
    raw = os.environ.get(ENV_ABS_TOL)
    if raw is None:
        return 1e-12
    return float(raw)


@dataclass(frozen=True)
class SpecfunAccuracy:
    """Accuracy knobs.

    abs_tol is the absolute accuracy target; the power series is truncated
    at abs_tol * 1e-3 relative to its leading term. switchover_radius is
    where the series hands off to scipy. max_arg bounds the envelope.
    """

    abs_tol: float = field(default_factory=_default_abs_tol)
    switchover_radius: float = 4.0
    max_arg: float = 2e5

    def __post_init__(self):
        if not (self.abs_tol > 0 and math.isfinite(self.abs_tol)):
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.switchover_radius > 0:
            raise ValueError("switchover_radius must be positive")
        if not self.max_arg > self.switchover_radius:
            raise ValueError("max_arg must exceed switchover_radius")


def check_order(nu: float) -> float:
    nu = float(nu)
    if not (nu > -1.0 and math.isfinite(nu)):
        raise OrderError(f"Bessel order must satisfy nu > -1, got {nu}")
    return nu


def _check_envelope(x: np.ndarray, acc: SpecfunAccuracy) -> None:
    if x.size and not np.all(np.isfinite(x)):
        raise EnvelopeError("non-finite argument")
    if x.size and np.max(np.abs(x)) > acc.max_arg:
        raise EnvelopeError(
            f"|x| = {np.max(np.abs(x)):.6g} exceeds evaluation envelope {acc.max_arg:g}"
        )


def _series_terms(nu: float, tol: float, r2max: float) -> int:
    """Number of terms so that the series tail is below tol at |z|^2/4 <= r2max."""
    term = 1.0
    for k in range(1, _MAX_TERMS):
        term *= r2max / (k * (nu + k))
        if term < tol and r2max < (k + 1) * (nu + k + 1):
            return k + 1
    return _MAX_TERMS


def _series_coeffs(nu: float, n: int, shift: int) -> np.ndarray:
    """c_k = (-1)^k / (k! (nu+1)_(k+shift)) for k < n."""
    c = np.empty(n)
    v = 1.0
    for j in range(1, shift + 1):
        v /= nu + j
    c[0] = v
    for k in range(1, n):
        v *= -1.0 / (k * (nu + k + shift))
        c[k] = v
    return c


def series_ab(nu: float, z, acc: SpecfunAccuracy | None = None, deriv: int = 0):
    """Power series of A_nu, B_nu and their derivatives up to order ``deriv``.

    Works for real or complex z. Returns a list [A, B, A', B', ...] of length
    2*(deriv+1). No envelope beyond convergence is enforced here.
    """
    acc = acc or SpecfunAccuracy()
    nu = check_order(nu)
    z = np.asarray(z)
    r = float(np.max(np.abs(z))) if z.size else 0.0
    n = _series_terms(nu, acc.abs_tol * 1e-3, r * r / 4.0)
    ca = _series_coeffs(nu, n, 0)
    cb = _series_coeffs(nu, n, 1)
    # A = sum ca_k (z/2)^(2k), B = sum cb_k (z/2)^(2k+1)
    k = np.arange(n)
    ea = 2 * k
    eb = 2 * k + 1
    ca = ca / 2.0**ea
    cb = cb / 2.0**eb
    out = []
    for d in range(deriv + 1):
        out.append(_poly_deriv(ca, ea, d, z))
        out.append(_poly_deriv(cb, eb, d, z))
    return out


def _poly_deriv(c, e, d, z):
    """d-th derivative of sum c_k z^e_k, by Horner in z^2."""
    cd = c.copy()
    ed = e.copy()
    for _ in range(d):
        cd = cd * ed
        ed = ed - 1
    keep = ed >= 0
    cd, ed = cd[keep], ed[keep]
    if cd.size == 0:
        return np.zeros_like(z, dtype=np.result_type(z, float))
    # all remaining exponents share parity; factor out z^(ed[0])
    z2 = z * z
    acc = np.zeros_like(z2, dtype=np.result_type(z, float)) + cd[-1]
    for ck in cd[-2::-1]:
        acc = acc * z2 + ck
    return acc * z ** ed[0] if ed[0] else acc


def rounding_floor(x: float) -> float:
    """Conservative absolute accuracy attainable for J_nu near |x| in doubles."""
    return 8.0 * np.finfo(float).eps * (1.0 + math.sqrt(abs(x)))


def _log_gamma1(nu: float) -> float:
    return math.lgamma(nu + 1.0)


def bessel_j(nu: float, x, acc: SpecfunAccuracy | None = None):
    """J_nu(x) for real x.

    For non-integer nu, x must be non-negative (J_nu is complex for x < 0).
    """
    acc = acc or SpecfunAccuracy()
    nu = check_order(nu)
    xa = np.asarray(x, dtype=float)
    _check_envelope(xa, acc)
    xmax = float(np.max(np.abs(xa), initial=0.0))
    if acc.abs_tol < rounding_floor(xmax):
        raise EnvelopeError(
            f"abs_tol {acc.abs_tol:g} is below the double-precision floor at |x| = {xmax:g}"
        )
    integer = nu == int(nu)
    if np.any(xa < 0) and not integer:
        raise EnvelopeError("J_nu(x) is not real for x < 0 and non-integer nu")
    ax = np.abs(xa)
    small = ax <= acc.switchover_radius
    out = np.empty_like(ax)
    if np.any(small):
        a = series_ab(nu, ax[small], acc)[0]
        with np.errstate(divide="ignore"):
            pref = np.power(ax[small] / 2.0, nu) / math.gamma(nu + 1.0)
        out[small] = pref * a
    if np.any(~small):
        out[~small] = special.jv(nu, ax[~small])
    if integer:
        out = np.where((xa < 0) & (int(nu) % 2 == 1), -out, out)
    log.debug("bessel_j nu=%g: %d series, %d scipy", nu, int(small.sum()), int((~small).sum()))
    return out if np.ndim(x) else float(out)


def _ab_large(nu: float, ax: np.ndarray):
    """A, B for |x| > switchover via J_nu, J_(nu+1) (ax > 0)."""
    lpre = _log_gamma1(nu) - nu * np.log(ax / 2.0)
    pre = np.exp(lpre)
    return pre * special.jv(nu, ax), pre * special.jv(nu + 1.0, ax)


def _ab_all(nu: float, x, acc: SpecfunAccuracy | None, order: int):
    acc = acc or SpecfunAccuracy()
    nu = check_order(nu)
    xa = np.asarray(x, dtype=float)
    _check_envelope(xa, acc)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(xa)
    ax = np.abs(xa)
    sgn = np.where(xa < 0, -1.0, 1.0)
    small = ax <= acc.switchover_radius
    n_out = 2 * (order + 1)
    out = [np.empty_like(ax) for _ in range(n_out)]
    if np.any(small):
        vals = series_ab(nu, xa[small], acc, deriv=order)
        for i in range(n_out):
            out[i][small] = vals[i]
    big = ~small
    if np.any(big):
        xb = xa[big]
        a, b = _ab_large(nu, ax[big])
        b = b * sgn[big]
        vals = _closure(nu, xb, a, b, order)
        for i in range(n_out):
            out[i][big] = vals[i]
    log.debug("ab nu=%g order=%d: %d series, %d scipy", nu, order, int(small.sum()), int(big.sum()))
    if scalar:
        return tuple(float(v[0]) for v in out)
    return tuple(out)


def _closure(nu, x, a, b, order):
    """Derivatives from the first-order closure A' = -B, B' = A - c B / x."""
    c = 2.0 * nu + 1.0
    d = c * (c + 1.0)
    res = [a, b]
    if order >= 1:
        a1 = -b
        b1 = a - c * b / x
        res += [a1, b1]
    if order >= 2:
        a2 = -b1
        b2 = -b - c * a / x + d * b / x**2
        res += [a2, b2]
    if order >= 3:
        a3 = -b2
        b3 = -b1 - c * (a1 / x - a / x**2) + d * (b1 / x**2 - 2.0 * b / x**3)
        res += [a3, b3]
    return res


def ab_pair(nu: float, x, acc: SpecfunAccuracy | None = None):
    """(A_nu(x), B_nu(x)) for real x; exact (1, 0) at x = 0."""
    return _ab_all(nu, x, acc, 0)


def ab_derivs(nu: float, x, acc: SpecfunAccuracy | None = None):
    """(A, B, A', B', A'', B'') for real x."""
    return _ab_all(nu, x, acc, 2)


def ab_derivs3(nu: float, x, acc: SpecfunAccuracy | None = None):
    """(A, B, A', B', A'', B'', A''', B''') for real x."""
    return _ab_all(nu, x, acc, 3)


def ab_first_derivs_direct(nu: float, x, acc: SpecfunAccuracy | None = None):
    """(A', B') by a route independent of the closure.

    Series regime: termwise differentiation. Beyond: the recurrences
    2 J_nu' = J_(nu-1) - J_(nu+1), evaluated with neighbouring orders.
    """
    acc = acc or SpecfunAccuracy()
    nu = check_order(nu)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    _check_envelope(xa, acc)
    ax = np.abs(xa)
    small = ax <= acc.switchover_radius
    da = np.empty_like(ax)
    db = np.empty_like(ax)
    if np.any(small):
        s = series_ab(nu, xa[small], acc, deriv=1)
        da[small], db[small] = s[2], s[3]
    big = ~small
    if np.any(big):
        u = ax[big]
        sg = np.where(xa[big] < 0, -1.0, 1.0)
        pre = np.exp(_log_gamma1(nu) - nu * np.log(u / 2.0))
        j0 = special.jv(nu, u)
        j1 = special.jv(nu + 1.0, u)
        jm = special.jv(nu - 1.0, u)
        j2 = special.jv(nu + 2.0, u)
        # d/du [pre J_nu] = pre (-nu/u J_nu + (J_(nu-1) - J_(nu+1))/2); A even -> A' odd
        da[big] = sg * pre * (-nu / u * j0 + 0.5 * (jm - j1))
        db[big] = pre * (-nu / u * j1 + 0.5 * (j0 - j2))
    if np.ndim(x) == 0:
        return float(da[0]), float(db[0])
    return da, db


def ab_complex(nu: float, z, acc: SpecfunAccuracy | None = None):
    """(A_nu(z), B_nu(z)) for complex z with |z| <= 10, by the power series."""
    acc = acc or SpecfunAccuracy()
    za = np.asarray(z, dtype=complex)
    if za.size and np.max(np.abs(za)) > COMPLEX_RADIUS:
        raise EnvelopeError(f"complex evaluation limited to |z| <= {COMPLEX_RADIUS:g}")
    a, b = series_ab(nu, za, acc)
    if np.ndim(z) == 0:
        return complex(a), complex(b)
    return a, b
