"""Special-function kernel: log-gamma, scaled modified Bessel I, regularized
incomplete gamma, generalized Marcum Q and the exponential cosine moment.

Bessel and incomplete-gamma values come from :mod:`scipy.special`; the Marcum
Q series, its quadrature counterpart and the cosine-moment identity are
implemented here. Every function is pure and safe to call concurrently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, TruncationWarning

# Tail truncation rule shared by all series in this module.
SERIES_REL_TOL = 1e-15
SERIES_MAX_TERMS = 10_000


def ln_gamma(a: float) -> float:
    """Return ln Γ(a) for a > 0."""
    if not a > 0 or not math.isfinite(a):
        raise DomainError(f"ln_gamma requires a > 0, got {a!r}")
    return float(special.gammaln(a))


@dataclass(frozen=True)
class ScaledBessel:
    """Exponentially scaled modified Bessel value ``e^{-|x|} I_order(x)``."""

    order: float
    argument: float
    scaled_value: float

    @property
    def value(self) -> float:
        """Unscaled I_order(argument); may overflow to inf."""
        with np.errstate(over="ignore"):
            return float(self.scaled_value * np.exp(abs(self.argument)))

    @property
    def log_abs_value(self) -> float:
        """ln |I_order(argument)|, finite wherever the scaled value is non-zero."""
        if self.scaled_value == 0.0:
            return float(log_bessel_i(self.order, self.argument))
        return math.log(abs(self.scaled_value)) + abs(self.argument)


def _is_integer(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.isfinite(v) & (v == np.round(v))


def _normalize_order(order, x):
    order = np.asarray(order, dtype=float)
    x = np.asarray(x, dtype=float)
    integer = _is_integer(order)
    if np.any(~integer & (order <= -1.0)):
        raise DomainError("negative non-integer Bessel orders below -1 are not supported")
    if np.any(~integer & (x < 0)):
        raise DomainError("non-integer Bessel order requires a non-negative argument")
    # I_{-n} = I_n for integer n
    order = np.where(integer, np.abs(order), order)
    return order, x


def ive(order, x):
    """Vectorised ``e^{-|x|} I_order(x)``; negative integer orders are folded."""
    order, x = _normalize_order(order, x)
    return special.ive(order, x)


def bessel_i_scaled(order: float, x: float) -> ScaledBessel:
    """Scaled modified Bessel function of the first kind of real order.

    Negative integer orders use ``I_{-n} = I_n`` and negative arguments with
    integer order use ``I_n(-x) = (-1)^n I_n(x)``. Negative non-integer orders
    are accepted only in (-1, 0), the range needed for I_{mu-1} with mu < 1.
    """
    if not (math.isfinite(order) and math.isfinite(x)):
        raise DomainError("bessel_i_scaled requires finite order and argument")
    value = float(ive(order, x))
    return ScaledBessel(float(order), float(x), value)


def _log_series_sum(nu, w):
    """log of sum_k w^k / (k! (nu+1)_k) for w >= 0 (vectorised)."""
    nu = np.asarray(nu, dtype=float)
    w = np.asarray(w, dtype=float)
    nu, w = np.broadcast_arrays(nu, w)
    total = np.ones(nu.shape)
    term = np.ones(nu.shape)
    for k in range(1, SERIES_MAX_TERMS):
        term = term * w / (k * (nu + k))
        total = total + term
        if np.all(term <= SERIES_REL_TOL * total):
            return np.log(total)
    warnings.warn("Bessel ascending series hit its term cap", TruncationWarning, stacklevel=3)
    return np.log(total)


def log_bessel_i_ratio(nu, z):
    """Return ln(I_nu(z) / z^nu) for nu > -1, z >= 0.

    The ratio is finite at z = 0, which removes the apparent singularity of
    integrands of the form ``(c x)^{-nu/2} I_nu(sqrt(c x))``.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    nu, z = np.broadcast_arrays(nu, z)
    shape = nu.shape
    nu, z = nu.ravel(), z.ravel()
    if np.any(nu <= -1.0):
        raise DomainError("log_bessel_i_ratio requires nu > -1")
    if np.any(z < 0):
        raise DomainError("log_bessel_i_ratio requires z >= 0")
    base = -nu * math.log(2.0) - special.gammaln(nu + 1.0)
    out = np.empty(nu.shape)
    small = z <= 2.0 * np.sqrt(nu + 1.0) + 2.0
    if np.any(small):
        out[small] = base[small] + _log_series_sum(nu[small], 0.25 * z[small] ** 2)
    big = ~small
    if np.any(big):
        scaled = special.ive(nu[big], z[big])
        with np.errstate(divide="ignore"):
            vals = np.log(scaled) + z[big] - nu[big] * np.log(z[big])
        # ive underflow for very large orders: fall back to the series
        bad = ~np.isfinite(vals) | (scaled < 1e-280)
        if np.any(bad):
            sub_nu = nu[big][bad]
            sub_z = z[big][bad]
            vals[bad] = base[big][bad] + _log_series_sum(sub_nu, 0.25 * sub_z**2)
        out[big] = vals
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def log_bessel_i(order, x):
    """Return ln |I_order(x)|, robust against overflow and underflow."""
    order, x = _normalize_order(order, x)
    order, x = np.broadcast_arrays(order, x)
    shape = order.shape
    order, x = order.ravel(), x.ravel()
    ax = np.abs(x)
    scaled = np.abs(special.ive(order, x))
    with np.errstate(divide="ignore"):
        out = np.log(scaled) + ax
    bad = (scaled < 1e-280) & (ax > 0)
    if np.any(bad):
        nu = order[bad]
        # I_nu(x) = x^nu * ratio; nu >= 0 after folding, or nu in (-1, 0)
        out[bad] = log_bessel_i_ratio(nu, ax[bad]) + nu * np.log(ax[bad])
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(a > 0)):
        raise DomainError("reg_lower_gamma requires a > 0")
    if np.any(~(x >= 0)):
        raise DomainError("reg_lower_gamma requires x >= 0")
    out = special.gammainc(a, x)
    return out if np.ndim(out) else float(out)


def reg_upper_gamma(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(a > 0)):
        raise DomainError("reg_upper_gamma requires a > 0")
    if np.any(~(x >= 0)):
        raise DomainError("reg_upper_gamma requires x >= 0")
    out = special.gammaincc(a, x)
    return out if np.ndim(out) else float(out)


def _marcum_series(nu, a, b, complement: bool):
    nu, a, b = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    shape = nu.shape
    nu, a, b = nu.ravel(), a.ravel(), b.ravel()
    if np.any(~(nu > 0)):
        raise DomainError("marcum_q requires order > 0")
    if np.any(~(a >= 0)) or np.any(~(b >= 0)):
        raise DomainError("marcum_q requires a, b >= 0")

    lam = 0.5 * a * a
    x = 0.5 * b * b
    # Poisson(lam) mass below k0 is negligible
    k0 = np.floor(np.maximum(0.0, lam - 12.0 * np.sqrt(lam) - 12.0))
    with np.errstate(divide="ignore"):
        log_lam = np.where(lam > 0, np.log(lam), -np.inf)

    total = np.zeros(nu.size)
    active = np.arange(nu.size)
    capped = False
    for j in range(SERIES_MAX_TERMS):
        if active.size == 0:
            break
        k = k0[active] + j
        la = lam[active]
        with np.errstate(invalid="ignore"):
            logp = np.where(la > 0, -la + k * log_lam[active] - special.gammaln(k + 1.0),
                            np.where(k == 0, 0.0, -np.inf))
        p = np.exp(logp)
        if complement:
            g = special.gammainc(nu[active] + k, x[active])
        else:
            g = special.gammaincc(nu[active] + k, x[active])
        total[active] += p * g
        # Poisson tail beyond k, geometric bound once k + 1 > lam
        ratio = la / (k + 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(ratio < 1.0, p * (la / (k + 1.0)) / (1.0 - ratio), np.inf)
        if complement:
            with np.errstate(invalid="ignore"):
                bound = np.where(g > 0, tail * g, 0.0)
        else:
            bound = tail
        done = (k + 1.0 > la) & ((bound <= SERIES_REL_TOL * total[active]) | (bound < 1e-300))
        active = active[~done]
    else:
        capped = active.size > 0
    if capped:
        warnings.warn("Marcum Q series hit its term cap", TruncationWarning, stacklevel=3)
    total = np.clip(total, 0.0, 1.0)
    # Q(a, 0) = 1 exactly
    total[b == 0] = 0.0 if complement else 1.0
    total = total.reshape(shape)
    return total if total.ndim else float(total)


def _marcum(order, a, b, complement: bool):
    # each side is a sum of small positive terms only while it stays below 1/2;
    # past that, take it from the other side
    nu, a, b = np.broadcast_arrays(
        np.asarray(order, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    out = np.atleast_1d(np.asarray(_marcum_series(nu, a, b, complement), dtype=float)).copy()
    big = out.reshape(nu.shape if nu.ndim else (1,)) > 0.5
    if np.any(big):
        flat = big.ravel()
        other = _marcum_series(nu.ravel()[flat], a.ravel()[flat], b.ravel()[flat], not complement)
        out.ravel()[flat] = 1.0 - np.asarray(other)
    out = out.reshape(nu.shape)
    return out if out.ndim else float(out)


def marcum_q(order, a, b):
    """Generalized Marcum Q-function Q_order(a, b) of real order.

    Evaluated as the Poisson mixture of regularized upper incomplete gammas
    ``sum_k e^{-a^2/2} (a^2/2)^k / k! * Q(order + k, b^2/2)``, or as one minus
    the matching lower-gamma mixture when Q > 1/2. Vectorised over all
    arguments.
    """
    return _marcum(order, a, b, complement=False)


def marcum_q_complement(order, a, b):
    """Return 1 - Q_order(a, b) without cancellation when Q is close to 1."""
    return _marcum(order, a, b, complement=True)


def marcum_q_quad(order: float, a: float, b: float) -> float:
    """Marcum Q by adaptive quadrature of its defining integral.

    Slower than :func:`marcum_q`; kept as an independent check and as a
    fallback for isolated points.
    """
    nu = float(order)
    if not nu > 0:
        raise DomainError("marcum_q requires order > 0")
    if a < 0 or b < 0:
        raise DomainError("marcum_q requires a, b >= 0")
    if b == 0:
        return 1.0

    def integrand(t):
        if t == 0.0:
            return 0.0
        return math.exp(
            (2.0 * nu - 1.0) * math.log(t)
            + log_bessel_i_ratio(nu - 1.0, a * t)
            - 0.5 * (t * t + a * a)
        )

    # the integrand peaks near max(a, sqrt(2 nu - 1)); split there
    peak = max(a, math.sqrt(max(2.0 * nu - 1.0, 0.0)))
    pieces = []
    lo = b
    for edge in (peak - 10.0, peak, peak + 10.0, peak + 40.0):
        if edge > lo:
            pieces.append((lo, edge))
            lo = edge
    total = 0.0
    for lo_, hi_ in pieces:
        total += integrate.quad(integrand, lo_, hi_, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    total += integrate.quad(integrand, lo, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return min(max(total, 0.0), 1.0)


def _binomial_half_weights(m: int) -> np.ndarray:
    """C(m, l) / 2^m for l = 0..m."""
    l = np.arange(m + 1)
    return np.exp(
        special.gammaln(m + 1.0) - special.gammaln(l + 1.0) - special.gammaln(m - l + 1.0)
        - m * math.log(2.0)
    )


def cos_exp_moment(alpha: float, m: int, scaled: bool = False) -> float:
    """(1/pi) * integral_0^pi exp(alpha cos t) cos^m t dt in closed form.

    Uses ``2^{-m} sum_l C(m, l) I_{2l-m}(alpha)``. All Bessel orders share the
    parity of m, so the sum never cancels. With ``scaled=True`` the result is
    multiplied by ``e^{-|alpha|}``.
    """
    if m < 0 or int(m) != m:
        raise DomainError("cos_exp_moment requires a non-negative integer m")
    m = int(m)
    orders = np.abs(2 * np.arange(m + 1) - m)
    vals = special.ive(orders, abs(alpha))
    sign = -1.0 if (alpha < 0 and m % 2) else 1.0
    s = sign * float(np.dot(_binomial_half_weights(m), vals))
    if scaled:
        return s
    with np.errstate(over="ignore", invalid="ignore"):
        return float(s * np.exp(abs(alpha)))
