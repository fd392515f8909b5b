"""The Multi-cluster Two-Wave (MTW) SNR distribution.

Parameters are ``K`` (specular-to-diffuse power ratio), ``deltas`` (one
asymmetry value per cluster carrying two specular waves), ``mu`` (number of
clusters, real valued) and ``mean_snr``.

Two families of evaluators are provided:

* integral forms, averaging the conditional kappa-mu law over the specular
  phase differences with a tensor Gauss-Legendre rule on [0, pi]^N;
* series forms, writing the SNR law as a Gamma mixture whose weights come
  from a closed-form sum of modified Bessel functions.

The Laplace-domain statistics (generalized MGF, MGF, moments, AoF) and the
high-SNR asymptote are closed form.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence

import mpmath
import numpy as np
from scipy import special

from . import specfun
from .errors import (
    DeltaRangeError,
    DeltaSumError,
    DimensionTooHighError,
    DomainError,
    NegativeKError,
    NonPositiveMeanSnrError,
    NonPositiveMuError,
    NumericError,
    PhysicalConsistencyWarning,
    PoleError,
    TruncationWarning,
)

# Above this many terms binomial tables overflow double precision.
MAX_SERIES_TERMS = 1000
# Sums whose magnitude-to-value ratio exceeds this are redone in extended precision.
_MAX_CONDITION = 1e5
_POLE_EPS = 1e-12
_DELTA_SUM_SLACK = 1e-12


@dataclass(frozen=True)
class MtwParams:
    K: float
    deltas: tuple[float, ...] = ()
    mu: float = 1.0
    mean_snr: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "mean_snr", float(self.mean_snr))

    @property
    def n_two_spec(self) -> int:
        return len(self.deltas)

    @property
    def zeta(self) -> float:
        """(1 + K) / mean_snr."""
        return (1.0 + self.K) / self.mean_snr

    @property
    def beta(self) -> float:
        """Rate of the Gamma components in the series form."""
        return self.mu * self.zeta

    def with_mean_snr(self, mean_snr: float) -> MtwParams:
        return MtwParams(self.K, self.deltas, self.mu, mean_snr)

    def as_dict(self) -> dict:
        return {"K": self.K, "delta": list(self.deltas), "mu": self.mu, "mean_snr": self.mean_snr}


@dataclass(frozen=True)
class NumericPolicy:
    quad_nodes_per_dim: int = 64
    series_kmax: int = 60
    series_rel_tol: float = 1e-12
    max_integral_dim: int = 4

    def __post_init__(self):
        if self.quad_nodes_per_dim < 8:
            raise DomainError("quad_nodes_per_dim must be >= 8")
        if not 1 <= self.series_kmax <= MAX_SERIES_TERMS:
            raise DomainError(f"series_kmax must lie in [1, {MAX_SERIES_TERMS}]")
        if not self.series_rel_tol > 0:
            raise DomainError("series_rel_tol must be positive")
        if self.max_integral_dim < 0:
            raise DomainError("max_integral_dim must be non-negative")


DEFAULT_POLICY = NumericPolicy()


def validate(params: MtwParams) -> MtwParams:
    """Check every parameter invariant, raising a dedicated error for each."""
    if not (math.isfinite(params.K) and params.K >= 0):
        raise NegativeKError(f"K must be a finite non-negative number, got {params.K}")
    if not (math.isfinite(params.mu) and params.mu > 0):
        raise NonPositiveMuError(f"mu must be positive, got {params.mu}")
    if not (math.isfinite(params.mean_snr) and params.mean_snr > 0):
        raise NonPositiveMeanSnrError(f"mean_snr must be positive, got {params.mean_snr}")
    for i, d in enumerate(params.deltas):
        if not (math.isfinite(d) and 0.0 <= d <= 1.0):
            raise DeltaRangeError(f"delta[{i}] = {d} is outside [0, 1]")
    if sum(params.deltas) > 1.0 + _DELTA_SUM_SLACK:
        raise DeltaSumError(f"sum of delta exceeds 1 ({sum(params.deltas):.6g})")
    if params.n_two_spec > math.ceil(params.mu):
        warnings.warn(
            f"{params.n_two_spec} two-specular clusters exceed ceil(mu) = {math.ceil(params.mu)}; "
            "the set has no physical realisation",
            PhysicalConsistencyWarning,
            stacklevel=2,
        )
    return params


def tuples(r: int, n: int) -> list[tuple[int, ...]]:
    """All n-tuples of non-negative integers summing to r."""
    if r < 0 or n < 1:
        raise DomainError("tuples requires r >= 0 and n >= 1")
    out = []
    # stars and bars: choose bar positions among r + n - 1 slots
    for bars in combinations_with_replacement(range(r + 1), n - 1):
        edges = (0,) + bars + (r,)
        out.append(tuple(edges[i + 1] - edges[i] for i in range(n)))
    return out


# ---------------------------------------------------------------------------
# Specular-phase averages in closed form
#
# Both the series weights and the generalized MGF need, for q = 0..qmax,
#
#     B(q) = sum_r C(q, r) r! sum_{tau(r, N)} prod_i [ (Delta_i/2)^{r_i} / r_i!
#                 * sum_l C(r_i, l) I_{2l - r_i}(t_i) ],
#
# which equals E[exp(sum_i t_i cos th_i) (1 + sum_i Delta_i cos th_i)^q] for
# independent uniform phases. The tuple sum is a binomial convolution of the
# per-cluster cosine moments. For t_i < 0 that r-sum alternates in sign, so
# the same average is instead expanded around cos th = -1,
#
#     B(q) = sum_r C(q, r) (1 - sum Delta)^{q-r} sum_{tau(r, N)} r!/prod r_i!
#                 * prod_i Delta_i^{r_i} M_{r_i}(t_i),
#     M_r(t) = E[(1 + cos th)^r e^{t cos th}]
#            = 2^r e^t (1/2)_r / r! 1F1(1/2; r + 1; -2t),
#
# where every term is positive. If the forward sum is still badly conditioned
# it is redone with mpmath.
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=4)
def _binomial_table(n: int) -> np.ndarray:
    """Correctly rounded C(r, a) for 0 <= a <= r <= n."""
    table = np.zeros((n + 1, n + 1))
    row = [1]
    table[0, 0] = 1.0
    for r in range(1, n + 1):
        row = [1] + [row[a - 1] + row[a] for a in range(1, r)] + [1]
        table[r, : r + 1] = [float(v) for v in row]
    return table


def _binomials(qmax: int) -> np.ndarray:
    size = 64
    while size < qmax:
        size *= 2
    return _binomial_table(min(max(size, qmax), MAX_SERIES_TERMS))[: qmax + 1, : qmax + 1]


def _binomial_convolve(u: np.ndarray, c: np.ndarray, binom: np.ndarray) -> np.ndarray:
    """w[r] = sum_a C(r, a) u[r - a] c[a]."""
    q = len(u)
    idx = np.arange(q)[:, None] - np.arange(q)[None, :]
    lower = idx >= 0
    u_shift = np.where(lower, u[np.clip(idx, 0, None)], 0.0)
    return np.sum(binom * u_shift * c[None, :], axis=1)


def _specular_average_float(qmax, deltas, t):
    binom = _binomials(qmax)
    m = np.arange(qmax + 1)
    half = binom / np.ldexp(1.0, m)[:, None]  # C(m, l) / 2^m
    orders = np.minimum(np.abs(2 * m[None, :] - m[:, None]), qmax)
    u = np.zeros(qmax + 1)
    u[0] = 1.0
    log_scale = 0.0
    for d, ti in zip(deltas, t):
        iv = special.ive(m, abs(ti))
        moments = np.sum(np.where(m[None, :] <= m[:, None], half * iv[orders], 0.0), axis=1)
        if ti < 0:
            moments = moments * np.where(m % 2, -1.0, 1.0)
        with np.errstate(under="ignore"):
            c = np.power(d, m) * moments
        u = _binomial_convolve(u, c, binom)
        log_scale += abs(ti)
    terms = half * u[None, :]  # C(q, r) / 2^q * u[r], lower triangle only
    terms = np.where(m[None, :] <= m[:, None], terms, 0.0)
    total = terms.sum(axis=1)
    magnitude = np.abs(terms).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(total > 0, magnitude / total, np.inf)
        log_b = np.log(total) + m * math.log(2.0) + log_scale
    return log_b, cond


def _lse_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp tolerating all -inf rows."""
    top = np.max(mat, axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(mat - safe[:, None]), axis=1))


def _log_shifted_moments(qmax: int, t: float) -> np.ndarray:
    """ln M_r(t) = ln E[(1 + cos th)^r e^{t cos th}] for r = 0..qmax and t <= 0."""
    r = np.arange(qmax + 1, dtype=float)
    out = r * math.log(2.0) + t + special.gammaln(r + 0.5) - special.gammaln(0.5) - special.gammaln(r + 1.0)
    z = -2.0 * t
    if z == 0.0:
        return out
    # 1F1(1/2; r + 1; z) has positive, unimodal terms whose spread near the
    # peak is about sqrt(r + peak); sum a window of +-12 of those widths
    b = r + 2.0 - z
    c = r + 1.0 - 0.5 * z
    peak = np.maximum(0.0, 0.5 * (-b + np.sqrt(np.maximum(b * b - 4.0 * c, 0.0))))
    half = 12.0 * np.sqrt(r + peak + 1.0) + 30.0
    lo = np.floor(np.maximum(0.0, peak - half))
    j = lo[:, None] + np.arange(int(np.ceil(2.0 * half.max())) + 1)[None, :]
    first = (
        special.gammaln(lo + 0.5) - special.gammaln(0.5) - special.gammaln(r + 1.0 + lo)
        + special.gammaln(r + 1.0) + lo * math.log(z) - special.gammaln(lo + 1.0)
    )
    steps = math.log(z) + np.log((j[:, :-1] + 0.5) / ((r[:, None] + 1.0 + j[:, :-1]) * (j[:, :-1] + 1.0)))
    log_terms = np.concatenate([first[:, None], first[:, None] + np.cumsum(steps, axis=1)], axis=1)
    return out + _lse_rows(log_terms)


@functools.lru_cache(maxsize=8)
def _log_binomials(qmax: int) -> np.ndarray:
    m = np.arange(qmax + 1, dtype=float)
    lg = special.gammaln(m + 1.0)
    out = lg[:, None] - lg[None, :] - special.gammaln(np.maximum(m[:, None] - m[None, :], 0.0) + 1.0)
    out = np.where(m[None, :] <= m[:, None], out, -np.inf)
    out.setflags(write=False)
    return out


def _specular_average_shifted(qmax, deltas, t):
    """Positive-term evaluation of ln B(q) for t_i <= 0."""
    lbin = _log_binomials(qmax)
    m = np.arange(qmax + 1)
    idx = np.clip(m[:, None] - m[None, :], 0, qmax)
    log_u = np.full(qmax + 1, -np.inf)
    log_u[0] = 0.0
    for d, ti in zip(deltas, t):
        with np.errstate(divide="ignore"):
            log_c = special.xlogy(m, d) + _log_shifted_moments(qmax, ti)
        log_u = _lse_rows(lbin + log_u[idx] + log_c[None, :])
    rest = max(0.0, 1.0 - sum(deltas))
    with np.errstate(divide="ignore"):
        log_b = _lse_rows(lbin + special.xlogy(idx, rest) + log_u[None, :])
    return log_b, np.ones(qmax + 1)


def _mp_bessel_table(qmax: int, t: mpmath.mpf) -> list:
    if t == 0:
        return [mpmath.mpf(1)] + [mpmath.mpf(0)] * qmax
    table = [mpmath.mpf(0)] * (qmax + 2)
    table[qmax + 1] = mpmath.besseli(qmax + 1, t)
    table[qmax] = mpmath.besseli(qmax, t)
    # downward recurrence is stable for I_n
    for n in range(qmax, 0, -1):
        table[n - 1] = table[n + 1] + (2 * n / t) * table[n]
    return table[: qmax + 1]


def _specular_average_mp(qmax, deltas, t, dps):
    with mpmath.workdps(dps):
        u = [mpmath.mpf(1)] + [mpmath.mpf(0)] * qmax
        for d, ti in zip(deltas, t):
            iv = _mp_bessel_table(qmax, mpmath.mpf(ti))
            dm = mpmath.mpf(d)
            c = []
            for mm in range(qmax + 1):
                acc = mpmath.fsum(math.comb(mm, l) * iv[abs(2 * l - mm)] for l in range(mm + 1))
                c.append(acc * dm**mm / mpmath.mpf(2) ** mm)
            u = [
                mpmath.fsum(math.comb(r, a) * u[r - a] * c[a] for a in range(r + 1))
                for r in range(qmax + 1)
            ]
        log_b = np.empty(qmax + 1)
        cond = np.empty(qmax + 1)
        for q in range(qmax + 1):
            terms = [math.comb(q, r) * u[r] for r in range(q + 1)]
            total = mpmath.fsum(terms)
            magnitude = mpmath.fsum(abs(x) for x in terms)
            if total <= 0:
                log_b[q] = -np.inf
                cond[q] = np.inf
            else:
                log_b[q] = float(mpmath.log(total))
                cond[q] = float(magnitude / total)
    return log_b, cond


@functools.lru_cache(maxsize=256)
def _specular_average(qmax: int, deltas: tuple, t: tuple) -> np.ndarray:
    """ln B(q) for q = 0..qmax (see block comment above)."""
    if qmax > MAX_SERIES_TERMS:
        raise NumericError(f"at most {MAX_SERIES_TERMS} series terms are supported")
    if any(ti < 0 for ti in t):
        log_b, cond = _specular_average_shifted(qmax, deltas, t)
    else:
        log_b, cond = _specular_average_float(qmax, deltas, t)
    worst = float(np.max(cond))
    if worst > _MAX_CONDITION:
        dps = 30 + int(math.log10(worst)) if math.isfinite(worst) else 60
        for _ in range(8):
            log_b, cond = _specular_average_mp(qmax, deltas, t, dps)
            worst = float(np.max(cond))
            if math.isfinite(worst) and worst * 10.0 ** (-dps) < 1e-18:
                break
            dps = 30 + int(math.log10(worst)) if math.isfinite(worst) else 2 * dps
        else:
            raise NumericError("closed-form specular average failed to converge in precision")
    log_b.setflags(write=False)
    return log_b


# ---------------------------------------------------------------------------
# Series form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesCoeffs:
    """Gamma-mixture representation ``f(x) = e^{-beta x} sum_k X(k) x^{mu+k-1}``.

    ``log_weights[k]`` is the log mass of the k-th Gamma(mu + k, beta)
    component; ``log_coeffs`` holds ln X(k). Coefficients are kept in log form
    because X(k) itself overflows for small mean SNR.
    """

    params: MtwParams
    beta: float
    log_weights: np.ndarray = field(repr=False)
    converged: bool = True

    @property
    def terms(self) -> int:
        return len(self.log_weights)

    @property
    def log_coeffs(self) -> np.ndarray:
        mu = self.params.mu
        k = np.arange(self.terms)
        return self.log_weights + (mu + k) * math.log(self.beta) - special.gammaln(mu + k)

    @property
    def coeffs(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_coeffs)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def mass_tail(self) -> float:
        """1 - total retained mixture mass."""
        return float(1.0 - np.sum(self.weights))


def _mixture_log_weights(params: MtwParams, qmax: int) -> np.ndarray:
    mu_k = params.mu * params.K
    k = np.arange(qmax + 1)
    t = tuple(-mu_k * d for d in params.deltas)
    log_b = _specular_average(qmax, params.deltas, t)
    return -mu_k + special.xlogy(k, mu_k) - special.gammaln(k + 1.0) + log_b


@functools.lru_cache(maxsize=128)
def series_coeffs(params: MtwParams, policy: NumericPolicy = DEFAULT_POLICY) -> SeriesCoeffs:
    """Mixture weights X(k), truncated once the remaining mass is below tolerance."""
    validate(params)
    mu_k = params.mu * params.K
    if mu_k == 0.0:
        return SeriesCoeffs(params, params.beta, np.zeros(1))
    cap = policy.series_kmax
    # Poisson(mu K (1 + sum Delta)) dominates the index distribution
    lam = mu_k * (1.0 + sum(params.deltas))
    guess = int(math.ceil(lam + 12.0 * math.sqrt(lam) + 30.0))
    # index k runs over 0..qmax, so qmax = cap - 1 gives at most cap terms
    for qmax in (min(guess, cap - 1), cap - 1):
        log_w = _mixture_log_weights(params, qmax)
        tail = 1.0 - np.cumsum(np.exp(log_w))
        hit = np.nonzero(tail < policy.series_rel_tol)[0]
        if hit.size:
            n = int(hit[0]) + 1
            return SeriesCoeffs(params, params.beta, log_w[:n].copy(), True)
        if qmax == cap - 1:
            break
    warnings.warn(
        f"series truncated at {cap} terms with mixture mass {tail[-1]:.3g} unaccounted for",
        TruncationWarning,
        stacklevel=2,
    )
    return SeriesCoeffs(params, params.beta, log_w.copy(), False)


def pdf_series(coeffs: SeriesCoeffs, x):
    """SNR density from the Gamma-mixture series."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("pdf requires x >= 0")
    mu = coeffs.params.mu
    beta = coeffs.beta
    k = np.arange(coeffs.terms)
    flat = x.ravel()
    out = np.empty(flat.shape)
    pos = flat > 0
    if np.any(pos):
        xs = flat[pos][:, None]
        log_terms = coeffs.log_coeffs[None, :] + (mu + k[None, :] - 1.0) * np.log(xs) - beta * xs
        out[pos] = np.exp(special.logsumexp(log_terms, axis=1))
    if np.any(~pos):
        if mu < 1.0:
            out[~pos] = np.inf
        elif mu == 1.0:
            out[~pos] = math.exp(coeffs.log_coeffs[0])
        else:
            out[~pos] = 0.0
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def cdf_series(coeffs: SeriesCoeffs, x):
    """SNR CDF as the weighted sum of regularized lower incomplete gammas."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("cdf requires x >= 0")
    mu = coeffs.params.mu
    weights = coeffs.weights
    y = coeffs.beta * x.ravel()
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    # P(a, y) = P(a + 1, y) + y^a e^{-y} / Gamma(a + 1): downward, all terms positive
    top = coeffs.terms - 1
    p = special.gammainc(mu + top, y)
    total = weights[top] * p
    for k in range(top - 1, -1, -1):
        a = mu + k
        with np.errstate(invalid="ignore"):
            step = np.exp(np.where(y > 0, a * log_y - y - math.lgamma(a + 1.0), -np.inf))
        p = p + step
        total += weights[k] * p
    out = np.clip(total, 0.0, 1.0).reshape(x.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Integral form
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _phase_grid(deltas: tuple, nodes: int):
    """Tensor Gauss-Legendre nodes for averaging over phases in [0, pi]^N.

    Returns (sum_i Delta_i cos th_i, weights) with weights summing to 1.
    """
    if not deltas:
        return np.zeros(1), np.ones(1)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    cos_th = np.cos(0.5 * np.pi * (xg + 1.0))
    w1 = 0.5 * wg
    y = np.zeros(1)
    w = np.ones(1)
    for d in deltas:
        y = (y[:, None] + d * cos_th[None, :]).ravel()
        w = (w[:, None] * w1[None, :]).ravel()
    # 1 + y may round slightly below zero when sum(delta) = 1
    return np.maximum(y, -1.0), w


def _check_dimension(params: MtwParams, policy: NumericPolicy):
    if params.n_two_spec > policy.max_integral_dim:
        raise DimensionTooHighError(
            f"integral form limited to {policy.max_integral_dim} two-specular clusters "
            f"(got {params.n_two_spec}); use the series form"
        )


def _chunks(n_rows: int, n_cols: int, budget: int = 2_000_000):
    step = max(1, budget // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def pdf_integral(params: MtwParams, policy: NumericPolicy, x):
    """SNR density by quadrature of the phase-averaged kappa-mu law.

    The Bessel factor is handled as ``I_nu(z) / z^nu`` with nu = mu - 1, which
    folds the ``(1 + sum Delta cos)^{(1-mu)/2}`` factor into a bounded
    function and keeps K = 0 and the boundary sum(Delta) = 1 regular.
    """
    validate(params)
    _check_dimension(params, policy)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("pdf requires x >= 0")
    mu, K, zeta = params.mu, params.K, params.zeta
    y, w = _phase_grid(params.deltas, policy.quad_nodes_per_dim)
    one_y = 1.0 + y
    flat = x.ravel()
    out = np.empty(flat.shape)
    for sl in _chunks(flat.size, y.size):
        xs = flat[sl][:, None]
        z = 2.0 * mu * np.sqrt(zeta * K * one_y[None, :] * xs)
        log_int = -mu * K * one_y[None, :] + specfun.log_bessel_i_ratio(mu - 1.0, z)
        log_avg = special.logsumexp(log_int, b=w[None, :], axis=1)
        with np.errstate(divide="ignore"):
            log_f = (
                math.log(mu)
                + mu * math.log(zeta)
                + special.xlogy(mu - 1.0, 2.0 * mu * flat[sl])
                - mu * zeta * flat[sl]
                + log_avg
            )
        out[sl] = np.exp(log_f)
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def cdf_integral(params: MtwParams, policy: NumericPolicy, x):
    """SNR CDF by quadrature of ``1 - Q_mu(sqrt(2 mu K (1 + Y)), sqrt(2 x mu zeta))``."""
    validate(params)
    _check_dimension(params, policy)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("cdf requires x >= 0")
    mu, K, zeta = params.mu, params.K, params.zeta
    y, w = _phase_grid(params.deltas, policy.quad_nodes_per_dim)
    a = np.sqrt(2.0 * mu * K * (1.0 + y))
    flat = x.ravel()
    out = np.empty(flat.shape)
    for sl in _chunks(flat.size, y.size, budget=500_000):
        b = np.sqrt(2.0 * flat[sl] * mu * zeta)[:, None]
        inner = specfun.marcum_q_complement(mu, a[None, :], b)
        out[sl] = inner @ w
    raw = out
    if np.any(raw < -1e-12) or np.any(raw > 1.0 + 1e-12):
        raise NumericError("integral CDF left [0, 1] by more than quadrature noise")
    out = np.clip(raw, 0.0, 1.0).reshape(x.shape)
    return out if out.ndim else float(out)


def kappa_mu_pdf(x, kappa: float, mu: float, mean_snr: float):
    """kappa-mu SNR density, evaluated directly (no mixture or quadrature)."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.shape)
    pos = flat > 0
    xp = flat[pos]
    if kappa == 0.0:
        rate = mu / mean_snr
        out[pos] = np.exp(mu * math.log(rate) + (mu - 1.0) * np.log(xp) - rate * xp - math.lgamma(mu))
    else:
        z = 2.0 * mu * np.sqrt(kappa * (1.0 + kappa) * xp / mean_snr)
        out[pos] = np.exp(
            math.log(mu)
            + 0.5 * (mu + 1.0) * math.log1p(kappa)
            - math.log(mean_snr)
            - mu * kappa
            + 0.5 * (mu - 1.0) * np.log(xp / (mean_snr * kappa))
            - mu * (1.0 + kappa) * xp / mean_snr
            + specfun.log_bessel_i(mu - 1.0, z)
        )
    if np.any(~pos):
        if mu < 1.0:
            out[~pos] = np.inf
        elif mu == 1.0:
            out[~pos] = (1.0 + kappa) * math.exp(-kappa) / mean_snr
        else:
            out[~pos] = 0.0
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def _resolve_method(params: MtwParams, policy: NumericPolicy, method: str) -> str:
    if method not in ("auto", "series", "integral"):
        raise DomainError(f"unknown method {method!r}")
    if method != "auto":
        return method
    # no two-wave cluster: the phase average is constant and the integral form is exact
    if not any(params.deltas):
        return "integral"
    # (1 + sum Delta cos)^{(1-mu)/2} is singular at the boundary for mu < 1
    if params.mu < 1.0 and sum(params.deltas) > 0.999:
        return "series"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        coeffs = series_coeffs(params, policy)
    if coeffs.converged or params.n_two_spec > policy.max_integral_dim:
        return "series"
    return "integral"


def pdf(params: MtwParams, x, policy: NumericPolicy = DEFAULT_POLICY, method: str = "auto"):
    """SNR density; ``auto`` uses the series unless it failed to converge.

    Sets without two-wave clusters go straight to the closed kappa-mu form.
    """
    if _resolve_method(params, policy, method) == "series":
        return pdf_series(series_coeffs(params, policy), x)
    return pdf_integral(params, policy, x)


def cdf(params: MtwParams, x, policy: NumericPolicy = DEFAULT_POLICY, method: str = "auto"):
    if _resolve_method(params, policy, method) == "series":
        return cdf_series(series_coeffs(params, policy), x)
    return cdf_integral(params, policy, x)


# ---------------------------------------------------------------------------
# Laplace-domain statistics
# ---------------------------------------------------------------------------


def _pole_gap(params: MtwParams, s: float) -> float:
    scale = params.mu * (1.0 + params.K)
    gap = scale - params.mean_snr * s
    if not gap > _POLE_EPS * scale:
        raise PoleError(
            f"s = {s} is at or beyond the MGF pole mu (1 + K) / mean_snr = {scale / params.mean_snr}"
        )
    return gap


def log_gmgf_range(params: MtwParams, nmax: int, s: float) -> np.ndarray:
    """ln E[gamma^n e^{s gamma}] for n = 0..nmax (closed form)."""
    validate(params)
    if nmax < 0:
        raise DomainError("n must be non-negative")
    mu, K, g = params.mu, params.K, params.mean_snr
    d = _pole_gap(params, s)
    mu_k = mu * K
    t = tuple(mu_k * dl * g * s / d for dl in params.deltas)
    log_b = _specular_average(nmax, params.deltas, t)
    q = np.arange(nmax + 1)
    log_mu1k = math.log(mu * (1.0 + K))
    log_d = math.log(d)
    base_q = (
        special.xlogy(q, mu_k) - special.gammaln(mu + q) + (mu + q) * (log_mu1k - log_d) + log_b
    )
    log_binom = special.gammaln(q + 1.0)
    out = np.empty(nmax + 1)
    for n in range(nmax + 1):
        qq = q[: n + 1]
        lc = log_binom[n] - log_binom[qq] - log_binom[n - qq]
        out[n] = special.logsumexp(lc + base_q[: n + 1]) - n * log_d
    return out + special.xlogy(q, g) + special.gammaln(mu + q) + mu_k * g * s / d


def gmgf(params: MtwParams, n: int, s: float) -> float:
    """Generalized MGF E[gamma^n e^{s gamma}]."""
    return float(np.exp(log_gmgf_range(params, n, s)[n]))


def mgf(params: MtwParams, s: float) -> float:
    """MGF E[e^{s gamma}] in product form."""
    validate(params)
    mu, K, g = params.mu, params.K, params.mean_snr
    d = _pole_gap(params, s)
    scale = mu * (1.0 + K)
    log_m = mu * math.log(scale / d) + mu * K * g * s / d
    for dl in params.deltas:
        log_m += specfun.log_bessel_i(0.0, mu * K * dl * g * s / d)
    return math.exp(log_m)


def moment(params: MtwParams, n: int) -> float:
    """n-th raw moment E[gamma^n].

    Only even exponents survive the phase average of cos^r, so each cluster
    contributes ``(Delta/2)^{r_i} C(r_i, r_i/2) / r_i!`` for even r_i.
    """
    validate(params)
    if n < 0 or int(n) != n:
        raise DomainError("moment order must be a non-negative integer")
    n = int(n)
    mu, K, g = params.mu, params.K, params.mean_snr
    N = params.n_two_spec
    if n == 0:
        return 1.0

    def cluster(d, ri):
        if ri % 2:
            return 0.0
        return (d / 2.0) ** ri / math.factorial(ri) * math.comb(ri, ri // 2)

    total = 0.0
    for q in range(n + 1):
        inner = 0.0
        for r in range(q + 1):
            if N == 0:
                tuple_sum = 1.0 if r == 0 else 0.0
            else:
                tuple_sum = math.fsum(
                    math.prod(cluster(d, ri) for d, ri in zip(params.deltas, tau))
                    for tau in tuples(r, N)
                )
            inner += math.comb(q, r) * math.factorial(r) * tuple_sum
        if q and K == 0.0:
            break
        log_w = (q * math.log(mu * K) if q else 0.0) - math.lgamma(mu + q)
        total += math.comb(n, q) * math.exp(log_w) * inner
    return (g / (mu * (1.0 + K))) ** n * math.exp(math.lgamma(mu + n)) * total


def aof(params: MtwParams) -> float:
    """Amount of fading Var(gamma) / E[gamma]^2."""
    validate(params)
    K, mu = params.K, params.mu
    return ((1.0 + 2.0 * K) / mu + K * K * sum(d * d for d in params.deltas) / 2.0) / (1.0 + K) ** 2


def asymptotic_cdf(params: MtwParams, x):
    """Leading high-SNR term of the CDF; its exponent in x is the diversity order mu."""
    validate(params)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("cdf requires x >= 0")
    mu, K = params.mu, params.K
    log_c = mu * math.log(mu * (1.0 + K)) - math.lgamma(mu + 1.0) - mu * K
    for d in params.deltas:
        log_c += specfun.log_bessel_i(0.0, mu * K * d)
    with np.errstate(divide="ignore"):
        out = np.exp(log_c + mu * np.log(x / params.mean_snr))
    return out if out.ndim else float(out)


class SnrDistribution:
    """Convenience handle bundling parameters with a numeric policy."""

    def __init__(self, params: MtwParams, policy: NumericPolicy = DEFAULT_POLICY):
        self.params = validate(params)
        self.policy = policy

    @property
    def coeffs(self) -> SeriesCoeffs:
        return series_coeffs(self.params, self.policy)

    def pdf(self, x, method: str = "auto"):
        return pdf(self.params, x, self.policy, method)

    def cdf(self, x, method: str = "auto"):
        return cdf(self.params, x, self.policy, method)

    def gmgf(self, n: int, s: float) -> float:
        return gmgf(self.params, n, s)

    def mgf(self, s: float) -> float:
        return mgf(self.params, s)

    def moment(self, n: int) -> float:
        return moment(self.params, n)

    def __repr__(self):
        return f"SnrDistribution({self.params!r})"


def make_params(K: float, deltas: Sequence[float] = (), mu: float = 1.0, mean_snr: float = 1.0) -> MtwParams:
    """Build and validate a parameter set."""
    return validate(MtwParams(K, tuple(deltas), mu, mean_snr))
