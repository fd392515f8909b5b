"""Performance metrics over MTW fading built on the generalized MGF.

Covers noise-limited outage, interference-limited outage with MRC and
Rayleigh interferers, energy detection (detection probability, ROC, AUC, with
optional MRC) and the composite Inverse-Gamma/MTW shadowing model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import CombinatorialLimitError, DomainError, TruncationWarning, ValidationError
from .model import DEFAULT_POLICY, MtwParams, NumericPolicy, cdf, log_gmgf_range, tuples, validate

# Enumerating tau(r, M) costs C(r + M - 1, M - 1); refuse beyond this.
MAX_TUPLE_ORDER = 40
DETECTION_REL_TOL = 1e-10
_DETECTION_MAX_TERMS = 400


@dataclass(frozen=True)
class DetectorConfig:
    u: int
    eta: float

    def __post_init__(self):
        if int(self.u) != self.u or self.u < 1:
            raise ValidationError("u must be a positive integer")
        if not self.eta > 0:
            raise ValidationError("eta must be positive")


@dataclass(frozen=True)
class InterferenceScenario:
    branches: int
    interferers: int
    interferer_power: float
    threshold: float

    def __post_init__(self):
        if self.branches < 1 or self.interferers < 1:
            raise ValidationError("branch and interferer counts must be positive")
        if not (self.interferer_power > 0 and self.threshold > 0):
            raise ValidationError("interferer power and SIR threshold must be positive")


@dataclass(frozen=True)
class IgParams:
    lam: int
    mean_power: float = 1.0
    mean_snr_q: float = 1.0

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 2:
            raise DomainError("the IG shape must be an integer >= 2")
        if not (self.mean_power > 0 and self.mean_snr_q > 0):
            raise ValidationError("mean power and mean SNR must be positive")


def outage(params: MtwParams, policy: NumericPolicy = DEFAULT_POLICY, rate: float = 1.0,
           method: str = "auto") -> float:
    """P(log2(1 + gamma) < rate)."""
    if not rate > 0:
        raise DomainError("rate must be positive")
    return float(cdf(params, math.expm1(rate * math.log(2.0)), policy, method))


def _check_tuple_order(r: int, m: int):
    if r + m > MAX_TUPLE_ORDER:
        raise CombinatorialLimitError(
            f"tuple enumeration with r + M = {r + m} exceeds the limit of {MAX_TUPLE_ORDER}"
        )


def _mrc_log_gmgf(branch_logs: Sequence[np.ndarray], r: int) -> float:
    """ln sum_{tau(r, M)} r!/prod r_i! prod_i phi_i^{(r_i)}."""
    m = len(branch_logs)
    _check_tuple_order(r, m)
    log_r_fact = math.lgamma(r + 1.0)
    terms = [
        log_r_fact + sum(branch_logs[i][ri] - math.lgamma(ri + 1.0) for i, ri in enumerate(tau))
        for tau in tuples(r, m)
    ]
    return float(special.logsumexp(terms))


def mrc_gmgf(params_per_branch: Sequence[MtwParams], r: int, s: float) -> float:
    """Generalized MGF of the MRC output SNR (sum of independent branch SNRs)."""
    if not params_per_branch:
        raise DomainError("at least one branch is required")
    if r < 0:
        raise DomainError("r must be non-negative")
    _check_tuple_order(r, len(params_per_branch))
    logs = [log_gmgf_range(p, r, s) for p in params_per_branch]
    return math.exp(_mrc_log_gmgf(logs, r))


def _combined_log_gmgf(params: MtwParams | Sequence[MtwParams], nmax: int, s: float,
                       branches: int = 1) -> np.ndarray:
    """ln phi^{(n)}(s) of the (possibly MRC-combined) SNR for n = 0..nmax."""
    if isinstance(params, MtwParams):
        params = [params] * branches
    params = list(params)
    if len(params) == 1:
        return log_gmgf_range(params[0], nmax, s)
    _check_tuple_order(nmax, len(params))
    cache: dict[MtwParams, np.ndarray] = {}
    logs = []
    for p in params:
        if p not in cache:
            cache[p] = log_gmgf_range(p, nmax, s)
        logs.append(cache[p])
    return np.array([_mrc_log_gmgf(logs, n) for n in range(nmax + 1)])


def sir_outage(scenario: InterferenceScenario, params: MtwParams,
               policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Outage of an M-branch MRC receiver against L equal-power Rayleigh interferers.

    ``params.mean_snr`` is read as the average desired-signal power per branch.
    """
    validate(params)
    m, L = scenario.branches, scenario.interferers
    _check_tuple_order(L - 1, m)
    bp = scenario.threshold * scenario.interferer_power
    s = -1.0 / bp
    log_phi = log_gmgf_range(params, L - 1, s)
    log_fact = special.gammaln(np.arange(L) + 1.0)
    total = []
    for r in range(L):
        for tau in tuples(r, m):
            total.append(-r * math.log(bp) + sum(log_phi[ri] - log_fact[ri] for ri in tau))
    return float(min(1.0, math.exp(special.logsumexp(total))))


def false_alarm(config: DetectorConfig) -> float:
    """P_f = e^{-eta/2} sum_{k<u} (eta/2)^k / k!, i.e. Q(u, eta/2)."""
    return float(special.gammaincc(config.u, config.eta / 2.0))


def _detection_log_weights(params, branches: int) -> np.ndarray:
    """ln(phi^{(n)}(-1) / n!) for enough n that the weights sum to 1 - tol.

    These are the average Poisson(gamma) probabilities, so they sum to one.
    """
    nmax = 24
    limit = _DETECTION_MAX_TERMS if branches == 1 else MAX_TUPLE_ORDER - branches
    while True:
        nmax = min(nmax, limit)
        log_w = _combined_log_gmgf(params, nmax, -1.0, branches) - special.gammaln(np.arange(nmax + 1) + 1.0)
        remaining = 1.0 - float(np.sum(np.exp(log_w)))
        if remaining < 0.01 * DETECTION_REL_TOL or nmax >= limit:
            break
        nmax *= 2
    if remaining >= 0.01 * DETECTION_REL_TOL:
        warnings.warn(
            f"detection series truncated at {nmax} terms (unaccounted mass {remaining:.3g})",
            TruncationWarning, stacklevel=3,
        )
    return log_w


def _detection_from_weights(log_w: np.ndarray, u: int, eta) -> np.ndarray:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    n = np.arange(log_w.size)
    tails = special.gammaincc(u + n[None, :], eta[:, None] / 2.0)
    # the weights were already truncated on their remaining mass, which bounds
    # every later increment since Q(u + n, .) <= 1
    out = tails @ np.exp(log_w)
    return np.clip(out, 0.0, 1.0)


def detection_prob(params: MtwParams, config: DetectorConfig,
                   policy: NumericPolicy = DEFAULT_POLICY, branches: int = 1) -> float:
    """Average energy-detection probability (optionally with M-branch MRC)."""
    validate(params)
    log_w = _detection_log_weights(params, branches)
    return float(_detection_from_weights(log_w, config.u, config.eta)[0])


def roc(params: MtwParams, u: int, etas, policy: NumericPolicy = DEFAULT_POLICY,
        branches: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(P_f, P_d) pairs over a threshold sweep."""
    validate(params)
    DetectorConfig(u, 1.0)
    etas = np.asarray(etas, dtype=float)
    if np.any(etas <= 0):
        raise DomainError("thresholds must be positive")
    log_w = _detection_log_weights(params, branches)
    pd = _detection_from_weights(log_w, u, etas)
    pf = special.gammaincc(u, etas / 2.0)
    return pf, pd


def auc(params: MtwParams, u: int, policy: NumericPolicy = DEFAULT_POLICY,
        branches: int = 1) -> float:
    """Average area under the ROC curve."""
    validate(params)
    if int(u) != u or u < 1:
        raise DomainError("u must be a positive integer")
    log_phi = _combined_log_gmgf(params, u - 1, -0.5, branches)
    total = 0.0
    for q in range(u):
        for n in range(q + 1):
            total += math.comb(q + u - 1, q - n) * math.exp(
                -(n + q + u) * math.log(2.0) - math.lgamma(n + 1.0) + log_phi[n]
            )
    return 1.0 - total


def _check_unit_mean(params: MtwParams):
    if abs(params.mean_snr - 1.0) > 1e-12:
        raise DomainError("the composite model needs the multipath part normalised to mean_snr = 1")


def ig_pdf(ig: IgParams, params: MtwParams, q: float) -> float:
    """Density of the received power Q = mean_power * G * V, G inverse-gamma."""
    validate(params)
    _check_unit_mean(params)
    if not q > 0:
        raise DomainError("q must be positive")
    lam, qbar = ig.lam, ig.mean_power
    s = (1.0 - lam) * qbar / q
    log_phi = log_gmgf_range(params, lam, s)[lam]
    return math.exp(
        lam * math.log(qbar * (lam - 1.0)) - (lam + 1.0) * math.log(q) - math.lgamma(lam) + log_phi
    )


def ig_cdf(ig: IgParams, params: MtwParams, q: float) -> float:
    """CDF of Q for integer IG shape."""
    validate(params)
    _check_unit_mean(params)
    if not q > 0:
        raise DomainError("q must be positive")
    lam, qbar = ig.lam, ig.mean_power
    s = (1.0 - lam) * qbar / q
    log_phi = log_gmgf_range(params, lam - 1, s)
    n = np.arange(lam)
    terms = n * math.log(qbar * (lam - 1.0) / q) - special.gammaln(n + 1.0) + log_phi
    return float(min(1.0, math.exp(special.logsumexp(terms))))


def ig_outage(ig: IgParams, params: MtwParams, gamma_th: float) -> float:
    """P(SNR < gamma_th) under IG/MTW fading with mean SNR ``ig.mean_snr_q``."""
    if not gamma_th > 0:
        raise DomainError("gamma_th must be positive")
    return ig_cdf(ig, params, ig.mean_power * gamma_th / ig.mean_snr_q)
