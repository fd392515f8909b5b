import math
import re

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from mtw import metrics, model, specfun
from mtw.errors import CombinatorialLimitError, DomainError, TruncationWarning, ValidationError
from mtw.metrics import DetectorConfig, IgParams, InterferenceScenario
from mtw.model import MtwParams

DETECT = MtwParams(10.0, (0.3,), 5.0, 1.0)


def expect(p, g, hi=None):
    """E[g(gamma)] by quadrature over the model density."""
    hi = hi or 30.0 * p.mean_snr
    f = lambda x: g(x) * model.pdf(p, x)
    return integrate.quad(f, 0, p.mean_snr, limit=200)[0] + integrate.quad(f, p.mean_snr, hi, limit=200)[0]


# -- noise-limited outage -----------------------------------------------------


def test_outage_is_cdf_at_rate_threshold():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    assert metrics.outage(p, rate=1.0) == pytest.approx(model.cdf(p, 1.0), rel=1e-15)
    assert metrics.outage(p, rate=2.0) == pytest.approx(model.cdf(p, 3.0), rel=1e-15)
    assert metrics.outage(p, rate=1e-12) < 1e-20
    with pytest.raises(DomainError):
        metrics.outage(p, rate=0.0)


# -- interference-limited outage ----------------------------------------------


def test_single_branch_single_interferer_is_the_mgf():
    p = MtwParams(10.0, (0.8,), 2.0, 3.0)
    sc = InterferenceScenario(1, 1, 0.5, 10.0)
    assert metrics.sir_outage(sc, p) == pytest.approx(model.mgf(p, -1.0 / 5.0), rel=1e-13)


def test_sir_outage_single_branch_quadrature():
    # P(X < beta Y), Y ~ Gamma(L, P_I): E_X[Q(L, X / (beta P_I))]
    p = MtwParams(4.0, (0.6,), 2.0, 20.0)
    sc = InterferenceScenario(1, 3, 0.5, 4.0)
    ref = expect(p, lambda x: special.gammaincc(3, x / 2.0))
    assert metrics.sir_outage(sc, p) == pytest.approx(ref, rel=1e-8)


def pair_expect(p, g, top, nodes=160):
    """E[g(x1 + x2)] for two iid branches; x = t^2 smooths the origin."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * math.sqrt(top) * (t + 1)
    w = 0.5 * math.sqrt(top) * w * 2 * t * model.pdf(p, t * t)
    x = t * t
    return float(w @ g(x[:, None] + x[None, :]) @ w)


def test_sir_outage_two_branch_quadrature():
    p = MtwParams(2.0, (0.5,), 1.5, 10.0)
    sc = InterferenceScenario(2, 2, 1.0, 3.0)
    ref = pair_expect(p, lambda x: special.gammaincc(2, x / 3.0), 250.0)
    assert metrics.sir_outage(sc, p) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("L", [1, 2])
def test_sir_outage_decreases_with_mu(L):
    vals = [metrics.sir_outage(InterferenceScenario(3, L, 1.0 / L, 10.0), MtwParams(10.0, (0.8,), mu, 20.0))
            for mu in (1.0, 2.0, 10.0)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("mu", [1.0, 2.0, 10.0])
@pytest.mark.parametrize("sir_db", [10.0, 15.0, 20.0])
def test_more_interferers_at_fixed_total_power_lowers_outage(mu, sir_db):
    w = 10 ** (sir_db / 10)
    p = MtwParams(10.0, (0.8,), mu, w)
    one = metrics.sir_outage(InterferenceScenario(3, 1, 1.0, 10.0), p)
    two = metrics.sir_outage(InterferenceScenario(3, 2, 0.5, 10.0), p)
    assert two < one


@settings(max_examples=25, deadline=None)
@given(s1=st.floats(0.1, 1e3), s2=st.floats(0.1, 1e3), L=st.integers(1, 4), M=st.integers(1, 4))
def test_sir_outage_bounded_and_monotone(s1, s2, L, M):
    lo, hi = sorted((s1, s2))
    p = MtwParams(3.0, (0.5,), 2.0, 1.0)
    a = metrics.sir_outage(InterferenceScenario(M, L, 1.0, 10.0), p.with_mean_snr(lo))
    b = metrics.sir_outage(InterferenceScenario(M, L, 1.0, 10.0), p.with_mean_snr(hi))
    assert 0.0 <= b <= a + 1e-14 <= 1.0 + 1e-14


def test_sir_guard():
    with pytest.raises(CombinatorialLimitError):
        metrics.sir_outage(InterferenceScenario(30, 12, 1.0, 1.0), DETECT)
    with pytest.raises(ValidationError):
        InterferenceScenario(0, 1, 1.0, 1.0)


# -- energy detection ---------------------------------------------------------


def test_false_alarm_values():
    assert metrics.false_alarm(DetectorConfig(1, 3.0)) == pytest.approx(math.exp(-1.5), rel=1e-15)
    ref = float(mpmath.gammainc(5, 5, mpmath.inf, regularized=True))
    assert metrics.false_alarm(DetectorConfig(5, 10.0)) == pytest.approx(ref, rel=1e-14)
    assert metrics.false_alarm(DetectorConfig(3, 1e-12)) == pytest.approx(1.0)


@pytest.mark.parametrize("u, eta", [(1, 2.0), (2, 6.0), (4, 15.0)])
def test_detection_matches_marcum_average(u, eta):
    # conditional detection probability Q_u(sqrt(2 gamma), sqrt(eta))
    p = MtwParams(3.0, (0.6,), 2.0, 4.0)
    ref = expect(p, lambda x: specfun.marcum_q(u, math.sqrt(2 * x), math.sqrt(eta)), hi=200.0)
    assert metrics.detection_prob(p, DetectorConfig(u, eta)) == pytest.approx(ref, rel=1e-8)


def test_detection_limits():
    cfg = DetectorConfig(2, 5.0)
    quiet = MtwParams(10.0, (0.3,), 5.0, 1e-10)
    assert metrics.detection_prob(quiet, cfg) == pytest.approx(metrics.false_alarm(cfg), rel=1e-8)
    assert metrics.detection_prob(DETECT, DetectorConfig(2, 1e-10)) == pytest.approx(1.0, abs=1e-12)


def test_detection_with_strong_signal_uses_many_terms():
    p = MtwParams(5.0, (0.5,), 3.0, 30.0)
    ref = expect(p, lambda x: specfun.marcum_q(2, math.sqrt(2 * x), math.sqrt(60.0)), hi=600.0)
    assert metrics.detection_prob(p, DetectorConfig(2, 60.0)) == pytest.approx(ref, rel=1e-8)


def test_detection_truncation_is_reported():
    p = MtwParams(5.0, (0.5,), 3.0, 100.0)
    ref = expect(p, lambda x: specfun.marcum_q(2, math.sqrt(2 * x), math.sqrt(150.0)), hi=1000.0)
    with pytest.warns(TruncationWarning, match=r"unaccounted mass ([0-9.e-]+)") as rec:
        got = metrics.detection_prob(p, DetectorConfig(2, 150.0))
    missing = float(re.search(r"unaccounted mass ([0-9.e+-]+)", str(rec[0].message)).group(1))
    # the dropped terms can only add detection probability
    assert got <= ref <= got + missing * 1.01


@settings(max_examples=25, deadline=None)
@given(
    K=st.floats(0.0, 15.0), d=st.floats(0.0, 1.0), mu=st.floats(0.5, 6.0), g=st.floats(0.05, 20.0),
    u=st.integers(1, 4), e1=st.floats(0.01, 50.0), e2=st.floats(0.01, 50.0),
)
def test_detection_properties(K, d, mu, g, u, e1, e2):
    p = MtwParams(K, (d,), mu, g)
    lo, hi = sorted((e1, e2))
    a = metrics.detection_prob(p, DetectorConfig(u, lo))
    b = metrics.detection_prob(p, DetectorConfig(u, hi))
    assert b <= a + 1e-12
    assert b >= metrics.false_alarm(DetectorConfig(u, hi)) - 1e-12


def test_roc_endpoints():
    pf, pd = metrics.roc(DETECT, 2, [1e-9, 1e4])
    assert pf[0] == pytest.approx(1.0) and pd[0] == pytest.approx(1.0)
    assert pf[1] < 1e-100 and pd[1] < 1e-100


def test_roc_rejects_bad_thresholds():
    with pytest.raises(DomainError):
        metrics.roc(DETECT, 1, [1.0, -1.0])


# -- MRC ----------------------------------------------------------------------


def test_mrc_gmgf_reductions():
    p, q = MtwParams(2.0, (0.5,), 2.0, 1.0), MtwParams(5.0, (0.2, 0.3), 3.0, 2.0)
    assert metrics.mrc_gmgf([p], 3, -0.7) == pytest.approx(model.gmgf(p, 3, -0.7), rel=1e-13)
    assert metrics.mrc_gmgf([p, q], 0, -0.7) == pytest.approx(model.mgf(p, -0.7) * model.mgf(q, -0.7), rel=1e-13)


def test_mrc_gmgf_finite_difference():
    p = MtwParams(2.0, (0.5,), 2.0, 1.0)
    s, h = -0.8, 1e-3
    sq = lambda t: model.mgf(p, t) ** 2
    fd = (sq(s + h) - 2 * sq(s) + sq(s - h)) / h**2
    assert metrics.mrc_gmgf([p, p], 2, s) == pytest.approx(fd, rel=1e-5)


def test_mrc_gmgf_heterogeneous_finite_difference():
    p, q = MtwParams(2.0, (0.5,), 2.0, 1.0), MtwParams(5.0, (0.2, 0.3), 3.0, 2.0)
    prod = lambda t: model.mgf(p, t) * model.mgf(q, t)
    s, h = -1.0, 1e-3
    fd = (prod(s + h) - prod(s - h)) / (2 * h)
    assert metrics.mrc_gmgf([p, q], 1, s) == pytest.approx(fd, rel=1e-5)


def test_mrc_guard():
    with pytest.raises(CombinatorialLimitError):
        metrics.mrc_gmgf([DETECT] * 20, 25, -1.0)


def test_mrc_detection_equals_quadrature_of_the_sum():
    p = MtwParams(2.0, (0.5,), 1.5, 1.0)
    u, eta = 2, 8.0
    ref = pair_expect(p, lambda x: specfun.marcum_q(u, np.sqrt(2 * x), math.sqrt(eta)), 40.0)
    assert metrics.detection_prob(p, DetectorConfig(u, eta), branches=2) == pytest.approx(ref, rel=1e-9)


# -- AUC ----------------------------------------------------------------------


def test_auc_chance_level_without_signal():
    assert metrics.auc(MtwParams(10.0, (0.3,), 5.0, 1e-12), 3) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("u", [1, 2, 3])
def test_auc_equals_roc_integral(u):
    eta = np.concatenate([[0.0], np.geomspace(1e-6, 400, 20000)])
    pf, pd = metrics.roc(DETECT, u, eta[1:])
    pf = np.concatenate([[1.0], pf])
    pd = np.concatenate([[1.0], pd])
    area = -integrate.simpson(pd, x=pf)
    assert metrics.auc(DETECT, u) == pytest.approx(area, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(K=st.floats(0.0, 15.0), d=st.floats(0.0, 1.0), mu=st.floats(0.5, 6.0), g=st.floats(0.01, 50.0),
       u=st.integers(1, 5))
def test_auc_between_chance_and_one(K, d, mu, g, u):
    a = metrics.auc(MtwParams(K, (d,), mu, g), u)
    assert 0.5 < a < 1.0


def test_auc_grows_with_branches():
    vals = [metrics.auc(DETECT, 2, branches=m) for m in (1, 2, 3)]
    assert vals[0] < vals[1] < vals[2]


# -- composite inverse-gamma shadowing ----------------------------------------


def test_ig_validation():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    with pytest.raises(DomainError):
        IgParams(1)
    with pytest.raises(DomainError):
        IgParams(2.5)
    with pytest.raises(DomainError):
        metrics.ig_pdf(IgParams(3), p, 0.0)
    with pytest.raises(DomainError):
        metrics.ig_cdf(IgParams(3), p.with_mean_snr(2.0), 1.0)


@pytest.mark.parametrize("lam", [2, 3, 5])
@pytest.mark.parametrize("q", [0.05, 0.5, 1.0, 4.0])
def test_ig_cdf_matches_shadowing_average(lam, q):
    # Q = Qbar G V with G ~ InvGamma(lam, lam - 1) (unit mean)
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    qbar = 1.3
    g = stats.invgamma(lam, scale=lam - 1.0)
    f = lambda t: g.pdf(t) * model.cdf(p, q / (qbar * t))
    ref = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-14)[0] for a, b in [(0, 1), (1, 10), (10, np.inf)])
    assert metrics.ig_cdf(IgParams(lam, qbar), p, q) == pytest.approx(ref, rel=1e-7)


def test_ig_pdf_is_derivative_of_cdf():
    p, ig = MtwParams(3.0, (0.5,), 2.0, 1.0), IgParams(4, 2.0)
    for q in (0.3, 1.7, 5.0):
        h = 1e-5 * q
        fd = (metrics.ig_cdf(ig, p, q + h) - metrics.ig_cdf(ig, p, q - h)) / (2 * h)
        assert metrics.ig_pdf(ig, p, q) == pytest.approx(fd, rel=1e-6)


def test_ig_cdf_tends_to_one():
    assert metrics.ig_cdf(IgParams(3), MtwParams(1.0, (0.8,), 2.0, 1.0), 1e9) == pytest.approx(1.0, abs=1e-8)


def test_ig_outage_shape():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    th = np.geomspace(0.01, 1.0, 8)
    for lam in (2, 5):
        vals = [metrics.ig_outage(IgParams(lam), p, t) for t in th]
        assert np.all(np.diff(vals) > 0)
    # heavier shadowing (smaller lambda) hurts at low thresholds
    assert metrics.ig_outage(IgParams(2), p, 0.05) > metrics.ig_outage(IgParams(5), p, 0.05) > \
        metrics.ig_outage(IgParams(50), p, 0.05)


def test_ig_outage_uses_link_mean_snr():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    ig = IgParams(3, mean_power=2.0, mean_snr_q=10.0)
    assert metrics.ig_outage(ig, p, 4.0) == pytest.approx(metrics.ig_cdf(ig, p, 2.0 * 4.0 / 10.0), rel=1e-15)
