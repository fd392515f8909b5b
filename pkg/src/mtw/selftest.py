"""Reduced-scale oracle cross-checks run by ``mtw selftest``."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from . import metrics, model, sim, specfun
from .model import MtwParams


def _series_vs_integral():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    x = np.linspace(0.0, 5.0, 101)
    err = np.max(np.abs(model.pdf(p, x, method="series") - model.pdf(p, x, method="integral")))
    return err < 1e-8, f"sup difference {err:.3g}"


def _cdf_forms():
    p = MtwParams(2.0, (0.5, 0.3), 3.0, 2.0)
    x = np.linspace(0.0, 8.0, 41)
    err = np.max(np.abs(model.cdf(p, x, method="series") - model.cdf(p, x, method="integral")))
    return err < 1e-8, f"sup difference {err:.3g}"


def _moments():
    p = MtwParams(3.0, (0.6,), 2.5, 1.7)
    m0, m1 = model.moment(p, 0), model.moment(p, 1)
    m2 = model.moment(p, 2)
    ok = m0 == 1.0 and abs(m1 / 1.7 - 1) < 1e-12 and abs(m2 / model.gmgf(p, 2, 0.0) - 1) < 1e-10
    return ok, f"moments {m0}, {m1}, {m2}"


def _aof():
    p = MtwParams(2.0, (0.4, 0.5), 3.0, 1.0)
    via_moments = model.moment(p, 2) / model.moment(p, 1) ** 2 - 1.0
    err = abs(model.aof(p) - via_moments)
    return err < 1e-10, f"difference {err:.3g}"


def _gmgf_derivative():
    p = MtwParams(1.5, (0.7,), 2.0, 1.0)
    s, h = -1.0, 1e-4
    fd = (model.mgf(p, s + h) - model.mgf(p, s - h)) / (2 * h)
    rel = abs(fd / model.gmgf(p, 1, s) - 1)
    return rel < 1e-6, f"relative difference {rel:.3g}"


def _marcum():
    vals = [(1.0, 1.5, 2.0), (2.5, 3.0, 1.0), (0.7, 0.5, 4.0)]
    err = max(abs(specfun.marcum_q(*v) - specfun.marcum_q_quad(*v)) for v in vals)
    return err < 1e-10, f"max difference {err:.3g}"


def _kappa_mu():
    p = MtwParams(2.0, (0.0,), 3.0, 1.0)
    x = np.linspace(0.01, 4.0, 50)
    err = np.max(np.abs(model.pdf(p, x) - model.kappa_mu_pdf(x, 2.0, 3.0, 1.0)))
    return err < 1e-10, f"sup difference {err:.3g}"


def _monte_carlo():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    n = 20000
    samples = sim.sample_params(p, n, seed=0, threads=1)
    d = sim.ks_distance(samples, lambda x: model.cdf(p, x))
    crit = sim.ks_critical(n, 0.99)
    return d < crit, f"KS {d:.4g} vs critical {crit:.4g}"


def _detection():
    p = MtwParams(10.0, (0.3,), 5.0, 1.0)
    cfg = metrics.DetectorConfig(2, 6.0)
    pd, pf = metrics.detection_prob(p, cfg), metrics.false_alarm(cfg)
    a = metrics.auc(p, 2)
    return pd > pf and 0.5 < a < 1.0, f"pd {pd:.4g}, pf {pf:.4g}, auc {a:.4g}"


def _composite():
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    ig = metrics.IgParams(3)
    f = lambda q: metrics.ig_pdf(ig, p, q)
    total = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in ((0, 1), (1, 20))) + \
        integrate.quad(f, 20, math.inf, limit=200)[0]
    return abs(total - 1) < 1e-5, f"integral {total:.8g}"


CHECKS = [
    ("series-vs-integral-pdf", _series_vs_integral),
    ("series-vs-integral-cdf", _cdf_forms),
    ("moment-identities", _moments),
    ("aof-closed-form", _aof),
    ("gmgf-derivative", _gmgf_derivative),
    ("marcum-q-quadrature", _marcum),
    ("kappa-mu-reduction", _kappa_mu),
    ("monte-carlo-ks", _monte_carlo),
    ("energy-detection", _detection),
    ("composite-normalisation", _composite),
]


def run_checks():
    """Yield (name, passed, detail) for each check; exceptions count as failures."""
    for name, fn in CHECKS:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crash of the runner
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail
