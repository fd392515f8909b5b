"""Regenerate the frozen reference values used by the model tests.

The density is the phase average of the conditional kappa-mu law evaluated
with mpmath at 30 digits; the CDF integrates that density. None of the
package code is used. Run: python3 tests/oracles/generate_reference.py
"""

import json

import mpmath as mp

mp.mp.dps = 30


def cond_pdf(x, K, mu, g, y):
    """Conditional SNR density given sum_i Delta_i cos(theta_i) = y."""
    kt = K * (1 + y)
    z = 2 * mu * mp.sqrt(kt * (1 + K) * x / g)
    c = mu * (1 + K) / g
    if kt == 0:
        return c**mu * x ** (mu - 1) * mp.exp(-c * x) / mp.gamma(mu)
    return (mu * (1 + K) ** ((mu + 1) / 2) / (g * mp.exp(mu * kt)) * (x / (g * kt)) ** ((mu - 1) / 2)
            * mp.exp(-c * x) * mp.besseli(mu - 1, z))


def pdf(x, K, deltas, mu, g):
    x, K, mu, g = map(mp.mpf, (x, K, mu, g))
    deltas = [mp.mpf(d) for d in deltas]
    if not deltas:
        return cond_pdf(x, K, mu, g, 0)
    if len(deltas) == 1:
        return mp.quad(lambda t: cond_pdf(x, K, mu, g, deltas[0] * mp.cos(t)), [0, mp.pi / 2, mp.pi]) / mp.pi
    return mp.quad(lambda t1, t2: cond_pdf(x, K, mu, g, deltas[0] * mp.cos(t1) + deltas[1] * mp.cos(t2)),
                   [0, mp.pi], [0, mp.pi]) / mp.pi**2


def cdf(x, K, deltas, mu, g):
    return mp.quad(lambda t: pdf(t, K, deltas, mu, g), [0, x])


CASES = {
    "split_mu2": ((1.0, [0.8], 2.0, 1.0), [0.05, 0.3, 1.0, 2.5, 5.0]),
    "split_mu50": ((1.0, [0.8], 50.0, 1.0), [0.7, 0.85, 1.0, 1.2]),
    "two_clusters": ((3.0, [0.4, 0.5], 2.5, 2.0), [0.2, 1.5, 4.0]),
    "large_k": ((29.63, [0.28], 8.17, 1.0), [0.5, 1.0, 1.5]),
    "small_mu": ((2.0, [0.5], 0.6, 1.0), [0.1, 1.0, 3.0]),
}
CDF_CASES = {
    "split_mu2": [0.3, 1.0, 2.5],
    "small_mu": [0.1, 1.0],
}

if __name__ == "__main__":
    out = {}
    for name, ((K, deltas, mu, g), xs) in CASES.items():
        out[name] = {"params": [K, deltas, mu, g],
                     "pdf": [[x, mp.nstr(pdf(x, K, deltas, mu, g), 20)] for x in xs]}
        if name in CDF_CASES:
            out[name]["cdf"] = [[x, mp.nstr(cdf(x, K, deltas, mu, g), 20)] for x in CDF_CASES[name]]
    print(json.dumps(out, indent=1))
