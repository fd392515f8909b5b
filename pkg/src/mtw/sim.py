"""Monte Carlo generator for the physical MTW channel and empirical-distribution tools.

Each of the ``mu`` clusters contributes

    Z_i = V_i1 exp(j phi_i1) + V_i2 exp(j phi_i2) + X_i + j Y_i,

with uniform phases and X_i, Y_i ~ N(0, sigma^2). The received SNR is
``gamma = (Es/N0) * sum_i |Z_i|^2``. Sampling is split into fixed-size blocks,
each with its own counter-based Philox stream derived from ``(seed, block)``,
so results do not depend on how blocks are scheduled across threads.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, ValidationError
from .model import MtwParams, validate

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class PhysicalConfig:
    mu_int: int
    specular_amplitudes: tuple[tuple[float, float], ...]
    sigma2: float
    es_n0: float
    n_two_spec: int = 0

    def __post_init__(self):
        if self.mu_int < 1:
            raise ValidationError("mu_int must be a positive integer")
        if len(self.specular_amplitudes) != self.mu_int:
            raise ValidationError("one amplitude pair per cluster is required")
        if not (self.sigma2 > 0 and self.es_n0 > 0):
            raise ValidationError("sigma2 and es_n0 must be positive")

    @property
    def specular_power(self) -> float:
        return sum(v1 * v1 + v2 * v2 for v1, v2 in self.specular_amplitudes)

    def derived_params(self) -> MtwParams:
        """Recover (K, Delta, mu, mean SNR) from the amplitudes."""
        p = self.specular_power
        K = p / (2.0 * self.sigma2 * self.mu_int)
        deltas = tuple(
            (2.0 * v1 * v2 / p if p > 0 else 0.0)
            for v1, v2 in self.specular_amplitudes[: self.n_two_spec]
        )
        mean_snr = self.es_n0 * (p + 2.0 * self.sigma2 * self.mu_int)
        return MtwParams(K, deltas, float(self.mu_int), mean_snr)


@dataclass
class EnvelopeSamples:
    values: np.ndarray
    seed: int | None = None
    kind: str = "snr"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in ("envelope", "snr", "power"):
            raise ValidationError(f"unknown sample kind {self.kind!r}")
        if self.values.ndim != 1:
            raise ValidationError("samples must be one-dimensional")
        if np.any(~np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValidationError("samples must be finite and non-negative")

    @property
    def count(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.count

    def as_envelope(self) -> EnvelopeSamples:
        if self.kind == "envelope":
            return self
        return EnvelopeSamples(np.sqrt(self.values), self.seed, "envelope", dict(self.meta))


def _integer_mu(mu: float) -> int:
    m = int(round(mu))
    if abs(mu - m) > 1e-12 or m < 1:
        raise ValidationError(f"the physical simulator needs an integer mu >= 1, got {mu}")
    return m


def amplitudes_from_params(params: MtwParams, sigma2: float = 0.5) -> PhysicalConfig:
    """Pick specular amplitudes realising (K, Delta) for an integer cluster count.

    Total specular power ``P = 2 sigma^2 mu K``. Power not tied up in the
    two-wave asymmetry, ``P (1 - sum Delta)``, is spread equally over the N
    two-wave clusters; within cluster i the squared amplitudes are the roots
    of ``t^2 - p_i t + (Delta_i P / 2)^2``. With N = 0 all specular power
    goes into one single-wave cluster.
    """
    validate(params)
    mu = _integer_mu(params.mu)
    n = params.n_two_spec
    if n > mu:
        raise ValidationError(f"{n} two-specular clusters do not fit in {mu} clusters")
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    p_total = 2.0 * sigma2 * mu * params.K
    amps = [(0.0, 0.0)] * mu
    if n == 0:
        if p_total > 0:
            amps[0] = (math.sqrt(p_total), 0.0)
    elif p_total > 0:
        # split powers normalised by p_total so tiny K does not underflow
        scale = math.sqrt(p_total)
        leftover = max(0.0, 1.0 - sum(params.deltas)) / n
        for i, d in enumerate(params.deltas):
            p_i = d + leftover
            disc = p_i * p_i - d * d  # d = 2 V1 V2 / p_total
            assert disc >= -1e-12 * max(p_i * p_i, 1e-300), "infeasible amplitude split"
            root = math.sqrt(max(disc, 0.0))
            v1_sq = 0.5 * (p_i + root)
            v2_sq = max(0.0, 0.5 * (p_i - root))
            amps[i] = (scale * math.sqrt(v1_sq), scale * math.sqrt(v2_sq))
    es_n0 = params.mean_snr / (2.0 * sigma2 * mu * (1.0 + params.K))
    return PhysicalConfig(mu, tuple(amps), float(sigma2), es_n0, n)


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _power_block(config: PhysicalConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    sd = math.sqrt(config.sigma2)
    w = np.zeros(size)
    for v1, v2 in config.specular_amplitudes:
        re = rng.normal(0.0, sd, size)
        im = rng.normal(0.0, sd, size)
        if v1 > 0:
            phi = rng.uniform(0.0, 2.0 * np.pi, size)
            re += v1 * np.cos(phi)
            im += v1 * np.sin(phi)
        if v2 > 0:
            phi = rng.uniform(0.0, 2.0 * np.pi, size)
            re += v2 * np.cos(phi)
            im += v2 * np.sin(phi)
        w += re * re + im * im
    return w


def default_threads() -> int:
    env = os.environ.get("MTW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _blocked(n: int, seed: int, fn: Callable[[int, np.random.Generator], np.ndarray], threads):
    if n < 1:
        raise DomainError("sample count must be at least 1")
    # every block is drawn at full size so a shorter run is a prefix of a longer one
    jobs = list(range((n + BLOCK_SIZE - 1) // BLOCK_SIZE))

    def run(b):
        return fn(BLOCK_SIZE, _rng(seed, b))

    threads = threads or default_threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts)[:n]


def sample_snr(config: PhysicalConfig, n: int, seed: int, threads: int | None = None) -> EnvelopeSamples:
    """Draw n SNR samples from the physical model; deterministic in ``seed``."""
    values = _blocked(n, seed, lambda size, rng: config.es_n0 * _power_block(config, size, rng), threads)
    return EnvelopeSamples(values, seed, "snr", {"params": config.derived_params().as_dict()})


def sample_params(params: MtwParams, n: int, seed: int, threads: int | None = None) -> EnvelopeSamples:
    """Shortcut: realise ``params`` physically and draw SNR samples."""
    return sample_snr(amplitudes_from_params(params), n, seed, threads)


def ks_distance(samples: EnvelopeSamples | np.ndarray, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between the samples and a model CDF."""
    values = samples.values if isinstance(samples, EnvelopeSamples) else np.asarray(samples, float)
    if values.size == 0:
        raise DomainError("ks_distance needs at least one sample")
    x = np.sort(values)
    n = x.size
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        f = np.array([float(cdf(v)) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))


def ks_critical(n: int, confidence: float = 0.99) -> float:
    """Asymptotic one-sample KS critical value c(alpha) / sqrt(n)."""
    alpha = 1.0 - confidence
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


def simulate_sir_outage(
    params: MtwParams, branches: int, interferers: int, interferer_power: float,
    threshold: float, n: int, seed: int,
) -> tuple[float, float]:
    """Empirical P(sum of MRC branch powers / total Rayleigh interference < threshold).

    Returns (estimate, binomial standard error).
    """
    config = amplitudes_from_params(params)

    def block(size, rng):
        x = np.zeros(size)
        for _ in range(branches):
            x += config.es_n0 * _power_block(config, size, rng)
        y = rng.gamma(interferers, interferer_power, size)
        return (x < threshold * y).astype(float)

    hits = _blocked(n, seed, block, None)
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1.0 - p), 1e-300) / n)


def simulate_energy_detector(
    params: MtwParams, u: int, eta: float, n: int, seed: int, branches: int = 1,
) -> tuple[float, float]:
    """Empirical detection probability of an energy detector with MRC.

    Given the combined SNR gamma, the test statistic is noncentral chi-square
    with 2u degrees of freedom and noncentrality 2 gamma.
    """
    config = amplitudes_from_params(params)

    def block(size, rng):
        g = np.zeros(size)
        for _ in range(branches):
            g += config.es_n0 * _power_block(config, size, rng)
        stat = rng.noncentral_chisquare(2 * u, np.maximum(2.0 * g, 1e-300))
        return (stat > eta).astype(float)

    hits = _blocked(n, seed, block, None)
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1.0 - p), 1e-300) / n)


def save_samples(path: str | os.PathLike, samples: EnvelopeSamples, params: MtwParams | None = None) -> Path:
    """Write one value per line plus a ``<path>.json`` sidecar."""
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        for v in samples.values:
            fh.write(f"{v:.17g}\n")
    sidecar = {"seed": samples.seed, "n": samples.count, "kind": samples.kind,
               "params": params.as_dict() if params else samples.meta.get("params")}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path
