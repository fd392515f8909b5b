"""Fit MTW parameters to measured envelope samples.

The pipeline normalises the envelope to unit mean power, builds a density
histogram and minimises the mean-square error between the histogram and the
model envelope density ``f_R(r) = 2 r f_gamma(r^2)`` with a Nelder-Mead
simplex search from several deterministic starting points.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import DomainError, NumericError, TruncationWarning, ValidationError
from .model import MtwParams, NumericPolicy, pdf
from .sim import EnvelopeSamples

MIN_SAMPLES = 100
MIN_BINS, MAX_BINS = 20, 200
MAX_EVALS = 2000
SIMPLEX_TOL = 1e-6

# The search allows large K, so the series needs a deeper cap than the default.
FIT_POLICY = NumericPolicy(series_kmax=600)

# Box for the search coordinates (ln K, ln mu); outside it the objective is +inf.
_LOG_K_RANGE = (-12.0, math.log(500.0))
_LOG_MU_RANGE = (math.log(0.05), math.log(200.0))
# Range of the quasi-random starts.
_START_LOG_K = (math.log(0.05), math.log(40.0))
_START_LOG_MU = (math.log(0.5), math.log(15.0))
_START_C = (-3.0, 3.0)


@dataclass(frozen=True)
class EmpiricalPdf:
    bin_centers: np.ndarray
    densities: np.ndarray
    bin_width: float
    sample_count: int

    def __post_init__(self):
        if self.bin_centers.shape != self.densities.shape or self.bin_centers.size < 1:
            raise ValidationError("bin centers and densities must match and be non-empty")
        if np.any(np.diff(self.bin_centers) <= 0):
            raise ValidationError("bin centers must be strictly increasing")
        if np.any(self.densities < 0) or not self.bin_width > 0:
            raise ValidationError("densities must be non-negative and the bin width positive")

    @property
    def bins(self) -> int:
        return int(self.bin_centers.size)


@dataclass
class FitReport:
    params: MtwParams
    mse: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list, repr=False)
    normalization_scale: float = 1.0
    start_index: int = 0

    def as_dict(self) -> dict:
        return {
            "params": {"K": self.params.K, "delta": list(self.params.deltas), "mu": self.params.mu},
            "mse": self.mse,
            "iterations": self.iterations,
            "converged": self.converged,
            "normalization_scale": self.normalization_scale,
        }


def normalize_envelope(values) -> tuple[np.ndarray, float]:
    """Scale an envelope to unit mean power; returns (scaled values, scale)."""
    values = np.asarray(values, dtype=float)
    scale = math.sqrt(float(np.mean(values * values)))
    if not scale > 0:
        raise ValidationError("samples have zero power")
    return values / scale, scale


def _parse_float(text: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"line {lineno}: cannot parse {text.strip()!r} as a number") from None
    if not math.isfinite(v):
        raise ValidationError(f"line {lineno}: value is not finite")
    if v < 0:
        raise ValidationError(f"line {lineno}: negative envelope value {v}")
    return v


def load_samples(path, format: str = "plain", column: int | str = 0, normalize: bool = True) -> EnvelopeSamples:
    """Read envelope samples from a text file.

    ``plain`` expects one number per line (blank lines and ``#`` comments are
    skipped). ``csv`` picks ``column`` by index or header name; a first row
    that does not parse as numbers is taken as a header.
    """
    path = Path(path)
    values = []
    with path.open(newline="") as fh:
        if format == "plain":
            for lineno, line in enumerate(fh, 1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                values.append(_parse_float(text, lineno))
        elif format in ("csv", "csv-column"):
            rows = csv.reader(fh)
            idx = column if isinstance(column, int) else None
            for lineno, row in enumerate(rows, 1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if idx is None or (lineno == 1 and not values and not _numeric_row(row)):
                    if idx is None:
                        names = [c.strip() for c in row]
                        if column not in names:
                            raise ValidationError(f"line {lineno}: no column named {column!r}")
                        idx = names.index(column)
                    continue
                if idx >= len(row):
                    raise ValidationError(f"line {lineno}: missing column {idx}")
                values.append(_parse_float(row[idx], lineno))
        else:
            raise ValidationError(f"unknown sample format {format!r}")
    if not values:
        raise ValidationError(f"{path}: no samples found")
    raw = np.array(values)
    if normalize:
        scaled, scale = normalize_envelope(raw)
    else:
        scaled, scale = raw, 1.0
    return EnvelopeSamples(scaled, None, "envelope", {"normalization_scale": scale, "source": str(path)})


def _numeric_row(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True


def _fd_bins(values: np.ndarray) -> int:
    q75, q25 = np.percentile(values, [75, 25])
    span = float(values.max() - values.min())
    width = 2.0 * (q75 - q25) / values.size ** (1.0 / 3.0)
    if not (width > 0 and span > 0):
        return MIN_BINS
    return int(min(MAX_BINS, max(MIN_BINS, math.ceil(span / width))))


def empirical_pdf(samples: EnvelopeSamples | np.ndarray, bins: int | str = "auto") -> EmpiricalPdf:
    """Density-normalised histogram of envelope samples."""
    if isinstance(samples, EnvelopeSamples):
        values = samples.as_envelope().values
    else:
        values = np.asarray(samples, dtype=float)
    if values.size < MIN_SAMPLES:
        raise ValidationError(f"at least {MIN_SAMPLES} samples are needed, got {values.size}")
    if bins == "auto":
        bins = _fd_bins(values)
    elif int(bins) != bins or bins < 1:
        raise ValidationError("bins must be a positive integer or 'auto'")
    counts, edges = np.histogram(values, bins=int(bins))
    width = float(edges[1] - edges[0])
    centers = 0.5 * (edges[:-1] + edges[1:])
    dens = counts / (values.size * width)
    return EmpiricalPdf(centers, dens, width, int(values.size))


def envelope_pdf(params: MtwParams, r, policy: NumericPolicy = FIT_POLICY):
    """f_R(r) = 2 r f_gamma(r^2)."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r * pdf(params, r * r, policy)


def mse_objective(hist: EmpiricalPdf, params: MtwParams, policy: NumericPolicy = FIT_POLICY) -> float:
    """Mean-square error between the histogram and the model envelope density."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        model = envelope_pdf(params.with_mean_snr(1.0), hist.bin_centers, policy)
    return float(np.mean((hist.densities - model) ** 2))


def _to_params(z: np.ndarray) -> MtwParams | None:
    a, b = z[0], z[1]
    if not (_LOG_K_RANGE[0] <= a <= _LOG_K_RANGE[1] and _LOG_MU_RANGE[0] <= b <= _LOG_MU_RANGE[1]):
        return None
    c = np.asarray(z[2:], dtype=float)
    if c.size and np.any(np.abs(c) > 40.0):
        return None
    e = np.exp(c)
    deltas = tuple(e / (1.0 + e.sum()))
    return MtwParams(math.exp(a), deltas, math.exp(b), 1.0)


def _from_params(params: MtwParams) -> np.ndarray:
    d = np.asarray(params.deltas, dtype=float)
    rest = 1.0 - d.sum()
    return np.concatenate([[math.log(params.K), math.log(params.mu)], np.log(d / rest)])


def start_points(n_two_spec: int, restarts: int) -> np.ndarray:
    """Deterministic quasi-random starting points in search coordinates."""
    dim = 2 + n_two_spec
    u = qmc.Halton(d=dim, scramble=False).random(restarts + 1)[1:]
    lo = np.array([_START_LOG_K[0], _START_LOG_MU[0]] + [_START_C[0]] * n_two_spec)
    hi = np.array([_START_LOG_K[1], _START_LOG_MU[1]] + [_START_C[1]] * n_two_spec)
    return lo + u * (hi - lo)


def _run_start(hist, z0, policy):
    trace = []
    best = [math.inf]

    def objective(z):
        params = _to_params(z)
        if params is None:
            val = math.inf
        else:
            try:
                val = mse_objective(hist, params, policy)
            except NumericError:
                val = math.inf
            if not math.isfinite(val):
                val = math.inf
        if val < best[0]:
            best[0] = val
        trace.append(best[0])
        return val

    simplex = np.vstack([z0] + [z0 + 0.5 * np.eye(z0.size)[i] for i in range(z0.size)])
    res = optimize.minimize(
        objective, z0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "maxfev": MAX_EVALS, "xatol": SIMPLEX_TOL,
                 "fatol": math.inf},
    )
    return res, trace


def fit(hist: EmpiricalPdf, n_two_spec: int = 1, restarts: int = 8,
        policy: NumericPolicy = FIT_POLICY, normalization_scale: float = 1.0) -> FitReport:
    """Multi-start simplex fit of (K, Delta, mu) at unit mean SNR."""
    if n_two_spec not in (0, 1, 2, 3):
        raise DomainError("n_two_spec must be 0, 1, 2 or 3")
    if restarts < 1:
        raise DomainError("restarts must be at least 1")
    reports = []
    for i, z0 in enumerate(start_points(n_two_spec, restarts)):
        res, trace = _run_start(hist, z0, policy)
        params = _to_params(res.x)
        if params is None or not math.isfinite(res.fun):
            continue
        mse = mse_objective(hist, params, policy)
        reports.append(FitReport(params, mse, int(res.nit), bool(res.success), trace,
                                 normalization_scale, i))
    if not reports:
        raise NumericError("no start produced a finite objective")
    return min(reports, key=lambda rep: (rep.mse, rep.start_index))


def fit_samples(samples: EnvelopeSamples, bins: int | str = "auto", n_two_spec: int = 1,
                restarts: int = 8, policy: NumericPolicy = FIT_POLICY) -> FitReport:
    """Normalise, histogram and fit in one go."""
    values, scale = normalize_envelope(samples.as_envelope().values)
    prior = samples.meta.get("normalization_scale", 1.0)
    hist = empirical_pdf(values, bins)
    return fit(hist, n_two_spec, restarts, policy, normalization_scale=scale * prior)
