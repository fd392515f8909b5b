"""Multi-cluster Two-Wave (MTW) fading: distributions, metrics, simulation and fitting."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CombinatorialLimitError,
    DeltaRangeError,
    DeltaSumError,
    DimensionTooHighError,
    DomainError,
    MtwError,
    NegativeKError,
    NonPositiveMeanSnrError,
    NonPositiveMuError,
    NumericError,
    PhysicalConsistencyWarning,
    PoleError,
    TruncationWarning,
    ValidationError,
)
from .model import (  # noqa: E402
    DEFAULT_POLICY,
    MtwParams,
    NumericPolicy,
    SnrDistribution,
    aof,
    asymptotic_cdf,
    cdf,
    cdf_integral,
    cdf_series,
    gmgf,
    make_params,
    mgf,
    moment,
    pdf,
    pdf_integral,
    pdf_series,
    series_coeffs,
    validate,
)
