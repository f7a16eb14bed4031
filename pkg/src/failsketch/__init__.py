"""Per-host TCP connection-failure-rate measurement with shared sketches.

Two memory-shared structures measure how many distinct connection
attempts each source host failed per period: a double bitmap with a
log-ratio maximum-likelihood decoder, and a double shared register
array with a HyperLogLog decoder plus noise cancellation.  Around them:
a reproducible SYN / SYN-ACK traffic simulator with exact ground truth,
a router-to-NMC snapshot pipeline with a threshold classifier and token
bucket limiter, and the logistic propagation model that quantifies what
rate limiting buys.
"""

from .bitmap import Bitmap, BitmapParams, SaturationError, ZeroFractions
from .epidemic import EpidemicParams, infected_fraction, slowdown_factor, time_to_fraction
from .hashing import HashConfig, ParameterError
from .pipeline import (
    CorruptSnapshotError,
    HostReport,
    RateLimiterState,
    SketchKind,
    SketchSnapshot,
    candidate_hosts,
    classify_and_limit,
    nmc_decode,
    router_encode,
)
from .registers import CardinalityEstimates, RegisterArray, RegisterParams, hll_estimate
from .traffic import EventBatch, FlowEvent, GroundTruth, Population, PopulationSpec

__version__ = "0.1.0"

__all__ = [
    "Bitmap",
    "BitmapParams",
    "CardinalityEstimates",
    "CorruptSnapshotError",
    "EpidemicParams",
    "EventBatch",
    "FlowEvent",
    "GroundTruth",
    "HashConfig",
    "HostReport",
    "ParameterError",
    "Population",
    "PopulationSpec",
    "RateLimiterState",
    "RegisterArray",
    "RegisterParams",
    "SaturationError",
    "SketchKind",
    "SketchSnapshot",
    "ZeroFractions",
    "candidate_hosts",
    "classify_and_limit",
    "hll_estimate",
    "infected_fraction",
    "nmc_decode",
    "router_encode",
    "slowdown_factor",
    "time_to_fraction",
    "__version__",
]
