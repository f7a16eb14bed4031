"""Synthetic SYN / SYN-ACK traffic with exact per-host ground truth.

A population mixes normal hosts (low connection rates, mostly answered)
with scanning hosts (high rates, never answered).  Each period every
host emits a Poisson draw of *distinct* destinations; a normal host's
SYN gets a SYN-ACK with that host's fixed success probability.  SYN-ACK
events are keyed by the initiating host as src so both sketch arrays
see the same <src, dst> signature for a given connection attempt.

Per-host mean rates come from an exponential draw across the population
("exponential" model) or are identical ("fixed" model), drawn either
once at population creation (rate_draw="per-host") or fresh every
period ("per-period").

duplicate_factor injects retry storms: every distinct pair is repeated
an extra Poisson(duplicate_factor) times in the event stream, which
must not change any sketch state or any ground-truth count.

Everything is reproducible: one seed determines populations, rates,
destinations, duplicates and therefore every downstream artifact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .hashing import ParameterError, mix64

SYN = "SYN"
SYN_ACK = "SYN-ACK"

RATE_MODELS = ("exponential", "fixed")
RATE_DRAWS = ("per-host", "per-period")


@dataclass(frozen=True)
class PopulationSpec:
    """Host-population parameters for the traffic generator."""

    normal_count: int
    worm_count: int
    normal_mean_rate: float = 5.0  # distinct SYN per minute
    worm_mean_rate: float = 600.0  # distinct SYN per minute
    ack_prob_low: float = 0.8
    ack_prob_high: float = 1.0
    duplicate_factor: float = 0.0  # mean extra repeats per pair
    rng_seed: int = 0
    rate_draw: str = "per-host"
    normal_rate_model: str = "exponential"
    worm_rate_model: str = "exponential"

    def __post_init__(self) -> None:
        if self.normal_count < 0 or self.worm_count < 0:
            raise ParameterError("host counts must be >= 0")
        if self.normal_mean_rate <= 0 or self.worm_mean_rate <= 0:
            raise ParameterError("mean rates must be > 0")
        if not 0.0 <= self.ack_prob_low <= self.ack_prob_high <= 1.0:
            raise ParameterError(
                "need 0 <= ack_prob_low <= ack_prob_high <= 1, got "
                f"[{self.ack_prob_low}, {self.ack_prob_high}]"
            )
        if self.duplicate_factor < 0:
            raise ParameterError("duplicate_factor must be >= 0")
        if self.rate_draw not in RATE_DRAWS:
            raise ParameterError(f"rate_draw must be one of {RATE_DRAWS}")
        if self.normal_rate_model not in RATE_MODELS:
            raise ParameterError(f"normal_rate_model must be one of {RATE_MODELS}")
        if self.worm_rate_model not in RATE_MODELS:
            raise ParameterError(f"worm_rate_model must be one of {RATE_MODELS}")

    @property
    def total_hosts(self) -> int:
        return self.normal_count + self.worm_count


@dataclass(frozen=True)
class FlowEvent:
    """One SYN or SYN-ACK observation at the router."""

    kind: str  # SYN or SYN-ACK
    src: int
    dst: int
    period: int


@dataclass
class EventBatch:
    """Column-oriented event stream for one measurement period.

    SYN and SYN-ACK events are stored as parallel src/dst arrays; this
    is the form the encoder and the rate limiter operate on.
    """

    period: int
    syn_src: np.ndarray
    syn_dst: np.ndarray
    ack_src: np.ndarray
    ack_dst: np.ndarray

    @classmethod
    def empty(cls, period: int) -> "EventBatch":
        z = np.empty(0, dtype=np.uint64)
        return cls(period, z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def from_events(cls, events: Iterable[FlowEvent]) -> "EventBatch":
        syn, ack = [], []
        period = None
        for ev in events:
            if period is None:
                period = ev.period
            elif ev.period != period:
                raise ParameterError(
                    f"mixed periods in event stream: {period} and {ev.period}"
                )
            (syn if ev.kind == SYN else ack).append((ev.src, ev.dst))
        syn_arr = np.array(syn or np.empty((0, 2)), dtype=np.uint64).reshape(-1, 2)
        ack_arr = np.array(ack or np.empty((0, 2)), dtype=np.uint64).reshape(-1, 2)
        return cls(
            period if period is not None else 0,
            syn_arr[:, 0].copy(), syn_arr[:, 1].copy(),
            ack_arr[:, 0].copy(), ack_arr[:, 1].copy(),
        )

    @property
    def event_count(self) -> int:
        return int(self.syn_src.size + self.ack_src.size)

    def iter_events(self) -> Iterator[FlowEvent]:
        for s, d in zip(self.syn_src, self.syn_dst):
            yield FlowEvent(SYN, int(s), int(d), self.period)
        for s, d in zip(self.ack_src, self.ack_dst):
            yield FlowEvent(SYN_ACK, int(s), int(d), self.period)

    def dump(self, fh, addr_format: str = "int") -> None:
        """Write `period,kind,src,dst` lines; addresses as unsigned ints
        or dotted quads."""
        fmt = _format_addr(addr_format)
        for ev in self.iter_events():
            fh.write(f"{ev.period},{ev.kind},{fmt(ev.src)},{fmt(ev.dst)}\n")


def _format_addr(addr_format: str):
    if addr_format == "int":
        return str
    if addr_format == "dotted":
        return lambda a: ".".join(str((a >> s) & 0xFF) for s in (24, 16, 8, 0))
    raise ParameterError(f"unknown address format {addr_format!r}")


@dataclass
class GroundTruth:
    """Exact per-host distinct counts for one period."""

    src: np.ndarray  # host addresses
    k_syn: np.ndarray  # distinct SYN pairs per host
    k_ack: np.ndarray  # distinct SYN-ACK pairs per host
    is_worm: np.ndarray  # bool labels

    @property
    def k_fail(self) -> np.ndarray:
        return self.k_syn - self.k_ack

    def label(self, i: int) -> str:
        return "worm" if self.is_worm[i] else "normal"

    def by_src(self) -> dict[int, tuple[int, int, int, str]]:
        return {
            int(s): (int(ks), int(kr), int(ks - kr), "worm" if w else "normal")
            for s, ks, kr, w in zip(self.src, self.k_syn, self.k_ack, self.is_worm)
        }


class Population:
    """A concrete host population with its per-host draws fixed.

    Host addresses are 1..normal_count for normal hosts followed by the
    worm hosts; address 0 is never used.
    """

    def __init__(self, spec: PopulationSpec):
        self.spec = spec
        self.addresses = np.arange(1, spec.total_hosts + 1, dtype=np.uint64)
        self.is_worm = np.zeros(spec.total_hosts, dtype=bool)
        self.is_worm[spec.normal_count :] = True
        rng = np.random.default_rng(np.random.PCG64(spec.rng_seed))
        self.ack_prob = rng.uniform(
            spec.ack_prob_low, spec.ack_prob_high, spec.normal_count
        )
        self._host_rates = self._draw_rates(rng)

    def _draw_rates(self, rng: np.random.Generator) -> np.ndarray:
        spec = self.spec
        rates = np.empty(spec.total_hosts)
        if spec.normal_rate_model == "exponential":
            rates[: spec.normal_count] = rng.exponential(
                spec.normal_mean_rate, spec.normal_count
            )
        else:
            rates[: spec.normal_count] = spec.normal_mean_rate
        if spec.worm_rate_model == "exponential":
            rates[spec.normal_count :] = rng.exponential(
                spec.worm_mean_rate, spec.worm_count
            )
        else:
            rates[spec.normal_count :] = spec.worm_mean_rate
        return rates

    def rates_for_period(self, period: int) -> np.ndarray:
        if self.spec.rate_draw == "per-host":
            return self._host_rates
        rng = np.random.default_rng(
            np.random.PCG64(mix64(self.spec.rng_seed ^ (0xA5A5 + period)))
        )
        return self._draw_rates(rng)

    def generate_period(self, period: int) -> tuple[EventBatch, GroundTruth]:
        """Event stream plus exact ground truth for one period."""
        spec = self.spec
        if spec.total_hosts == 0:
            return EventBatch.empty(period), GroundTruth(
                self.addresses,
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.int64),
                self.is_worm,
            )
        rng = np.random.default_rng(
            np.random.PCG64(mix64(spec.rng_seed ^ (0x5EED + period)))
        )
        counts = rng.poisson(self.rates_for_period(period))
        syn_src = np.repeat(self.addresses, counts)
        syn_dst = _distinct_destinations_grouped(rng, counts)

        # SYN-ACKs: per-pair Bernoulli with the initiating host's success
        # probability; worm hosts never receive one.
        n_normal_syn = int(counts[: spec.normal_count].sum())
        p = np.repeat(self.ack_prob, counts[: spec.normal_count])
        acked = rng.random(n_normal_syn) < p
        ack_src = syn_src[:n_normal_syn][acked]
        ack_dst = syn_dst[:n_normal_syn][acked]

        k_ack = np.zeros(spec.total_hosts, dtype=np.int64)
        np.add.at(k_ack, (ack_src - 1).astype(np.int64), 1)
        truth = GroundTruth(
            src=self.addresses.copy(),
            k_syn=counts.astype(np.int64),
            k_ack=k_ack,
            is_worm=self.is_worm.copy(),
        )

        if spec.duplicate_factor > 0:
            syn_rep = 1 + rng.poisson(spec.duplicate_factor, syn_src.size)
            ack_rep = 1 + rng.poisson(spec.duplicate_factor, ack_src.size)
            syn_src = np.repeat(syn_src, syn_rep)
            syn_dst = np.repeat(syn_dst, syn_rep)
            ack_src = np.repeat(ack_src, ack_rep)
            ack_dst = np.repeat(ack_dst, ack_rep)

        return EventBatch(period, syn_src, syn_dst, ack_src, ack_dst), truth


def _distinct_destinations_grouped(
    rng: np.random.Generator, counts: np.ndarray
) -> np.ndarray:
    """Flat destination array with distinct values inside each host group.

    Draws uniform 32-bit addresses for all hosts at once, then redraws
    the rare within-host collisions until none remain.
    """
    total = int(counts.sum())
    group = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    dst = rng.integers(0, 2**32, total, dtype=np.uint64)
    while True:
        order = np.lexsort((dst, group))
        og, od = group[order], dst[order]
        dup = np.zeros(total, dtype=bool)
        same = (og[1:] == og[:-1]) & (od[1:] == od[:-1])
        dup[order[1:][same]] = True
        n_dup = int(dup.sum())
        if n_dup == 0:
            return dst
        dst[dup] = rng.integers(0, 2**32, n_dup, dtype=np.uint64)


def generate_period(spec: PopulationSpec, period: int) -> tuple[EventBatch, GroundTruth]:
    """One-shot convenience wrapper around Population.generate_period."""
    return Population(spec).generate_period(period)


def destinations_unique(
    spec: PopulationSpec, host: int, count: int, period: int = 0
) -> np.ndarray:
    """`count` distinct destination addresses for (host, period),
    reproducible from the population seed."""
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    child = mix64(spec.rng_seed ^ mix64(host) ^ mix64(0xD57 + period))
    rng = np.random.default_rng(np.random.PCG64(child))
    return _distinct_destinations_grouped(rng, np.array([count]))
