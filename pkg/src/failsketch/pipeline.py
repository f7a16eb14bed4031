"""Two-phase measurement pipeline: encode at the router, decode offline.

Phase one ingests one period's SYN / SYN-ACK stream into a sketch pair
(double bitmap or double shared register array) and freezes it into a
checksummed binary snapshot.  Phase two, on the management side,
rebuilds the arrays from the snapshot, estimates every candidate host's
failure rate, classifies hosts against a threshold and drives a token
bucket limiter for the flagged ones.

Snapshot wire format (little endian, fixed 65-byte header):

    magic "FRSK" | version u16 | kind u8 | period u64
    | syn_size u64 | ack_size u64 | syn_width u32 | ack_width u32
    | reg_width u8 | rank_bits u8
    | index_seed u64 | dst_seed u64 | r_seed u64

followed by the packed SYN-side payload, the packed ACK-side payload,
and a CRC-32 over header plus payload.  sizes/widths are bits (bitmap
kind) or register counts (register kind); reg_width and rank_bits are 0
for the bitmap kind.  The router's private key is deliberately absent:
rebuilding per-host index sets needs only index_seed and the constant
table, so the management side can decode without being able to forge
placement of chosen <src, dst> pairs.

Saturated bitmap estimates (a zero fraction of exactly 0) are pinned to
the top of the decodable range and flagged rather than raised: a host
that saturates its logical bitmap is, operationally, a host to flag.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum
from math import log
from typing import Iterable, Sequence

import numpy as np

from . import bitmap as bm
from . import registers as rg
from .hashing import HashConfig
from .traffic import EventBatch

MAGIC = b"FRSK"
VERSION = 1
_HEADER = struct.Struct("<4sHBQQQIIBBQQQ")
_KIND_BITMAP = 1
_KIND_DSRA = 2


class SketchKind(Enum):
    DOUBLE_BITMAP = "bitmap"
    DSRA = "dsra"


SketchParams = bm.BitmapParams | rg.RegisterParams


class CorruptSnapshotError(Exception):
    """Snapshot bytes fail structural or checksum validation."""


def kind_of(params: SketchParams) -> SketchKind:
    return SketchKind.DOUBLE_BITMAP if isinstance(params, bm.BitmapParams) else SketchKind.DSRA


@dataclass(frozen=True)
class SketchSnapshot:
    """A frozen, serializable sketch pair for one period."""

    kind: SketchKind
    period: int
    syn_size: int
    ack_size: int
    syn_width: int
    ack_width: int
    reg_width: int
    rank_bits: int
    index_seed: int
    dst_seed: int
    r_seed: int
    payload: bytes

    @property
    def payload_bits(self) -> int:
        """Sketch memory in bits, both directions combined."""
        if self.kind is SketchKind.DOUBLE_BITMAP:
            return self.syn_size + self.ack_size
        return (self.syn_size + self.ack_size) * self.reg_width

    @property
    def per_direction_bits(self) -> int:
        """SYN-side sketch memory in bits (the per-host budget figure)."""
        if self.kind is SketchKind.DOUBLE_BITMAP:
            return self.syn_size
        return self.syn_size * self.reg_width

    def hash_config(self) -> HashConfig:
        # the table is prefix-stable, so the decode side regenerates
        # exactly the entries the router used
        return HashConfig(
            index_seed=self.index_seed,
            dst_seed=self.dst_seed,
            key=0,
            r_seed=self.r_seed,
            r_len=max(self.syn_width, self.ack_width),
        )

    def make_arrays(self):
        """Rebuild the (syn, ack) structures from the payload."""
        cfg = self.hash_config()
        if self.kind is SketchKind.DOUBLE_BITMAP:
            syn = bm.Bitmap(self.syn_size, self.syn_width, cfg)
            ack = bm.Bitmap(self.ack_size, self.ack_width, cfg)
        else:
            syn = rg.RegisterArray(self.syn_size, self.syn_width, self.reg_width, self.rank_bits, cfg)
            ack = rg.RegisterArray(self.ack_size, self.ack_width, self.reg_width, self.rank_bits, cfg)
        split = (syn.payload_bits + 7) // 8
        syn.load_bytes(self.payload[:split])
        ack.load_bytes(self.payload[split:])
        return syn, ack

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(
            MAGIC,
            VERSION,
            _KIND_BITMAP if self.kind is SketchKind.DOUBLE_BITMAP else _KIND_DSRA,
            self.period,
            self.syn_size,
            self.ack_size,
            self.syn_width,
            self.ack_width,
            self.reg_width,
            self.rank_bits,
            self.index_seed,
            self.dst_seed,
            self.r_seed,
        )
        body = header + self.payload
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "SketchSnapshot":
        if len(data) < _HEADER.size + 4:
            raise CorruptSnapshotError("snapshot shorter than header")
        body, (checksum,) = data[:-4], struct.unpack("<I", data[-4:])
        if zlib.crc32(body) != checksum:
            raise CorruptSnapshotError("checksum mismatch")
        (magic, version, kind_byte, period, syn_size, ack_size, syn_width,
         ack_width, reg_width, rank_bits, index_seed, dst_seed, r_seed,
         ) = _HEADER.unpack(body[: _HEADER.size])
        if magic != MAGIC:
            raise CorruptSnapshotError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptSnapshotError(f"unsupported version {version}")
        if kind_byte == _KIND_BITMAP:
            kind = SketchKind.DOUBLE_BITMAP
        elif kind_byte == _KIND_DSRA:
            kind = SketchKind.DSRA
        else:
            raise CorruptSnapshotError(f"unknown kind byte {kind_byte}")
        return cls(
            kind, period, syn_size, ack_size, syn_width, ack_width,
            reg_width, rank_bits, index_seed, dst_seed, r_seed,
            payload=body[_HEADER.size :],
        )

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "SketchSnapshot":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def router_encode(params: SketchParams, events) -> SketchSnapshot:
    """Encode one period's events into a fresh sketch pair snapshot."""
    if not isinstance(events, EventBatch):
        events = EventBatch.from_events(events)
    syn, ack = params.make_pair()
    syn.encode_batch(events.syn_src, events.syn_dst)
    ack.encode_batch(events.ack_src, events.ack_dst)
    cfg = params.hash
    if isinstance(params, bm.BitmapParams):
        return SketchSnapshot(
            SketchKind.DOUBLE_BITMAP, events.period,
            params.syn_bits, params.ack_bits, params.syn_logical, params.ack_logical,
            0, 0, cfg.index_seed, cfg.dst_seed, cfg.r_seed,
            payload=syn.to_bytes() + ack.to_bytes(),
        )
    return SketchSnapshot(
        SketchKind.DSRA, events.period,
        params.syn_size, params.ack_size, params.syn_virtual, params.ack_virtual,
        params.reg_width, params.rank_bits, cfg.index_seed, cfg.dst_seed, cfg.r_seed,
        payload=syn.to_bytes() + ack.to_bytes(),
    )


def candidate_hosts(events) -> np.ndarray:
    """Distinct source addresses in the period's SYN stream, ascending."""
    if not isinstance(events, EventBatch):
        events = EventBatch.from_events(events)
    return np.unique(events.syn_src)


@dataclass
class HostReport:
    """Per-host decode result, optionally joined with ground truth."""

    src: int
    k_hat: float  # clamped at 0
    k_hat_raw: float
    k_hat_syn: float
    k_hat_ack: float
    saturated_syn: bool
    saturated_ack: bool
    limited: bool
    k_true: int | None = None
    rel_error: float | None = None

    CSV_HEADER = "src,k_true,k_hat_raw,k_hat,khat_s,khat_r,saturated,limited,rel_error"

    def csv_row(self) -> str:
        k_true = "" if self.k_true is None else str(self.k_true)
        rel = "" if self.rel_error is None else f"{self.rel_error:.6f}"
        sat = int(self.saturated_syn) | (int(self.saturated_ack) << 1)
        return (
            f"{self.src},{k_true},{self.k_hat_raw:.6f},{self.k_hat:.6f},"
            f"{self.k_hat_syn:.6f},{self.k_hat_ack:.6f},{sat},{int(self.limited)},{rel}"
        )


def nmc_decode(
    snapshot: SketchSnapshot, hosts: Sequence[int] | np.ndarray, threshold: float
) -> list[HostReport]:
    """Per-host failure-rate reports from a frozen snapshot.

    `threshold` is in failures per period; a host is limited when its
    clamped estimate exceeds it.  Decoding is read-only on the snapshot
    and independent across hosts.
    """
    hosts = np.asarray(hosts, dtype=np.uint64)
    if snapshot.kind is SketchKind.DOUBLE_BITMAP:
        ks, kr, sat_s, sat_r = _decode_bitmap(snapshot, hosts)
    else:
        ks, kr = _decode_dsra(snapshot, hosts)
        sat_s = np.zeros(hosts.size, dtype=bool)
        sat_r = np.zeros(hosts.size, dtype=bool)
    raw = ks - kr
    clamped = np.maximum(raw, 0.0)
    limited = clamped > threshold
    return [
        HostReport(
            src=int(hosts[i]),
            k_hat=float(clamped[i]),
            k_hat_raw=float(raw[i]),
            k_hat_syn=float(ks[i]),
            k_hat_ack=float(kr[i]),
            saturated_syn=bool(sat_s[i]),
            saturated_ack=bool(sat_r[i]),
            limited=bool(limited[i]),
        )
        for i in range(hosts.size)
    ]


def _decode_bitmap(snapshot: SketchSnapshot, hosts: np.ndarray):
    syn, ack = snapshot.make_arrays()
    sides = []
    flags = []
    for array in (syn, ack):
        m, l = array.size_bits, array.logical_bits
        u_m = array.zero_count()
        v_m = u_m / m
        u_l = array.logical_zero_counts_block(hosts) if hosts.size else np.empty(0)
        saturated = (u_l == 0) | (u_m == 0)
        denom = log(1 - 1 / l) - log(1 - 1 / m)
        v_l = np.where(u_l > 0, u_l, 1.0) / l  # placeholder at saturation
        v_m_safe = v_m if v_m > 0 else 1.0 / m
        k_side = (np.log(v_l) - log(v_m_safe)) / denom
        pinned = bm.estimate_rate_max(v_m, l, m)
        sides.append(np.where(saturated, pinned, k_side))
        flags.append(saturated)
    return sides[0], sides[1], flags[0], flags[1]


def _decode_dsra(snapshot: SketchSnapshot, hosts: np.ndarray):
    syn, ack = snapshot.make_arrays()
    out = []
    for array in (syn, ack):
        t, f = array.size, array.virtual_size
        n_global = rg.hll_estimate(array.registers)
        k_side = np.empty(hosts.size)
        step = max(1, (4 << 20) // max(f, 1))
        for lo in range(0, hosts.size, step):
            block = hosts[lo : lo + step]
            virtual = rg.hll_estimate_rows(array.extract_virtual_block(block))
            k_side[lo : lo + step] = (t * f / (t - f)) * (virtual / f - n_global / t)
        out.append(k_side)
    return out[0], out[1]


def attach_ground_truth(reports: list[HostReport], truth_by_src: dict) -> None:
    """Join exact counts onto reports; relative error uses the clamped
    estimate and is left undefined for hosts with zero true failures."""
    for rep in reports:
        entry = truth_by_src.get(rep.src)
        if entry is None:
            continue
        k = entry[2]
        rep.k_true = k
        rep.rel_error = abs(rep.k_hat - k) / k if k > 0 else None


def write_reports_csv(reports: Iterable[HostReport], fh) -> None:
    fh.write(HostReport.CSV_HEADER + "\n")
    for rep in reports:
        fh.write(rep.csv_row() + "\n")


@dataclass
class RateLimiterState:
    """Token buckets for hosts currently classified as limited.

    Buckets are created full when a host first turns up limited, gain
    `refill` tokens at each period rollover (capped at capacity), and
    disappear when the host is no longer flagged.
    """

    capacity: float
    refill: float
    tokens: dict[int, float] = field(default_factory=dict)

    def apply_reports(self, reports: Iterable[HostReport]) -> None:
        flagged = {rep.src for rep in reports if rep.limited}
        for src in list(self.tokens):
            if src not in flagged:
                del self.tokens[src]
        for src in flagged:
            if src in self.tokens:
                self.tokens[src] = min(self.capacity, self.tokens[src] + self.refill)
            else:
                self.tokens[src] = self.capacity


def classify_and_limit(
    reports: list[HostReport], limiter: RateLimiterState, events: EventBatch
) -> tuple[EventBatch, int]:
    """Filter the next period's events through the limiter.

    SYN attempts of limited hosts consume one token each in stream
    order and are dropped once the bucket is empty; the SYN-ACKs of
    dropped attempts are dropped with them.  Everything else passes
    untouched.  Returns the surviving events and the suppressed count.
    """
    limiter.apply_reports(reports)
    if not limiter.tokens:
        return events, 0
    syn_keep = np.ones(events.syn_src.size, dtype=bool)
    for src, tokens in limiter.tokens.items():
        mask = events.syn_src == np.uint64(src)
        n = int(mask.sum())
        allow = min(n, int(tokens))
        if allow < n:
            drop_idx = np.flatnonzero(mask)[allow:]
            syn_keep[drop_idx] = False
        limiter.tokens[src] = tokens - min(n, tokens)
    # an ack survives only with a surviving syn for the same pair
    dropped_pairs = _pair_view(events.syn_src[~syn_keep], events.syn_dst[~syn_keep])
    ack_keep = ~np.isin(
        _pair_view(events.ack_src, events.ack_dst), dropped_pairs
    )
    suppressed = int((~syn_keep).sum()) + int((~ack_keep).sum())
    filtered = EventBatch(
        events.period,
        events.syn_src[syn_keep], events.syn_dst[syn_keep],
        events.ack_src[ack_keep], events.ack_dst[ack_keep],
    )
    return filtered, suppressed


def _pair_view(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Pack <src, dst> pairs into single comparable 128-bit-ish keys."""
    return (src.astype(np.uint64) << np.uint64(32)) ^ (
        dst.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    )
