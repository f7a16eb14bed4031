"""Shared-bitmap encoder and maximum-likelihood decoder.

One Bitmap is a single shared bit array of m bits.  Every source host
owns a logical bitmap: l pseudo-random positions of the shared array,
derived from the host address and the constant table.  Encoding an
observation <src, dst> sets exactly one bit inside src's logical bitmap,
so repeats of the same pair are absorbed for free.

Decoding inverts the zero fractions.  With V_l the zero fraction of the
host's logical slots and V_m the zero fraction of the whole array, the
maximum-likelihood estimate of the host's distinct-item count is

    k_hat = (ln V_l - ln V_m) / (ln(1 - 1/l) - ln(1 - 1/m))

and the connection-failure estimate is the SYN-side estimate minus the
SYN-ACK-side estimate.  A zero fraction of exactly 0 means the array
(or the logical view) saturated and the log is undefined; that is
surfaced as SaturationError and mapped to a range-max estimate by the
pipeline.

Logical slots are counted per slot: if two slots collide on one
physical bit, that bit is counted twice, keeping U_l / l aligned with
the probability model the estimator is derived from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hashing import (
    HashConfig,
    ParameterError,
    logical_indices,
    logical_indices_block,
    select_index,
    select_index_array,
)


class SaturationError(ValueError):
    """A zero fraction hit 0, so the log-ratio estimator is undefined.

    `scope` is "logical" or "global"; `side` labels which array of a
    pair saturated ("syn" / "ack") when raised from a pair estimate.
    """

    def __init__(self, scope: str, side: str | None = None):
        self.scope = scope
        self.side = side
        label = f"{side} side " if side else ""
        super().__init__(f"{label}{scope} bitmap saturated (zero fraction is 0)")


@dataclass(frozen=True)
class BitmapParams:
    """Sizes for a SYN/SYN-ACK bitmap pair plus the shared hash config."""

    syn_bits: int  # m_s
    ack_bits: int  # m_r
    syn_logical: int  # l_s
    ack_logical: int  # l_r
    hash: HashConfig

    def __post_init__(self) -> None:
        for m, l, name in (
            (self.syn_bits, self.syn_logical, "syn"),
            (self.ack_bits, self.ack_logical, "ack"),
        ):
            if not 1 <= l < m:
                raise ParameterError(
                    f"{name} side needs 1 <= logical ({l}) < total ({m})"
                )
            if l > self.hash.r_len:
                raise ParameterError(
                    f"{name} logical size {l} exceeds constant table {self.hash.r_len}"
                )

    def make_pair(self) -> tuple["Bitmap", "Bitmap"]:
        return (
            Bitmap(self.syn_bits, self.syn_logical, self.hash),
            Bitmap(self.ack_bits, self.ack_logical, self.hash),
        )


@dataclass(frozen=True)
class ZeroFractions:
    """Raw zero counts and fractions for one host's view of one array."""

    zeros_logical: int  # U_l
    zeros_global: int  # U_m
    logical_size: int  # l
    global_size: int  # m

    @property
    def v_logical(self) -> float:
        return self.zeros_logical / self.logical_size

    @property
    def v_global(self) -> float:
        return self.zeros_global / self.global_size


class Bitmap:
    """One shared bit array with per-host logical views.

    Bits are stored packed in 64-bit words; zero counting uses word
    population counts.  Writes only ever turn bits on, so the final
    state of any encode sequence is order independent.
    """

    def __init__(self, size_bits: int, logical_bits: int, hash_config: HashConfig):
        if not 1 <= logical_bits < size_bits:
            raise ParameterError(
                f"need 1 <= logical ({logical_bits}) < total ({size_bits})"
            )
        if logical_bits > hash_config.r_len:
            raise ParameterError(
                f"logical size {logical_bits} exceeds constant table {hash_config.r_len}"
            )
        self.size_bits = size_bits
        self.logical_bits = logical_bits
        self.hash = hash_config
        self._words = np.zeros((size_bits + 63) // 64, dtype=np.uint64)

    def reset(self) -> None:
        self._words[:] = 0

    def encode(self, src: int, dst: int) -> None:
        idx = select_index(self.hash, src, dst, self.logical_bits, self.size_bits)
        self._words[idx >> 6] |= np.uint64(1 << (idx & 63))

    def encode_batch(self, srcs: np.ndarray, dsts: np.ndarray) -> None:
        if srcs.size == 0:
            return
        idx = select_index_array(
            self.hash, srcs, dsts, self.logical_bits, self.size_bits
        )
        np.bitwise_or.at(
            self._words,
            (idx >> np.uint64(6)).astype(np.int64),
            np.uint64(1) << (idx & np.uint64(63)),
        )

    def get_bits(self, idx: np.ndarray) -> np.ndarray:
        """Bit values (0/1 uint8) at physical positions idx."""
        words = self._words[(idx >> np.uint64(6)).astype(np.int64)]
        return ((words >> (idx & np.uint64(63))) & np.uint64(1)).astype(np.uint8)

    def zero_count(self) -> int:
        return self.size_bits - int(np.bitwise_count(self._words).sum())

    def logical_zero_count(self, src: int) -> int:
        idx = logical_indices(self.hash, src, self.logical_bits, self.size_bits)
        return self.logical_bits - int(self.get_bits(idx).sum())

    def logical_zero_counts_block(self, srcs: np.ndarray) -> np.ndarray:
        """Per-host logical zero counts, vectorized over a host array."""
        out = np.empty(srcs.size, dtype=np.int64)
        # chunk to bound the (hosts x l) index matrix at ~16M entries
        step = max(1, (4 << 20) // max(self.logical_bits, 1))
        for lo in range(0, srcs.size, step):
            block = srcs[lo : lo + step]
            idx = logical_indices_block(
                self.hash, block, self.logical_bits, self.size_bits
            )
            out[lo : lo + step] = self.logical_bits - self.get_bits(idx).sum(
                axis=1, dtype=np.int64
            )
        return out

    def zero_fractions(self, src: int) -> ZeroFractions:
        return ZeroFractions(
            zeros_logical=self.logical_zero_count(src),
            zeros_global=self.zero_count(),
            logical_size=self.logical_bits,
            global_size=self.size_bits,
        )

    def to_bytes(self) -> bytes:
        """Tightly packed little-endian bit payload, ceil(m/8) bytes."""
        raw = self._words.astype("<u8").tobytes()
        return raw[: (self.size_bits + 7) // 8]

    def load_bytes(self, payload: bytes) -> None:
        expect = (self.size_bits + 7) // 8
        if len(payload) != expect:
            raise ParameterError(
                f"bitmap payload is {len(payload)} bytes, expected {expect}"
            )
        padded = payload + b"\x00" * (self._words.nbytes - len(payload))
        self._words[:] = np.frombuffer(padded, dtype="<u8").astype(np.uint64)

    @property
    def payload_bits(self) -> int:
        return self.size_bits


def estimate_rate(zf: ZeroFractions, l: int, m: int) -> float:
    """Distinct-item rate of one host from its zero fractions.

    May be negative through sampling noise; clamping is caller policy.
    Raises SaturationError when either fraction is 0.
    """
    if not 1 <= l < m:
        raise ParameterError(f"need 1 <= l ({l}) < m ({m})")
    v_l, v_m = zf.v_logical, zf.v_global
    if v_m == 0.0:
        raise SaturationError("global")
    if v_l == 0.0:
        raise SaturationError("logical")
    denom = math.log(1 - 1 / l) - math.log(1 - 1 / m)
    return (math.log(v_l) - math.log(v_m)) / denom


def estimate_rate_max(v_global: float, l: int, m: int) -> float:
    """Upper edge of the decodable range: the estimate at one zero left.

    Used by the pipeline to pin saturated hosts (zero fraction 0 means
    the true rate is at or beyond this value).
    """
    if v_global <= 0.0:
        v_global = 1.0 / m
    denom = math.log(1 - 1 / l) - math.log(1 - 1 / m)
    return (math.log(1.0 / l) - math.log(v_global)) / denom


def estimate_failure_rate(
    zf_syn: ZeroFractions, zf_ack: ZeroFractions, params: BitmapParams
) -> float:
    """Failure-rate estimate: SYN-side rate minus SYN-ACK-side rate."""
    try:
        k_s = estimate_rate(zf_syn, params.syn_logical, params.syn_bits)
    except SaturationError as err:
        raise SaturationError(err.scope, side="syn") from None
    try:
        k_r = estimate_rate(zf_ack, params.ack_logical, params.ack_bits)
    except SaturationError as err:
        raise SaturationError(err.scope, side="ack") from None
    return k_s - k_r


def zero_probability(k: int, n: int, l: int, m: int) -> float:
    """Probability that one logical-bitmap bit stays 0 after a period in
    which its host sent k distinct items out of n total distinct items:
    (1 - 1/m)^(n-k) * (1 - 1/l)^k."""
    if not 0 <= k <= n:
        raise ParameterError(f"need 0 <= k ({k}) <= n ({n})")
    if not 1 <= l < m:
        raise ParameterError(f"need 1 <= l ({l}) < m ({m})")
    return (1 - 1 / m) ** (n - k) * (1 - 1 / l) ** k
