"""Deterministic, seedable hash primitives shared by both sketch kinds.

Everything here is a pure function of its arguments, bit-exact across
platforms and runs: the index hash H that places items into shared
arrays, the keyed destination hash used to pick a slot inside a host's
logical structure, the w-bit destination digest H' whose leading-zero
rank feeds the register sketch, and the derived constant table R.

The mixer is the SplitMix64 finalizer, which has measured avalanche of
0.5 per bit pair (see the test suite); it is not cryptographic and is
not meant to be.  All scalar paths operate on Python ints masked to 64
bits; the batch paths operate on numpy uint64 arrays and produce
identical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit word."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized mix64; uint64 in, uint64 out (wrapping multiply)."""
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def constant_table(seed: int, length: int) -> np.ndarray:
    """Derive `length` pseudo-random 64-bit constants from `seed`.

    This is the plain SplitMix64 sequence, so the table is fully
    reproducible from (seed, length) with no RNG library involved.
    """
    if length < 0:
        raise ParameterError(f"table length must be >= 0, got {length}")
    i = np.arange(1, length + 1, dtype=np.uint64)
    return mix64_array(np.uint64(seed) + i * np.uint64(_GOLDEN))


class ParameterError(ValueError):
    """A structural parameter is out of its valid domain."""


@dataclass(frozen=True)
class HashConfig:
    """Seeds and key for one sketch deployment.

    index_seed drives H (array placement), dst_seed drives H' (the
    register rank digest), key is the router-private value mixed into
    the destination before slot selection, and (r_seed, r_len) fully
    determine the constant table R.  The key never needs to leave the
    router: decoding a host's index set requires only index_seed and R.
    """

    index_seed: int = 0x5EEDC0DE
    dst_seed: int = 0xD57A11CE
    key: int = 0
    r_seed: int = 0x0C0FFEE0
    r_len: int = 512

    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.r_len < 1:
            raise ParameterError(f"r_len must be >= 1, got {self.r_len}")
        object.__setattr__(self, "_table", constant_table(self.r_seed, self.r_len))

    @property
    def table(self) -> np.ndarray:
        """The constant table R (read-only view)."""
        view = self._table.view()
        view.flags.writeable = False
        return view


def index_hash(config: HashConfig, value: int, range_: int) -> int:
    """Map a 64-bit value uniformly into [0, range_)."""
    if range_ < 1:
        raise ParameterError(f"hash range must be >= 1, got {range_}")
    return mix64((value & _MASK64) ^ config.index_seed) % range_


def index_hash_array(config: HashConfig, values: np.ndarray, range_: int) -> np.ndarray:
    if range_ < 1:
        raise ParameterError(f"hash range must be >= 1, got {range_}")
    return mix64_array(values ^ np.uint64(config.index_seed)) % np.uint64(range_)


def slot_hash(config: HashConfig, dst: int, width: int) -> int:
    """Pick the logical slot j in [0, width) for a destination address."""
    if width < 1:
        raise ParameterError(f"slot width must be >= 1, got {width}")
    if width > config.r_len:
        raise ParameterError(f"slot width {width} exceeds table length {config.r_len}")
    return mix64((dst ^ config.key) ^ config.index_seed) % width


def select_index(config: HashConfig, src: int, dst: int, width: int, range_: int) -> int:
    """Physical index for one <src, dst> observation.

    The destination picks slot j = H(dst ^ key) mod width, and the item
    lands at H(src ^ R[j]) mod range_, i.e. always inside the host's
    logical index set.
    """
    j = slot_hash(config, dst, width)
    return index_hash(config, src ^ int(config._table[j]), range_)


def select_index_array(
    config: HashConfig, srcs: np.ndarray, dsts: np.ndarray, width: int, range_: int
) -> np.ndarray:
    """Vectorized select_index over parallel src/dst arrays."""
    if width < 1:
        raise ParameterError(f"slot width must be >= 1, got {width}")
    if width > config.r_len:
        raise ParameterError(f"slot width {width} exceeds table length {config.r_len}")
    j = mix64_array(dsts ^ np.uint64(config.key ^ config.index_seed)) % np.uint64(width)
    return index_hash_array(config, srcs ^ config._table[j], range_)


def logical_indices(config: HashConfig, src: int, width: int, range_: int) -> np.ndarray:
    """All `width` physical indices of src's logical structure, slot order."""
    if width > config.r_len:
        raise ParameterError(f"slot width {width} exceeds table length {config.r_len}")
    return index_hash_array(config, np.uint64(src) ^ config._table[:width], range_)


def logical_indices_block(
    config: HashConfig, srcs: np.ndarray, width: int, range_: int
) -> np.ndarray:
    """(len(srcs), width) matrix of logical index sets, one row per host."""
    if width > config.r_len:
        raise ParameterError(f"slot width {width} exceeds table length {config.r_len}")
    return index_hash_array(
        config, srcs[:, None] ^ config._table[None, :width], range_
    )


def dst_digest(config: HashConfig, dst: int, width_bits: int) -> int:
    """H'(dst): the destination digest truncated to width_bits."""
    if not 1 <= width_bits <= 64:
        raise ParameterError(f"digest width must be in [1, 64], got {width_bits}")
    return mix64((dst & _MASK64) ^ config.dst_seed) & ((1 << width_bits) - 1)


def dst_digest_array(config: HashConfig, dsts: np.ndarray, width_bits: int) -> np.ndarray:
    if not 1 <= width_bits <= 64:
        raise ParameterError(f"digest width must be in [1, 64], got {width_bits}")
    mask = np.uint64((1 << width_bits) - 1)
    return mix64_array(dsts ^ np.uint64(config.dst_seed)) & mask


def leading_zero_rank(q: int, w: int) -> int:
    """Position of the first 1-bit of q viewed as a w-bit string, so a
    value in [1, w + 1]; the all-zero input maps to w + 1."""
    if w < 1:
        raise ParameterError(f"bit width must be >= 1, got {w}")
    q &= (1 << w) - 1
    if q == 0:
        return w + 1
    return w - q.bit_length() + 1


def leading_zero_rank_array(q: np.ndarray, w: int) -> np.ndarray:
    """Vectorized leading_zero_rank for w <= 32.

    Uses floor(log2(q)): exact for q < 2**32 since the float64 mantissa
    holds such integers without rounding across a power-of-two boundary.
    """
    if not 1 <= w <= 32:
        raise ParameterError(f"vector rank path supports w in [1, 32], got {w}")
    qf = q.astype(np.float64)
    bitlen = np.zeros(q.shape, dtype=np.int64)
    nz = q != 0
    bitlen[nz] = np.floor(np.log2(qf[nz])).astype(np.int64) + 1
    return np.where(nz, w - bitlen + 1, w + 1).astype(np.int64)
