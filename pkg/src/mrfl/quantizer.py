"""Model-vector partitioning and bit-plane serialization.

A model vector w is split into a low-resolution part w1 and a residual
w2 = w - w1.  Two variants:

* ``fixed_point(decimals)``: w1 is w rounded (half-to-even) to a decimal
  grid with step 10^-decimals, carried on the wire as two's-complement
  step counts so every party reproduces it bit-exactly.
* ``sign_scale(alpha)``: w1 is sign(w) in {-1, +1} (sign(0) = +1) and
  w2 = w - alpha*w1.

The low-resolution stream rides on symbol bit planes 1-2, the
high-resolution stream (w2 narrowed to IEEE binary32) on plane 3.
Wire layout is documented in docs/wire_format.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

FIXED_POINT = "fixed_point"
SIGN_SCALE = "sign_scale"

_VARIANT_TAGS = {FIXED_POINT: 0, SIGN_SCALE: 1}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}

HIRES_BITS = 32  # binary32 per component


class RangeError(ValueError):
    """A component does not fit the scaled-integer low-resolution encoding."""


class EncodingError(ValueError):
    """A value cannot be serialized (non-representable or non-finite)."""


class FramingError(ValueError):
    """Bit-stream length disagrees with the declared framing."""


@dataclass(frozen=True)
class QuantizerSpec:
    variant: str = FIXED_POINT
    decimals: int = 2
    alpha: float = 1.0
    lowres_int_bits: int = 16

    def __post_init__(self):
        if self.variant not in _VARIANT_TAGS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == FIXED_POINT and not 1 <= self.decimals <= 7:
            raise ValueError(f"decimals must be in [1, 7], got {self.decimals}")
        if self.variant == SIGN_SCALE and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 8 <= self.lowres_int_bits <= 32:
            raise ValueError(f"lowres_int_bits must be in [8, 32], got {self.lowres_int_bits}")

    @property
    def step(self) -> float:
        return 10.0 ** (-self.decimals)

    def bits_per_component(self) -> int:
        return self.lowres_int_bits if self.variant == FIXED_POINT else 1


@dataclass(frozen=True)
class PartitionedModel:
    w1: np.ndarray
    w2: np.ndarray
    spec: QuantizerSpec


@dataclass(frozen=True)
class BitPlaneStreams:
    lowres_bits: np.ndarray  # uint8 0/1, planes 1-2
    hires_bits: np.ndarray   # uint8 0/1, plane 3
    n: int                   # component count
    spec: QuantizerSpec


def _step_counts(w: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Round-half-to-even integer step counts, range-checked against the encoding."""
    k = np.rint(np.asarray(w, dtype=np.float64) / spec.step)
    limit = 2 ** (spec.lowres_int_bits - 1) - 1
    if k.size and np.max(np.abs(k)) > limit:
        raise RangeError(
            f"component exceeds +/-{limit} steps of {spec.step} "
            f"({spec.lowres_int_bits}-bit encoding)"
        )
    return k.astype(np.int64)


def quantize_fixed(w, decimals: int, lowres_int_bits: int = 16) -> np.ndarray:
    """Round each component half-to-even to the grid with step 10^-decimals."""
    spec = QuantizerSpec(FIXED_POINT, decimals=decimals, lowres_int_bits=lowres_int_bits)
    return _step_counts(w, spec) * spec.step


def partition(w, spec: QuantizerSpec) -> PartitionedModel:
    """Split w into (w1, w2) with w1 + w2 ~ w (exact up to float rounding)."""
    w = np.asarray(w, dtype=np.float64)
    if spec.variant == FIXED_POINT:
        w1 = quantize_fixed(w, spec.decimals, spec.lowres_int_bits)
        w2 = w - w1
    else:
        w1 = np.where(w < 0, -1.0, 1.0)
        w2 = w - spec.alpha * w1
    return PartitionedModel(w1=w1, w2=w2, spec=spec)


def _ints_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Two's-complement serialization, MSB first, one row of bits per value."""
    masked = (values.astype(np.int64) & ((1 << width) - 1)).astype(np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((masked[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def _bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    """Inverse of _ints_to_bits, with sign extension."""
    rows = bits.reshape(-1, width).astype(np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    raw = (rows << shifts[None, :]).sum(axis=1).astype(np.int64)
    sign_bit = np.int64(1) << (width - 1)
    return np.where(raw & sign_bit, raw - (np.int64(1) << width), raw)


def encode_lowres(w1, spec: QuantizerSpec) -> np.ndarray:
    """Serialize the low-resolution part to a bit stream (uint8 0/1 array)."""
    w1 = np.asarray(w1, dtype=np.float64)
    if spec.variant == SIGN_SCALE:
        if w1.size and not np.all(np.abs(w1) == 1.0):
            raise EncodingError("sign_scale components must be +/-1")
        return (w1 < 0).astype(np.uint8)
    k = _step_counts(w1, spec)
    if w1.size and np.max(np.abs(k * spec.step - w1)) > 0:
        raise EncodingError("component not on the quantizer grid")
    return _ints_to_bits(k, spec.lowres_int_bits)


def decode_lowres(bits, spec: QuantizerSpec, n: int) -> np.ndarray:
    """Exact inverse of encode_lowres for n components."""
    bits = np.asarray(bits, dtype=np.uint8)
    expected = n * spec.bits_per_component()
    if bits.size != expected:
        raise FramingError(f"lowres stream is {bits.size} bits, expected {expected}")
    if spec.variant == SIGN_SCALE:
        return np.where(bits == 1, -1.0, 1.0)
    return _bits_to_ints(bits, spec.lowres_int_bits) * spec.step


def encode_hires(w2) -> np.ndarray:
    """Narrow w2 to binary32 and serialize sign/exponent/mantissa MSB-first."""
    w2 = np.asarray(w2, dtype=np.float64)
    with np.errstate(over="ignore"):
        narrowed = w2.astype(np.float32)
    if narrowed.size and not np.all(np.isfinite(narrowed)):
        raise EncodingError("component not finite after binary32 narrowing")
    return np.unpackbits(np.frombuffer(narrowed.astype(">f4").tobytes(), dtype=np.uint8))


def decode_hires(bits, n: int) -> np.ndarray:
    """Inverse of encode_hires: bit stream -> float64 vector of binary32 values."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != n * HIRES_BITS:
        raise FramingError(f"hires stream is {bits.size} bits, expected {n * HIRES_BITS}")
    raw = np.packbits(bits).tobytes()
    return np.frombuffer(raw, dtype=">f4").astype(np.float64)


def symbol_count(streams: BitPlaneStreams) -> int:
    """Rate-matched symbol count: the longer plane sets the length."""
    return max(-(-streams.lowres_bits.size // 2), streams.hires_bits.size)


def pack_symbols(streams: BitPlaneStreams) -> np.ndarray:
    """Interleave the two streams into 3-bit words; shorter stream zero-padded.

    Symbol k carries lowres bits (2k, 2k+1) in planes 1-2 and hires bit k
    in plane 3.
    """
    n_sym = symbol_count(streams)
    low = np.zeros(2 * n_sym, dtype=np.uint8)
    low[: streams.lowres_bits.size] = streams.lowres_bits
    high = np.zeros(n_sym, dtype=np.uint8)
    high[: streams.hires_bits.size] = streams.hires_bits
    pairs = low.reshape(-1, 2)
    return (pairs[:, 0].astype(np.int64) << 2) | (pairs[:, 1].astype(np.int64) << 1) | high


def unpack_symbols(words, n: int, spec: QuantizerSpec, mode: str = "full") -> BitPlaneStreams:
    """Recover bit streams from demodulated words, trimming rate-match padding.

    mode="full" expects 3-bit words and returns both streams; mode="coarse"
    expects 2-bit words (planes 1-2 only) and returns an empty hires stream.
    """
    words = np.asarray(words, dtype=np.int64)
    low_len = n * spec.bits_per_component()
    high_len = n * HIRES_BITS if mode == "full" else 0
    n_sym = max(-(-low_len // 2), n * HIRES_BITS)
    if words.size != n_sym:
        raise FramingError(f"got {words.size} words, framing requires {n_sym}")
    if mode == "coarse":
        low = np.empty(2 * n_sym, dtype=np.uint8)
        low[0::2] = (words >> 1) & 1
        low[1::2] = words & 1
        high = np.zeros(0, dtype=np.uint8)
    elif mode == "full":
        low = np.empty(2 * n_sym, dtype=np.uint8)
        low[0::2] = (words >> 2) & 1
        low[1::2] = (words >> 1) & 1
        high = (words & 1).astype(np.uint8)[:high_len]
    else:
        raise ValueError(f"mode must be 'full' or 'coarse', got {mode!r}")
    return BitPlaneStreams(lowres_bits=low[:low_len], hires_bits=high, n=n, spec=spec)


# Frame header: N (u32 BE) | variant tag (u8) | decimals (u8) or alpha (f32 BE)
# | lowres_int_bits (u8).  See docs/wire_format.md.

def encode_frame_header(n: int, spec: QuantizerSpec) -> bytes:
    if spec.variant == FIXED_POINT:
        mid = struct.pack(">B", spec.decimals)
    else:
        mid = struct.pack(">f", spec.alpha)
    return struct.pack(">IB", n, _VARIANT_TAGS[spec.variant]) + mid + struct.pack(
        ">B", spec.lowres_int_bits
    )


def parse_frame_header(data: bytes) -> tuple[int, QuantizerSpec]:
    if len(data) < 5:
        raise FramingError("frame header truncated")
    n, tag = struct.unpack(">IB", data[:5])
    if tag not in _TAG_VARIANTS:
        raise FramingError(f"unknown variant tag {tag}")
    variant = _TAG_VARIANTS[tag]
    if variant == FIXED_POINT:
        if len(data) != 7:
            raise FramingError("fixed_point header must be 7 bytes")
        decimals, bits = struct.unpack(">BB", data[5:7])
        return n, QuantizerSpec(FIXED_POINT, decimals=decimals, lowres_int_bits=bits)
    if len(data) != 10:
        raise FramingError("sign_scale header must be 10 bytes")
    (alpha,) = struct.unpack(">f", data[5:9])
    (bits,) = struct.unpack(">B", data[9:10])
    return n, QuantizerSpec(SIGN_SCALE, alpha=float(alpha), lowres_int_bits=bits)
