"""Stage 3: per-element quantization against the shared scale (the "P_i" block).

Rounding is half-away-from-zero on a single guard bit; mantissa bits below
the guard are discarded without a sticky bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    BLOCK_SIZE,
    MANT_BITS,
    MANT_MASK,
    ConversionPolicy,
    DEFAULT_POLICY,
    FormatDescriptor,
    FormatId,
    Fp32Bits,
    format_params,
)
from .maxexp import block_max, block_max_words
from .scale import ScaleClass, ScaleResult, shared_scale, shared_scale_words

# mantissa field of the element emitted under a NaN scale
NAN_MANTISSA = {
    FormatId.E5M2: 0b10,
    FormatId.E4M3: 0b110,
    FormatId.E3M2: 0b10,
    FormatId.E2M3: 0b110,
    FormatId.E2M1: 0b1,
    FormatId.INT8: 0b100000,
}


@dataclass(frozen=True)
class ElementCode:
    sign: int
    ek: int
    mr: int

    def bits(self, desc: FormatDescriptor) -> int:
        return (self.sign << (desc.K + desc.R)) | (self.ek << desc.R) | self.mr

    @classmethod
    def from_bits(cls, value: int, desc: FormatDescriptor) -> "ElementCode":
        value = int(value)
        if value >> desc.element_bits:
            raise ValueError(f"{value:#x} does not fit in {desc.element_bits} bits")
        return cls(value >> (desc.K + desc.R), (value >> desc.R) & desc.exp_all_ones,
                   value & desc.mant_all_ones)

    def fields(self, desc: FormatDescriptor) -> str:
        return f"{self.sign} {self.ek:0{desc.K}b} {self.mr:0{desc.R}b}"

    def is_max_finite(self, desc: FormatDescriptor) -> bool:
        return self.ek == desc.max_stored_exponent and self.mr == desc.mant_all_ones


def _exponent_offset(x: int, e: int, sign: int, desc: FormatDescriptor,
                     policy: ConversionPolicy) -> int:
    """EK before the final ``2^K - 2 - EK`` step: distance below the scale's top binade."""
    top = x + desc.scale_threshold
    if policy.paper_signs and sign:
        return top + e
    return top - e


def element_exponent(x: int, e: int, sign: int, desc: FormatDescriptor,
                     policy: ConversionPolicy = DEFAULT_POLICY) -> Optional[int]:
    """Stored K-bit exponent of an element, or ``None`` when it flushes to zero.

    Exponent-zero inputs (zero and FP32 subnormals) always flush.
    """
    if e == 0:
        return None
    ek_raw = _exponent_offset(x, e, sign, desc, policy)
    if ek_raw < 0:
        raise ValueError(
            f"element exponent {e} lies above the range of scale {x} for {desc.name}")
    if ek_raw > desc.max_stored_exponent:
        return None
    return desc.max_stored_exponent - ek_raw


def round_mantissa(prefix: int, desc: FormatDescriptor) -> tuple[int, int]:
    """Round an (R+1)-bit prefix to R bits; returns ``(mr, carry)``."""
    if not 0 <= prefix < (1 << desc.prefix_bits):
        raise ValueError(f"prefix {prefix} wider than {desc.prefix_bits} bits")
    mr = (prefix >> 1) + (prefix & 1)
    if mr > desc.mant_all_ones:
        return 0, 1
    return mr, 0


def quantize_element(sign: int, e: int, mant_prefix: int, scale: ScaleResult,
                     desc: FormatDescriptor,
                     policy: ConversionPolicy = DEFAULT_POLICY) -> ElementCode:
    if scale.cls is ScaleClass.NAN:
        return ElementCode(sign, desc.exp_all_ones, NAN_MANTISSA[desc.format_id])
    if scale.cls is ScaleClass.INFINITY:
        return ElementCode(sign, desc.exp_all_ones, 0)

    if e and _exponent_offset(scale.x, e, sign, desc, policy) < 0:
        # only exponent-255 elements that the comparison tree skipped get here
        return ElementCode(sign, desc.max_stored_exponent, desc.mant_all_ones)
    ek = element_exponent(scale.x, e, sign, desc, policy)
    if ek is None:
        return ElementCode(sign, 0, 0)
    mr, carry = round_mantissa(mant_prefix, desc)
    if not carry:
        return ElementCode(sign, ek, mr)
    if ek < desc.max_stored_exponent:
        return ElementCode(sign, ek + 1, 0)
    return ElementCode(sign, desc.max_stored_exponent, desc.mant_all_ones)


@dataclass(frozen=True)
class MxBlock:
    x: ScaleResult
    codes: tuple[ElementCode, ...]
    format_id: FormatId
    policy: ConversionPolicy = field(default=DEFAULT_POLICY)

    def __post_init__(self):
        if len(self.codes) != BLOCK_SIZE:
            raise ValueError(f"an MX block holds {BLOCK_SIZE} codes, got {len(self.codes)}")
        desc = self.desc
        for c in self.codes:
            if not (0 <= c.ek <= desc.exp_all_ones and 0 <= c.mr <= desc.mant_all_ones
                    and c.sign in (0, 1)):
                raise ValueError(f"code {c} does not fit {desc.name}")

    @property
    def desc(self) -> FormatDescriptor:
        return format_params(self.format_id)

    def code_bits(self) -> list[int]:
        desc = self.desc
        return [c.bits(desc) for c in self.codes]


def convert_block(block: Sequence[Fp32Bits], desc: FormatDescriptor,
                  policy: ConversionPolicy = DEFAULT_POLICY) -> MxBlock:
    winner = block_max(block, policy)
    x = shared_scale(winner, desc)
    r1 = desc.prefix_bits
    codes = tuple(quantize_element(v.sign, v.exponent, v.prefix(r1), x, desc, policy)
                  for v in block)
    return MxBlock(x, codes, desc.format_id, policy)


# ---------------------------------------------------------------------------
# array path: same rules over numpy arrays, used for bulk conversion
# ---------------------------------------------------------------------------

def quantize_codes(sign, e, prefix, x, cls, desc: FormatDescriptor,
                   policy: ConversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Element codes as integers; all arguments broadcast against each other."""
    sign = np.asarray(sign, dtype=np.int64)
    e = np.asarray(e, dtype=np.int64)
    prefix = np.asarray(prefix, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    cls = np.asarray(cls)

    emax = desc.max_stored_exponent
    top = x + desc.scale_threshold
    ek_raw = top - e
    if policy.paper_signs:
        ek_raw = np.where(sign == 1, top + e, ek_raw)

    mr = (prefix >> 1) + (prefix & 1)
    carry = mr > desc.mant_all_ones
    mr = np.where(carry, 0, mr)
    ek = emax - ek_raw
    ek = np.where(carry, ek + 1, ek)

    saturate = (ek_raw < 0) | (ek > emax)
    ek = np.where(saturate, emax, ek)
    mr = np.where(saturate, desc.mant_all_ones, mr)

    flush = (e == 0) | (ek_raw > emax)
    ek = np.where(flush, 0, ek)
    mr = np.where(flush, 0, mr)

    ek = np.where(cls == ScaleClass.NORMAL, ek, desc.exp_all_ones)
    mr = np.where(cls == ScaleClass.NAN, NAN_MANTISSA[desc.format_id],
                  np.where(cls == ScaleClass.INFINITY, 0, mr))
    return (sign << (desc.K + desc.R)) | (ek << desc.R) | mr


@dataclass(frozen=True)
class BlockArrays:
    """Many converted blocks as arrays: scale bytes, scale classes and (n, 32) codes."""

    x: np.ndarray
    cls: np.ndarray
    codes: np.ndarray
    format_id: FormatId
    policy: ConversionPolicy = DEFAULT_POLICY

    def __len__(self):
        return len(self.x)

    def block(self, i: int) -> MxBlock:
        desc = format_params(self.format_id)
        x = ScaleResult(int(self.x[i]), ScaleClass(int(self.cls[i])))
        codes = tuple(ElementCode.from_bits(int(c), desc) for c in self.codes[i])
        return MxBlock(x, codes, self.format_id, self.policy)


def convert_words(words: np.ndarray, desc: FormatDescriptor,
                  policy: ConversionPolicy = DEFAULT_POLICY) -> BlockArrays:
    """Convert an ``(n, 32)`` uint32 array of FP32 words block by block."""
    words = np.asarray(words, dtype=np.uint32)
    winners = block_max_words(words, policy)
    x, cls = shared_scale_words(winners, desc)
    sign = (words >> np.uint32(31)).astype(np.int64)
    e = ((words >> np.uint32(MANT_BITS)) & np.uint32(0xFF)).astype(np.int64)
    prefix = ((words & np.uint32(MANT_MASK)) >> np.uint32(MANT_BITS - desc.prefix_bits)).astype(np.int64)
    codes = quantize_codes(sign, e, prefix, x[:, None], cls[:, None], desc, policy)
    return BlockArrays(x, cls, codes.astype(np.uint16), desc.format_id, policy)
