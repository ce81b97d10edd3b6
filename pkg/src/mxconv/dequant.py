"""Backward transform: shared scale and element codes back to exact values."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import FP32_BIAS, FormatDescriptor, Fp32Bits, format_params
from .quant import BlockArrays, ElementCode, MxBlock
from .scale import ScaleClass, ScaleResult


class ValueKind(enum.Enum):
    REAL = "real"
    NAN = "nan"
    INFINITY = "inf"


@dataclass(frozen=True)
class DecodedValue:
    kind: ValueKind
    value: Fraction = Fraction(0)
    negative: bool = False  # only meaningful for REAL, keeps -0

    @classmethod
    def real(cls, value: Fraction, negative: Optional[bool] = None) -> "DecodedValue":
        if negative is None:
            negative = value < 0
        return cls(ValueKind.REAL, Fraction(value), negative)

    @property
    def is_real(self) -> bool:
        return self.kind is ValueKind.REAL

    @property
    def is_nan(self) -> bool:
        return self.kind is ValueKind.NAN

    def __float__(self):
        if self.kind is ValueKind.NAN:
            return math.nan
        if self.kind is ValueKind.INFINITY:
            return math.inf
        if self.value == 0:
            return -0.0 if self.negative else 0.0
        return float(self.value)

    def __str__(self):
        if self.kind is not ValueKind.REAL:
            return self.kind.name
        return _format_real(self.value, self.negative)


POS_NAN = DecodedValue(ValueKind.NAN)
INFINITY = DecodedValue(ValueKind.INFINITY)


def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


def _format_real(v: Fraction, negative: bool) -> str:
    if v == 0:
        return "-0" if negative else "0"
    mag = abs(v)
    k = mag.numerator.bit_length() - mag.denominator.bit_length()
    if mag < _pow2(k):
        k -= 1
    return f"{'-' if negative else ''}{mag / _pow2(k)} * 2^{k}"


def decode_scale(s: ScaleResult) -> DecodedValue:
    if s.cls is ScaleClass.NAN:
        return POS_NAN
    if s.cls is ScaleClass.INFINITY:
        return INFINITY
    return DecodedValue.real(_pow2(s.x - FP32_BIAS))


def decode_element(code: ElementCode, desc: FormatDescriptor) -> DecodedValue:
    """IEEE-style reading with bias ``2^(K-1) - 1`` and a subnormal ``ek = 0``."""
    bias = desc.scale_threshold
    if code.ek == desc.exp_all_ones:
        return INFINITY if code.mr == 0 else POS_NAN
    frac = Fraction(code.mr, 1 << desc.R)
    if code.ek == 0:
        mag = frac * _pow2(1 - bias)
    else:
        mag = (1 + frac) * _pow2(code.ek - bias)
    return DecodedValue.real(-mag if code.sign else mag, bool(code.sign))


def dequantize_block(b: MxBlock) -> list[DecodedValue]:
    if b.x.cls is ScaleClass.NAN:
        return [POS_NAN] * len(b.codes)
    desc = b.desc
    out = []
    if b.x.cls is ScaleClass.INFINITY:
        for c in b.codes:
            zero = c.ek == 0 and c.mr == 0
            out.append(POS_NAN if zero else INFINITY)
        return out
    scale = decode_scale(b.x).value
    for c in b.codes:
        d = decode_element(c, desc)
        out.append(DecodedValue.real(d.value * scale, d.negative) if d.is_real else d)
    return out


def dequantize_arrays(arrays: BlockArrays) -> np.ndarray:
    """Float64 backward transform of many blocks; exact for every MX format here."""
    desc = format_params(arrays.format_id)
    codes = arrays.codes.astype(np.int64)
    sign = codes >> (desc.K + desc.R)
    ek = (codes >> desc.R) & desc.exp_all_ones
    mr = codes & desc.mant_all_ones
    bias = desc.scale_threshold
    frac = mr / float(1 << desc.R)
    mag = np.where(ek == 0, np.ldexp(frac, 1 - bias), np.ldexp(1.0 + frac, ek - bias))
    special = ek == desc.exp_all_ones
    mag = np.where(special, np.where(mr == 0, np.inf, np.nan), mag)
    cls = arrays.cls[:, None]
    scaled = np.ldexp(mag, arrays.x.astype(np.int64)[:, None] - FP32_BIAS)
    scaled = np.where(cls == ScaleClass.INFINITY, np.where(mag == 0, np.nan, np.inf), scaled)
    scaled = np.where(cls == ScaleClass.NAN, np.nan, scaled)
    return np.where(sign == 1, -scaled, scaled)


@dataclass(frozen=True)
class ErrorStats:
    max_abs_error: float = 0.0
    max_rel_error: float = 0.0
    rmse: float = 0.0
    flushed_count: int = 0
    saturated_count: int = 0
    special_count: int = 0
    compared_count: int = 0
    # over elements that were neither flushed nor clamped and decode as normals
    max_rel_error_in_range: float = 0.0

    def __str__(self):
        return (f"max_abs={self.max_abs_error:.6g} max_rel={self.max_rel_error:.6g} "
                f"rmse={self.rmse:.6g} flushed={self.flushed_count} "
                f"saturated={self.saturated_count} specials={self.special_count} "
                f"max_rel_in_range={self.max_rel_error_in_range:.6g}")


def _exact(v: Fp32Bits) -> Optional[Fraction]:
    if v.exponent == 0xFF:
        return None
    f = Fraction(v.mantissa, 1 << 23)
    mag = (1 + f) * _pow2(v.exponent - FP32_BIAS) if v.exponent else f * _pow2(-126)
    return -mag if v.sign else mag


def _clamped(code: ElementCode, desc: FormatDescriptor, exact: Fraction,
             decoded: Fraction) -> bool:
    # max-finite code for an input at or past the rounding midpoint above it
    if not code.is_max_finite(desc) or decoded == 0:
        return False
    binade = abs(decoded) / (2 - Fraction(1, 1 << desc.R))
    return abs(exact) >= abs(decoded) + binade / (1 << (desc.R + 1))


def block_error_stats(original: Sequence[Fp32Bits], decoded: Sequence[DecodedValue],
                      block: Optional[MxBlock] = None) -> ErrorStats:
    """Exact per-block error statistics.

    Pairs where either side is NaN or infinite are skipped and counted as
    specials. ``block`` is needed only to recognise saturated codes.
    """
    if len(original) != len(decoded):
        raise ValueError("original and decoded lengths differ")
    desc = block.desc if block is not None else None
    max_abs = max_rel = max_rel_in_range = Fraction(0)
    sq = Fraction(0)
    n = flushed = saturated = specials = 0
    for i, (v, d) in enumerate(zip(original, decoded)):
        exact = _exact(v)
        if exact is None or not d.is_real:
            specials += 1
            continue
        err = abs(exact - d.value)
        n += 1
        sq += err * err
        max_abs = max(max_abs, err)
        clamped = desc is not None and _clamped(block.codes[i], desc, exact, d.value)
        saturated += clamped
        if exact == 0:
            continue
        rel = err / abs(exact)
        max_rel = max(max_rel, rel)
        if d.value == 0:
            flushed += 1
        elif not clamped and (desc is None or block.codes[i].ek != 0):
            max_rel_in_range = max(max_rel_in_range, rel)
    rmse = math.sqrt(sq / n) if n else 0.0
    return ErrorStats(float(max_abs), float(max_rel), rmse, flushed, saturated, specials, n,
                      float(max_rel_in_range))
