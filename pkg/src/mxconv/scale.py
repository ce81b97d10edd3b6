"""Stage 2: winning exponent to the 8-bit shared scale (the "div" block)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import EXP_ALL_ONES, MANT_BITS, MANT_MASK, FormatDescriptor, Fp32Bits

SCALE_NAN = 0xFF
SCALE_INF = 0xFE


class ScaleClass(enum.IntEnum):
    NORMAL = 0
    INFINITY = 1
    NAN = 2


@dataclass(frozen=True)
class ScaleResult:
    x: int
    cls: ScaleClass = ScaleClass.NORMAL

    def __post_init__(self):
        if not 0 <= self.x <= 0xFF:
            raise ValueError(f"scale byte out of range: {self.x}")
        if self.cls is ScaleClass.NAN and self.x != SCALE_NAN:
            raise ValueError("NaN scale must be 0xFF")
        if self.cls is ScaleClass.INFINITY and self.x != SCALE_INF:
            raise ValueError("Infinity scale must be 0xFE")

    @property
    def is_normal(self) -> bool:
        return self.cls is ScaleClass.NORMAL

    def __str__(self):
        if self.cls is ScaleClass.NORMAL:
            return f"X=0x{self.x:02X} (2^{self.x - 127})"
        return f"X=0x{self.x:02X} ({self.cls.name})"


def scale_temp(ev: int, desc: FormatDescriptor) -> int:
    return max(ev - desc.scale_threshold, 0)


def special_flag(mantissa: int) -> int:
    """1 iff every mantissa bit is clear (the winner is an infinity, not a NaN)."""
    return int((mantissa & MANT_MASK) == 0)


def encode_scale(x_temp: int, flag: int, ev: int, desc: FormatDescriptor) -> ScaleResult:
    # x_temp saturating at 255 - threshold is the same condition as ev == 255
    if ev == EXP_ALL_ONES:
        if flag:
            return ScaleResult(SCALE_INF, ScaleClass.INFINITY)
        return ScaleResult(SCALE_NAN, ScaleClass.NAN)
    return ScaleResult(x_temp, ScaleClass.NORMAL)


def shared_scale(winner: Fp32Bits, desc: FormatDescriptor) -> ScaleResult:
    """The whole div block: winner value in, shared scale out."""
    ev = winner.exponent
    return encode_scale(scale_temp(ev, desc), special_flag(winner.mantissa), ev, desc)


def shared_scale_words(winners: np.ndarray, desc: FormatDescriptor) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`shared_scale`; returns (scale bytes, ScaleClass codes)."""
    winners = np.asarray(winners, dtype=np.uint32)
    ev = ((winners >> np.uint32(MANT_BITS)) & np.uint32(0xFF)).astype(np.int32)
    x = np.maximum(ev - desc.scale_threshold, 0)
    special = ev == EXP_ALL_ONES
    is_inf = special & ((winners & np.uint32(MANT_MASK)) == 0)
    is_nan = special & ~is_inf
    x = np.where(is_inf, SCALE_INF, np.where(is_nan, SCALE_NAN, x)).astype(np.uint8)
    cls = np.where(is_inf, ScaleClass.INFINITY, np.where(is_nan, ScaleClass.NAN, ScaleClass.NORMAL))
    return x, cls.astype(np.int8)
