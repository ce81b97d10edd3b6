"""Bit-level FP32 views, MX format descriptors and conversion policies."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

BLOCK_SIZE = 32
FP32_BIAS = 127
SCALE_BITS = 8

MANT_BITS = 23
MANT_MASK = (1 << MANT_BITS) - 1
EXP_ALL_ONES = 0xFF


@dataclass(frozen=True)
class Fp32Bits:
    """A binary32 word split into its three fields."""

    sign: int
    exponent: int
    mantissa: int

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise ValueError(f"sign must be 0 or 1, got {self.sign}")
        if not 0 <= self.exponent <= 0xFF:
            raise ValueError(f"exponent out of range: {self.exponent}")
        if not 0 <= self.mantissa <= MANT_MASK:
            raise ValueError(f"mantissa out of range: {self.mantissa:#x}")

    @property
    def word(self) -> int:
        return (self.sign << 31) | (self.exponent << MANT_BITS) | self.mantissa

    @property
    def magnitude(self) -> int:
        """The 31-bit exponent||mantissa field, compared as an unsigned int."""
        return (self.exponent << MANT_BITS) | self.mantissa

    @classmethod
    def from_float(cls, value: float) -> "Fp32Bits":
        (word,) = struct.unpack("<I", struct.pack("<f", value))
        return fp32_decode(word)

    def to_float(self) -> float:
        (value,) = struct.unpack("<f", struct.pack("<I", self.word))
        return value

    def prefix(self, nbits: int) -> int:
        """Top ``nbits`` of the mantissa field."""
        return self.mantissa >> (MANT_BITS - nbits)

    def __str__(self):
        return f"{self.sign} {self.exponent:08b} {self.mantissa:023b}"


ZERO = Fp32Bits(0, 0, 0)


def fp32_decode(word: int) -> Fp32Bits:
    word = int(word)
    if not 0 <= word <= 0xFFFFFFFF:
        raise ValueError(f"not a 32-bit word: {word:#x}")
    return Fp32Bits((word >> 31) & 1, (word >> MANT_BITS) & 0xFF, word & MANT_MASK)


class FormatId(enum.IntEnum):
    # values double as the container format byte
    E5M2 = 0
    E4M3 = 1
    E3M2 = 2
    E2M3 = 3
    E2M1 = 4
    INT8 = 5

    @classmethod
    def parse(cls, name: "str | FormatId") -> "FormatId":
        if isinstance(name, FormatId):
            return name
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown MX format {name!r}") from None


_WIDTHS = {
    FormatId.E5M2: (5, 2),
    FormatId.E4M3: (4, 3),
    FormatId.E3M2: (3, 2),
    FormatId.E2M3: (2, 3),
    FormatId.E2M1: (2, 1),
    FormatId.INT8: (1, 6),
}


@dataclass(frozen=True)
class FormatDescriptor:
    format_id: FormatId
    K: int
    R: int
    w: int = SCALE_BITS

    @property
    def name(self) -> str:
        return self.format_id.name

    @property
    def scale_threshold(self) -> int:
        # also the element exponent bias
        return (1 << (self.K - 1)) - 1

    @property
    def max_stored_exponent(self) -> int:
        return (1 << self.K) - 2

    @property
    def exp_all_ones(self) -> int:
        return (1 << self.K) - 1

    @property
    def mant_all_ones(self) -> int:
        return (1 << self.R) - 1

    @property
    def element_bits(self) -> int:
        return 1 + self.K + self.R

    @property
    def prefix_bits(self) -> int:
        """Mantissa bits consumed per element: R kept plus one guard bit."""
        return self.R + 1

    @property
    def max_normal_scale(self) -> int:
        """Largest Normal-class scale byte (winner exponent 254)."""
        return 254 - self.scale_threshold


def format_params(format_id: "FormatId | str") -> FormatDescriptor:
    fid = FormatId.parse(format_id)
    k, r = _WIDTHS[fid]
    return FormatDescriptor(fid, k, r)


ALL_FORMATS: tuple[FormatDescriptor, ...] = tuple(format_params(f) for f in FormatId)


class ValueClass(enum.Enum):
    FINITE = "finite"
    EXP_ALL_ONES = "exp_all_ones"


@dataclass(frozen=True)
class Classification:
    kind: ValueClass
    mantissa_zero: bool = False


def classify(v: Fp32Bits) -> Classification:
    if v.exponent == EXP_ALL_ONES:
        return Classification(ValueClass.EXP_ALL_ONES, v.mantissa == 0)
    return Classification(ValueClass.FINITE)


class SignMode(enum.Enum):
    CORRECTED = "corrected"
    PAPER_EXAMPLE = "paper"


class SpecialPolicy(enum.Enum):
    IGNORE = "ignore"
    PROPAGATE = "propagate"


@dataclass(frozen=True)
class ConversionPolicy:
    sign_mode: SignMode = SignMode.CORRECTED
    special_policy: SpecialPolicy = SpecialPolicy.IGNORE

    @property
    def paper_signs(self) -> bool:
        return self.sign_mode is SignMode.PAPER_EXAMPLE

    @property
    def propagate(self) -> bool:
        return self.special_policy is SpecialPolicy.PROPAGATE


DEFAULT_POLICY = ConversionPolicy()
ALL_POLICIES: tuple[ConversionPolicy, ...] = tuple(
    ConversionPolicy(m, s) for m in SignMode for s in SpecialPolicy
)


def words_from_floats(values: Iterable[float]) -> np.ndarray:
    """binary32 bit patterns of ``values`` (rounded to float32 first)."""
    return np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                      dtype=np.float32).view(np.uint32)


def make_block(words: Sequence[int]) -> tuple[Fp32Bits, ...]:
    """Decode 32 words into a block, rejecting any other length."""
    if len(words) != BLOCK_SIZE:
        raise ValueError(f"a block holds exactly {BLOCK_SIZE} values, got {len(words)}")
    return tuple(fp32_decode(int(w)) for w in words)
