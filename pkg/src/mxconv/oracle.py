"""Independent reference converter and the checks that compare it with the pipeline.

The reference works on values rather than bit fields: it takes the largest
exponent by a linear scan, derives the scale from orders, then scales each
input, truncates it to R+1 significant bits and rounds half away from zero.
All of this runs in float64, which is exact here: every intermediate is a
dyadic rational with at most 24 significant bits and a binary exponent
within +/-520.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    BLOCK_SIZE,
    ConversionPolicy,
    DEFAULT_POLICY,
    FormatDescriptor,
    FormatId,
    Fp32Bits,
)
from .quant import BlockArrays, MxBlock, convert_words, quantize_codes, quantize_element, round_mantissa
from .scale import ScaleClass, ScaleResult

# Element patterns written out under a NaN / infinite scale, as bit strings
# (exponent field, mantissa field).
_NAN_PATTERN = {
    FormatId.E5M2: ("11111", "10"),
    FormatId.E4M3: ("1111", "110"),
    FormatId.E3M2: ("111", "10"),
    FormatId.E2M3: ("11", "110"),
    FormatId.E2M1: ("11", "1"),
    FormatId.INT8: ("1", "100000"),
}


@dataclass
class OracleReport:
    checked_count: int = 0
    mismatches: list = field(default_factory=list)
    label: str = ""

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def merge(self, other: "OracleReport") -> "OracleReport":
        self.checked_count += other.checked_count
        self.mismatches.extend(other.mismatches)
        return self

    def __str__(self):
        head = f"{self.label}: " if self.label else ""
        return f"{head}{self.checked_count} checked, {len(self.mismatches)} mismatches"


def _fields(words: np.ndarray):
    words = np.asarray(words, dtype=np.uint32).astype(np.int64)
    return words >> 31, (words >> 23) & 0xFF, words & 0x7FFFFF


def oracle_scale(words: np.ndarray, desc: FormatDescriptor,
                 policy: ConversionPolicy = DEFAULT_POLICY) -> tuple[np.ndarray, np.ndarray]:
    """Shared scale by linear scan over ``(n, 32)`` words."""
    _, e, mant = _fields(words)
    finite = e != 255
    largest = np.where(finite, e, -1).max(axis=1)
    largest = np.where(largest < 0, 0, largest)
    # largest order an element can hold, e.g. 15 for E5M2
    top_order = ((1 << desc.K) - 2) - ((1 << (desc.K - 1)) - 1)
    order = largest - 127
    x = np.maximum(order - top_order + 127, 0)
    cls = np.full(len(x), ScaleClass.NORMAL, dtype=np.int8)
    if policy.propagate:
        any_special = (~finite).any(axis=1)
        first = np.argmax(~finite, axis=1)
        first_mant = mant[np.arange(len(mant)), first]
        cls = np.where(any_special & (first_mant == 0), ScaleClass.INFINITY, cls)
        cls = np.where(any_special & (first_mant != 0), ScaleClass.NAN, cls)
        x = np.where(cls == ScaleClass.INFINITY, 0xFE, np.where(cls == ScaleClass.NAN, 0xFF, x))
    return x.astype(np.uint8), cls.astype(np.int8)


def oracle_elements(words, x, cls, desc: FormatDescriptor,
                    policy: ConversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Reference element codes for FP32 ``words`` against scales ``x`` (broadcast)."""
    sign, e, mant = _fields(words)
    x = np.asarray(x, dtype=np.int64)
    cls = np.asarray(cls)
    bias = (1 << (desc.K - 1)) - 1
    emax = (1 << desc.K) - 2
    R = desc.R

    # the example sign mode adds the exponent of negative inputs instead of subtracting it
    exponent = e - 127
    if policy.paper_signs:
        exponent = np.where(sign == 1, -e - 127, exponent)
    significand = 1.0 + mant / float(1 << 23)
    scaled = np.ldexp(significand, exponent - (x - 127))

    _, ex = np.frexp(scaled)
    order = ex - 1
    biased = order + bias
    kept = np.floor(np.ldexp(scaled, R + 1 - order))  # implicit one, R bits and the guard
    rounded = np.floor((kept + 1) / 2)                # half away from zero
    q = np.ldexp(rounded, order - R)
    _, ex2 = np.frexp(q)
    order2 = ex2 - 1
    biased2 = order2 + bias
    mr = np.ldexp(q, R - order2) - (1 << R)

    max_finite = (2.0 - 2.0 ** -R) * 2.0 ** (emax - bias)
    over = (biased > emax) | (q > max_finite)
    under = (biased < 0) | (e == 0)

    ek_out = np.where(over, emax, biased2)
    mr_out = np.where(over, (1 << R) - 1, mr)
    ek_out = np.where(under, 0, ek_out)
    mr_out = np.where(under, 0, mr_out)

    nan_ek, nan_mr = (int(b, 2) for b in _NAN_PATTERN[desc.format_id])
    ek_out = np.where(cls == ScaleClass.NORMAL, ek_out, nan_ek)
    mr_out = np.where(cls == ScaleClass.NAN, nan_mr, np.where(cls == ScaleClass.INFINITY, 0, mr_out))
    ek_out = ek_out.astype(np.int64)
    mr_out = mr_out.astype(np.int64)
    return (sign << (desc.K + R)) | (ek_out << R) | mr_out


def oracle_convert_words(words: np.ndarray, desc: FormatDescriptor,
                         policy: ConversionPolicy = DEFAULT_POLICY) -> BlockArrays:
    words = np.asarray(words, dtype=np.uint32)
    x, cls = oracle_scale(words, desc, policy)
    codes = oracle_elements(words, x[:, None], cls[:, None], desc, policy)
    return BlockArrays(x, cls, codes.astype(np.uint16), desc.format_id, policy)


def oracle_convert_block(block, desc: FormatDescriptor,
                         policy: ConversionPolicy = DEFAULT_POLICY) -> MxBlock:
    """Reference conversion of one block (a sequence of 32 :class:`Fp32Bits` or words)."""
    words = [v.word if isinstance(v, Fp32Bits) else int(v) for v in block]
    if len(words) != BLOCK_SIZE:
        raise ValueError(f"a block holds exactly {BLOCK_SIZE} values, got {len(words)}")
    return oracle_convert_words(np.array([words], dtype=np.uint32), desc, policy).block(0)


def _compare(words: np.ndarray, got: BlockArrays, want: BlockArrays, report: OracleReport,
             offset: int = 0, limit: int = 20) -> None:
    bad = (got.x != want.x) | (got.cls != want.cls) | (got.codes != want.codes).any(axis=1)
    for i in np.flatnonzero(bad):
        if len(report.mismatches) >= limit:
            break
        report.mismatches.append((
            f"block {offset + i}: " + " ".join(f"{int(w):08x}" for w in words[i]),
            f"X={int(got.x[i]):02x} " + " ".join(f"{int(c):02x}" for c in got.codes[i]),
            f"X={int(want.x[i]):02x} " + " ".join(f"{int(c):02x}" for c in want.codes[i]),
        ))
    report.checked_count += len(words)


def exhaustive_element_check(desc: FormatDescriptor,
                             policy: ConversionPolicy = DEFAULT_POLICY,
                             low_bits: Optional[int] = None) -> OracleReport:
    """Every sign, exponent, (R+1)-bit prefix and reachable scale.

    Mantissa bits under the prefix are zero, or all ones when ``low_bits`` is
    -1 (checking that they are ignored), or the given pattern.
    """
    report = OracleReport(label=f"elements {desc.name} {policy.sign_mode.value}")
    shift = 23 - desc.prefix_bits
    low = 0 if low_bits is None else (low_bits & ((1 << shift) - 1))
    sign, e, prefix = np.meshgrid(np.arange(2), np.arange(256), np.arange(1 << desc.prefix_bits),
                                  indexing="ij")
    sign, e, prefix = sign.ravel(), e.ravel(), prefix.ravel()
    words = ((sign << 31) | (e << 23) | (prefix << shift) | low).astype(np.uint32)

    scales = [(x, ScaleClass.NORMAL) for x in range(desc.max_normal_scale + 1)]
    scales += [(0xFE, ScaleClass.INFINITY), (0xFF, ScaleClass.NAN)]
    for x, cls in scales:
        got = quantize_codes(sign, e, prefix, x, int(cls), desc, policy)
        want = oracle_elements(words, x, int(cls), desc, policy)
        bad = np.flatnonzero(got != want)
        for i in bad[:max(0, 20 - len(report.mismatches))]:
            report.mismatches.append((
                f"X={x:02x} sign={sign[i]} e={e[i]} prefix={prefix[i]:0{desc.prefix_bits}b}",
                f"{int(got[i]):0{desc.element_bits}b}",
                f"{int(want[i]):0{desc.element_bits}b}",
            ))
        report.checked_count += len(words)
    return report


def random_words(rng: np.random.Generator, n_blocks: int, desc: FormatDescriptor) -> np.ndarray:
    """Random blocks biased toward the interesting cases.

    Each block picks a base exponent; elements sit at most 2^K + 2 binades
    below it so few of them flush, with occasional zeros, subnormals,
    infinities and NaNs. A quarter of the blocks are raw random bits.
    """
    shape = (n_blocks, BLOCK_SIZE)
    base = rng.integers(0, 256, size=(n_blocks, 1))
    e = np.clip(base - rng.integers(0, (1 << desc.K) + 3, size=shape), 0, 254)
    mant = rng.integers(0, 1 << 23, size=shape)
    sign = rng.integers(0, 2, size=shape)
    pick = rng.random(shape)
    e = np.where(pick < 0.01, 255, e)
    mant = np.where(pick < 0.005, 0, mant)  # half of the specials are infinities
    e = np.where((pick >= 0.01) & (pick < 0.04), 0, e)
    mant = np.where((pick >= 0.01) & (pick < 0.025), 0, mant)
    words = (sign << 31) | (e << 23) | mant
    raw = rng.random(n_blocks) < 0.25
    words = np.where(raw[:, None], rng.integers(0, 1 << 32, size=shape), words)
    return words.astype(np.uint32)


def random_block_check(desc: FormatDescriptor, policy: ConversionPolicy = DEFAULT_POLICY,
                       n_blocks: int = 10_000, seed: int = 0,
                       chunk: int = 1 << 16) -> OracleReport:
    report = OracleReport(label=f"blocks {desc.name} {policy.sign_mode.value}/"
                                f"{policy.special_policy.value}")
    rng = np.random.default_rng(seed)
    done = 0
    while done < n_blocks:
        n = min(chunk, n_blocks - done)
        words = random_words(rng, n, desc)
        _compare(words, convert_words(words, desc, policy),
                 oracle_convert_words(words, desc, policy), report, done)
        done += n
    return report


# ---------------------------------------------------------------------------
# Quantization tables as printed (prefix -> mantissa field); the last entry
# of each is the clamp row taken when the stored exponent is already 2^K - 2.
# ---------------------------------------------------------------------------

PRINTED_TABLES: dict[FormatId, tuple[str, list[tuple[str, str]], tuple[str, str]]] = {
    FormatId.E5M2: ("Table 3", [
        ("000", "00"), ("001", "01"), ("010", "11"), ("011", "10"),
        ("100", "10"), ("101", "11"), ("110", "11"), ("111", "00"),
    ], ("111", "11")),
    FormatId.E4M3: ("Table 4", [
        ("0000", "000"), ("0001", "001"), ("0010", "001"), ("0011", "010"),
        ("0100", "010"), ("0101", "011"), ("0110", "011"), ("0111", "100"),
        ("1000", "100"), ("1001", "101"), ("1010", "101"), ("1011", "110"),
        ("1100", "110"), ("1101", "111"), ("1110", "111"), ("1111", "000"),
    ], ("1111", "111")),
    FormatId.E3M2: ("Table 5", [
        ("000", "00"), ("001", "01"), ("010", "11"), ("011", "10"),
        ("100", "10"), ("101", "11"), ("110", "11"), ("111", "00"),
    ], ("111", "11")),
    FormatId.E2M3: ("Table 6", [
        ("0000", "000"), ("0001", "001"), ("0010", "001"), ("0011", "010"),
        ("0100", "010"), ("0101", "011"), ("0110", "011"), ("0111", "100"),
        ("1000", "100"), ("1001", "101"), ("1010", "101"), ("1011", "110"),
        ("1100", "110"), ("1101", "111"), ("1110", "111"), ("1111", "000"),
    ], ("1111", "111")),
    FormatId.E2M1: ("Table 7", [
        ("00", "0"), ("01", "1"), ("10", "0"), ("11", "0"),
    ], ("11", "1")),
}


@dataclass(frozen=True)
class TableRow:
    prefix: str
    mr: str
    carry: int
    clamp: bool = False

    @property
    def label(self) -> str:
        return f"{self.prefix} (at max exponent)" if self.clamp else self.prefix


def implemented_table(desc: FormatDescriptor) -> list[TableRow]:
    """The rounding kernel's prefix -> (mr, carry) map, plus the clamp row."""
    rows = []
    for p in range(1 << desc.prefix_bits):
        mr, carry = round_mantissa(p, desc)
        rows.append(TableRow(f"{p:0{desc.prefix_bits}b}", f"{mr:0{desc.R}b}", carry))
    # clamp row: all-ones prefix on an element already at the top stored exponent
    # with X = 1 an element of exponent 1 + threshold lands on stored exponent 2^K - 2
    e = 1 + desc.scale_threshold
    code = quantize_element(0, e, (1 << desc.prefix_bits) - 1, ScaleResult(1), desc)
    rows.append(TableRow("1" * desc.prefix_bits, f"{code.mr:0{desc.R}b}", 0, clamp=True))
    return rows


def table_report(desc: FormatDescriptor) -> OracleReport:
    """Rows where the implemented rounding differs from the printed table."""
    report = OracleReport(label=desc.name)
    if desc.format_id not in PRINTED_TABLES:
        report.label = f"{desc.name} (no printed table)"
        return report
    name, rows, clamp = PRINTED_TABLES[desc.format_id]
    report.label = f"{desc.name} vs {name}"
    printed = [(p, m, False) for p, m in rows] + [(clamp[0], clamp[1], True)]
    for row, (p, m, is_clamp) in zip(implemented_table(desc), printed):
        assert row.prefix == p and row.clamp == is_clamp
        report.checked_count += 1
        if row.mr != m:
            report.mismatches.append((row.label, row.mr, m))
    return report
