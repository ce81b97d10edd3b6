import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mxconv.core import (
    ALL_FORMATS,
    ConversionPolicy,
    FormatId,
    Fp32Bits,
    SignMode,
    SpecialPolicy,
    ValueClass,
    classify,
    format_params,
    fp32_decode,
    make_block,
    words_from_floats,
)


def test_decode_zero():
    assert fp32_decode(0) == Fp32Bits(0, 0, 0)


def test_decode_example_value():
    v = fp32_decode(0b0_10101011_011 << 20)
    assert (v.sign, v.exponent) == (0, 171)
    assert v.mantissa >> 20 == 0b011


def test_decode_negative_infinity():
    assert fp32_decode(0xFF800000) == Fp32Bits(1, 255, 0)


@pytest.mark.parametrize("exponent", range(256))
@pytest.mark.parametrize("sign", [0, 1])
def test_roundtrip_exponent_sign_prefix(sign, exponent):
    for prefix in range(16):
        word = (sign << 31) | (exponent << 23) | (prefix << 19) | 0x5A5A
        assert fp32_decode(word).word == word


@given(st.integers(0, 2**32 - 1))
def test_roundtrip_random_words(word):
    v = fp32_decode(word)
    assert v.word == word
    assert 0 <= v.exponent <= 255 and 0 <= v.mantissa < 2**23


def test_decode_rejects_wide_words():
    with pytest.raises(ValueError):
        fp32_decode(2**32)


def test_from_float_matches_struct():
    v = Fp32Bits.from_float(-1.5)
    assert v.word == struct.unpack("<I", struct.pack("<f", -1.5))[0]
    assert v.to_float() == -1.5


@pytest.mark.parametrize("name, k, r, bits", [
    ("E5M2", 5, 2, 8), ("E4M3", 4, 3, 8), ("E3M2", 3, 2, 6),
    ("E2M3", 2, 3, 6), ("E2M1", 2, 1, 4), ("INT8", 1, 6, 8),
])
def test_format_params(name, k, r, bits):
    d = format_params(name)
    assert (d.K, d.R, d.w, d.element_bits) == (k, r, 8, bits)
    assert d.scale_threshold == 2 ** (k - 1) - 1
    assert d.max_stored_exponent == 2**k - 2
    assert format_params(name) == d


def test_format_parse_errors():
    with pytest.raises(ValueError):
        format_params("E8M0")


def test_all_formats_cover_ids():
    assert [d.format_id for d in ALL_FORMATS] == list(FormatId)


def test_classify():
    assert classify(Fp32Bits(0, 255, 0)).kind is ValueClass.EXP_ALL_ONES
    assert classify(Fp32Bits(0, 255, 0)).mantissa_zero
    assert not classify(Fp32Bits(0, 255, 5)).mantissa_zero
    assert classify(Fp32Bits(0, 171, 3 << 20)).kind is ValueClass.FINITE


def test_default_policy():
    p = ConversionPolicy()
    assert p.sign_mode is SignMode.CORRECTED
    assert p.special_policy is SpecialPolicy.IGNORE


def test_make_block_length():
    with pytest.raises(ValueError):
        make_block([0] * 31)
    assert len(make_block(range(32))) == 32


def test_words_from_floats():
    w = words_from_floats([1.0, -2.0])
    assert w.dtype == np.uint32
    assert list(w) == [0x3F800000, 0xC0000000]
