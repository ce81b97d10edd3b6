import numpy as np
import pytest

from mxconv.core import ALL_FORMATS, ConversionPolicy, SignMode, format_params, fp32_decode
from mxconv.oracle import oracle_convert_block
from mxconv.quant import (
    ElementCode,
    MxBlock,
    convert_block,
    convert_words,
    element_exponent,
    quantize_codes,
    quantize_element,
    round_mantissa,
)
from mxconv.scale import ScaleClass, ScaleResult
from mxconv.selftest import EXAMPLE_BLOCK, EXAMPLE_WORDS, V1, V2, V3, V4

E5M2 = format_params("E5M2")
E4M3 = format_params("E4M3")
E2M1 = format_params("E2M1")
CORRECTED = ConversionPolicy()
PAPER = ConversionPolicy(SignMode.PAPER_EXAMPLE)
X156 = ScaleResult(156)
NAN = ScaleResult(0xFF, ScaleClass.NAN)
INF = ScaleResult(0xFE, ScaleClass.INFINITY)


@pytest.mark.parametrize("e, sign, policy, expected", [
    (171, 0, CORRECTED, 30),
    (168, 0, CORRECTED, 27),
    (43, 0, CORRECTED, None),
    (143, 1, PAPER, None),
    (143, 1, CORRECTED, 2),
])
def test_element_exponent(e, sign, policy, expected):
    assert element_exponent(156, e, sign, E5M2, policy) == expected


def test_element_exponent_zero_exponent_flushes():
    assert element_exponent(0, 0, 0, E5M2) is None


def test_element_exponent_above_scale():
    with pytest.raises(ValueError):
        element_exponent(156, 172, 0, E5M2)


@pytest.mark.parametrize("prefix, desc, expected", [
    (0b0011, E4M3, (0b010, 0)),
    (0b1111, E4M3, (0b000, 1)),
    (0b010, E5M2, (0b01, 0)),
    (0b000, E5M2, (0b00, 0)),
    (0b11, E2M1, (0, 1)),
])
def test_round_mantissa(prefix, desc, expected):
    assert round_mantissa(prefix, desc) == expected


@pytest.mark.parametrize("desc", ALL_FORMATS, ids=lambda d: d.name)
def test_round_mantissa_is_half_up(desc):
    for p in range(1 << desc.prefix_bits):
        mr, carry = round_mantissa(p, desc)
        # value in units of the kept LSB, halves rounded up
        assert mr + (carry << desc.R) == (p + 1) // 2


def _q(word, scale=X156, policy=CORRECTED, desc=E5M2):
    v = fp32_decode(word)
    return quantize_element(v.sign, v.exponent, v.prefix(desc.prefix_bits), scale, desc, policy).bits(desc)


def test_quantize_example_elements():
    assert _q(V1) == 0b01111010
    assert _q(V2) == 0b01101111
    assert _q(V3) == 0b00000000
    assert _q(V4, policy=PAPER) == 0b10000000
    assert _q(V4) == 0b1_00010_01


def test_quantize_special_scales():
    assert _q(V1, NAN) == 0b0_11111_10
    assert _q(V4, NAN) == 0b1_11111_10
    assert _q(V1, INF) == 0b0_11111_00
    assert _q(V1, NAN, desc=E4M3) == 0b0_1111_110
    assert _q(V1, NAN, desc=E2M1) == 0b0_11_1
    assert _q(V1, NAN, desc=format_params("E3M2")) == 0b0_111_10
    assert _q(V1, NAN, desc=format_params("E2M3")) == 0b0_11_110
    # no printed pattern for INT8; mantissa 2^(R-1)
    assert _q(V1, NAN, desc=format_params("INT8")) == 0b0_1_100000


def test_carry_and_saturation():
    # stored exponent 29 with prefix 111: carry into 30
    assert quantize_element(0, 170, 0b111, X156, E5M2) == ElementCode(0, 30, 0)
    # stored exponent 30 with prefix 111: clamp to max finite
    assert quantize_element(0, 171, 0b111, X156, E5M2) == ElementCode(0, 30, 0b11)


def test_element_above_scale_saturates():
    assert quantize_element(1, 255, 0, X156, E5M2) == ElementCode(1, 30, 3)
    assert quantize_element(1, 255, 0, X156, E5M2, PAPER) == ElementCode(1, 0, 0)


def test_convert_block_example():
    b = convert_block(EXAMPLE_BLOCK, E5M2, PAPER)
    assert b.x == X156
    assert b.code_bits() == [0x7A, 0x6F, 0x00, 0x80] + [0] * 28
    assert b.policy == PAPER
    assert oracle_convert_block(EXAMPLE_BLOCK, E5M2, PAPER) == b


def test_convert_zero_block():
    b = convert_block([fp32_decode(0)] * 32, E5M2)
    assert b.x == ScaleResult(0)
    assert b.code_bits() == [0] * 32


def test_convert_block_deterministic():
    assert convert_block(EXAMPLE_BLOCK, E4M3) == convert_block(EXAMPLE_BLOCK, E4M3)


def test_mxblock_validates_codes():
    with pytest.raises(ValueError):
        MxBlock(X156, (ElementCode(0, 40, 0),) * 32, E5M2.format_id)


def _domain(desc):
    sign, e, p = np.meshgrid(np.arange(2), np.arange(256), np.arange(1 << desc.prefix_bits),
                             indexing="ij")
    return sign.ravel(), e.ravel(), p.ravel()


@pytest.mark.parametrize("desc", ALL_FORMATS, ids=lambda d: d.name)
@pytest.mark.parametrize("mode", list(SignMode))
def test_scalar_matches_array_path(desc, mode):
    policy = ConversionPolicy(mode)
    sign, e, p = _domain(desc)
    xs = sorted({0, 1, 2, 100, 156, desc.max_normal_scale})
    scales = [ScaleResult(x) for x in xs] + [NAN, INF]
    for sc in scales:
        arr = quantize_codes(sign, e, p, sc.x, int(sc.cls), desc, policy)
        for i in range(0, len(sign), 7 if desc.R == 6 else 1):
            c = quantize_element(int(sign[i]), int(e[i]), int(p[i]), sc, desc, policy)
            assert c.bits(desc) == arr[i]


@pytest.mark.parametrize("desc", ALL_FORMATS, ids=lambda d: d.name)
@pytest.mark.parametrize("mode", list(SignMode))
def test_total_and_sign_preserving(desc, mode):
    policy = ConversionPolicy(mode)
    sign, e, p = _domain(desc)
    for x in range(desc.max_normal_scale + 1):
        codes = quantize_codes(sign, e, p, x, int(ScaleClass.NORMAL), desc, policy)
        assert (codes >> desc.element_bits == 0).all()
        assert ((codes >> (desc.K + desc.R)) == sign).all()
        ek = (codes >> desc.R) & desc.exp_all_ones
        assert (ek <= desc.max_stored_exponent).all()


@pytest.mark.parametrize("desc", ALL_FORMATS, ids=lambda d: d.name)
def test_monotone_in_magnitude(desc):
    e, p = np.meshgrid(np.arange(256), np.arange(1 << desc.prefix_bits), indexing="ij")
    e, p = e.ravel(), p.ravel()  # lexicographic (e, prefix) order
    for x in range(desc.max_normal_scale + 1):
        codes = quantize_codes(0, e, p, x, int(ScaleClass.NORMAL), desc)
        assert (np.diff(codes) >= 0).all(), x


def test_block_path_matches_scalar():
    rng = np.random.default_rng(11)
    for desc in ALL_FORMATS:
        words = rng.integers(0, 2**32, size=(50, 32), dtype=np.uint64).astype(np.uint32)
        words[:25] &= np.uint32(0x87FFFFFF)  # narrower exponent spread
        words[:25] |= np.uint32(0x38000000)
        arr = convert_words(words, desc, PAPER)
        for i, row in enumerate(words):
            assert arr.block(i) == convert_block([fp32_decode(int(w)) for w in row], desc, PAPER)
