"""FP32 to microscaling (MX) block conversion: a bit-exact software model."""

from .core import (
    ALL_FORMATS,
    BLOCK_SIZE,
    ConversionPolicy,
    FormatDescriptor,
    FormatId,
    Fp32Bits,
    SignMode,
    SpecialPolicy,
    classify,
    format_params,
    fp32_decode,
    make_block,
    words_from_floats,
)
from .maxexp import block_max, comp
from .scale import ScaleClass, ScaleResult, encode_scale, scale_temp, special_flag
from .quant import (
    BlockArrays,
    ElementCode,
    MxBlock,
    convert_block,
    convert_words,
    element_exponent,
    quantize_element,
    round_mantissa,
)
from .dequant import (
    DecodedValue,
    ErrorStats,
    block_error_stats,
    decode_element,
    decode_scale,
    dequantize_arrays,
    dequantize_block,
)

__version__ = "0.1.0"
