# Four hand-picked values through the whole E5M2 pipeline, stage by stage.

from mxconv.core import ConversionPolicy, SignMode, format_params
from mxconv.dequant import dequantize_block
from mxconv.maxexp import block_max
from mxconv.quant import convert_block
from mxconv.scale import shared_scale
from mxconv.selftest import EXAMPLE_BLOCK

desc = format_params("E5M2")

print("inputs (first four of 32, the rest are +0):")
for v in EXAMPLE_BLOCK[:4]:
    print(f"  sign={v.sign} exp={v.exponent:08b} mant[22:20]={v.mantissa >> 20:03b}  {v.to_float():.6g}")

# stage 1: comparison tree picks the largest magnitude
winner = block_max(EXAMPLE_BLOCK)
print(f"\nwinner exponent: {winner.exponent} ({winner.exponent:08b})")

# stage 2: shared scale
x = shared_scale(winner, desc)
print(f"shared scale: {x}")

# stage 3: element codes, once per sign mode
for mode in SignMode:
    block = convert_block(EXAMPLE_BLOCK, desc, ConversionPolicy(mode))
    print(f"\n{mode.value} mode")
    decoded = dequantize_block(block)
    for code, d in zip(block.codes[:4], decoded[:4]):
        print(f"  {code.fields(desc)}  ->  {d}")
