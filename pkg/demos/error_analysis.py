# Relative error per format on Gaussian data, against the half-ulp bound.

import numpy as np

from mxconv.core import ALL_FORMATS
from mxconv.dequant import dequantize_arrays
from mxconv.quant import convert_words

rng = np.random.default_rng(0)
data = rng.standard_normal((20_000, 32)).astype(np.float32)
words = data.view(np.uint32)
ref = data.astype(np.float64)

print(f"{'format':>6} {'bound':>9} {'max rel (normals)':>18} {'flushed %':>10} {'SQNR dB':>8}")
for desc in ALL_FORMATS:
    arr = convert_words(words, desc)
    out = dequantize_arrays(arr)
    ek = (arr.codes.astype(np.int64) >> desc.R) & desc.exp_all_ones
    normal = (ek >= 1) & (ek < desc.exp_all_ones) & (ref != 0)
    rel = np.abs(out - ref)[normal] / np.abs(ref)[normal]
    max_rel = rel.max() if rel.size else float("nan")
    flushed = 100.0 * np.mean((out == 0) & (ref != 0))
    sqnr = 10 * np.log10(np.sum(ref ** 2) / np.sum((out - ref) ** 2))
    print(f"{desc.name:>6} {2.0 ** (-desc.R - 1):>9.5f} {max_rel:>18.5f} {flushed:>10.2f} {sqnr:>8.2f}")

# the bound only covers normal codes; subnormal and flushed elements are
# where most of the error in the narrow formats comes from
