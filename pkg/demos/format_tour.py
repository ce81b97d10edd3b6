# One block of ramp values through every format: scale, codes and round-trip error.

import numpy as np

from mxconv.core import ALL_FORMATS
from mxconv.dequant import dequantize_arrays
from mxconv.quant import convert_words

values = np.linspace(-3.0, 5.0, 32, dtype=np.float32)
words = values.view(np.uint32).reshape(1, 32)
print("input:", np.array2string(values[:8], precision=3), "...")

for desc in ALL_FORMATS:
    arr = convert_words(words, desc)
    back = dequantize_arrays(arr)[0]
    err = np.abs(back - values)
    print(f"\n{desc.name} (K={desc.K}, R={desc.R}) X={int(arr.x[0])}")
    print("  decoded:", np.array2string(back[:8], precision=3), "...")
    print(f"  max abs error {err.max():.4g}, flushed to zero {int(((back == 0) & (values != 0)).sum())}")

# INT8 keeps only elements sharing the winning exponent, and ek=0 reads as
# subnormal, so most of its block collapses
