# Write a small container, read it back, and look at the bytes.

import numpy as np

from mxconv import container
from mxconv.core import ConversionPolicy, FormatId, SpecialPolicy
from mxconv.dequant import dequantize_arrays

values = np.array([1.0, -2.5, 0.375, 1e-3, np.inf, 7.0, -0.0], dtype=np.float32)
words = values.view(np.uint32)

# under Ignore the infinity is skipped by the comparison tree and its own
# code saturates to the largest finite value
for packed in (False, True):
    data = container.encode(words, FormatId.E4M3, ConversionPolicy(), packed=packed)
    print(f"packed={packed}: {len(data)} bytes, header {data[:16].hex(' ')}")
    header, arrays = container.decode(data)
    back = dequantize_arrays(arrays).ravel()[:header.element_count]
    print("  decoded:", back)

# with Propagate the infinity wins the comparison and poisons the block
data = container.encode(words, FormatId.E4M3, ConversionPolicy(special_policy=SpecialPolicy.PROPAGATE))
header, arrays = container.decode(data)
print(f"\npropagate: scale byte {int(arrays.x[0]):#04x}, decoded {dequantize_arrays(arrays).ravel()[:3]} ...")
