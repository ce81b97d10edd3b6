"""Stage 1: the block's largest-magnitude element via a five-level comparison tree."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    BLOCK_SIZE,
    EXP_ALL_ONES,
    ZERO,
    ConversionPolicy,
    DEFAULT_POLICY,
    Fp32Bits,
)

TREE_LEVELS = 5


def comp(x: Fp32Bits, y: Fp32Bits) -> Fp32Bits:
    """One comparator cell.

    Inputs with an all-ones exponent are discarded: both special gives zero,
    one special gives the other input. Otherwise the larger 31-bit magnitude
    wins, ``x`` on a tie.
    """
    x_special = x.exponent == EXP_ALL_ONES
    y_special = y.exponent == EXP_ALL_ONES
    if x_special and y_special:
        return ZERO
    if x_special:
        return y
    if y_special:
        return x
    return y if y.magnitude > x.magnitude else x


def block_max(block: Sequence[Fp32Bits], policy: ConversionPolicy = DEFAULT_POLICY) -> Fp32Bits:
    if len(block) != BLOCK_SIZE:
        raise ValueError(f"a block holds exactly {BLOCK_SIZE} values, got {len(block)}")
    if policy.propagate:
        for v in block:
            if v.exponent == EXP_ALL_ONES:
                return v
    level = list(block)
    for _ in range(TREE_LEVELS):
        level = [comp(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    (winner,) = level
    return winner


def _comp_words(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    mx = x & np.uint32(0x7FFFFFFF)
    my = y & np.uint32(0x7FFFFFFF)
    xs = (mx >> np.uint32(23)) == EXP_ALL_ONES
    ys = (my >> np.uint32(23)) == EXP_ALL_ONES
    out = np.where(my > mx, y, x)
    out = np.where(ys, x, out)
    out = np.where(xs, y, out)
    return np.where(xs & ys, np.uint32(0), out)


def block_max_words(words: np.ndarray, policy: ConversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Vectorised :func:`block_max` over an ``(n, 32)`` uint32 array of words."""
    words = np.asarray(words, dtype=np.uint32)
    if words.ndim != 2 or words.shape[1] != BLOCK_SIZE:
        raise ValueError(f"expected shape (n, {BLOCK_SIZE}), got {words.shape}")
    level = words
    for _ in range(TREE_LEVELS):
        level = _comp_words(level[:, 0::2], level[:, 1::2])
    winner = level[:, 0]
    if policy.propagate:
        special = ((words >> np.uint32(23)) & np.uint32(0xFF)) == EXP_ALL_ONES
        first = np.argmax(special, axis=1)
        has = special.any(axis=1)
        winner = np.where(has, words[np.arange(len(words)), first], winner)
    return winner
