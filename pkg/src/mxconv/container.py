"""The ``MX01`` container: a 16-byte header followed by fixed-size blocks.

Header layout (little endian)::

    0  4  magic b"MX01"
    4  1  format id (0=E5M2 1=E4M3 2=E3M2 3=E2M3 4=E2M1 5=INT8)
    5  1  flags: bit0 sign mode (1=paper), bit1 specials (1=propagate), bit2 packed
    6  1  block size, always 32
    7  1  reserved, zero
    8  8  number of valid elements

Each block is one scale byte then 32 element codes, either one byte per code
or densely bit-packed LSB first.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import BLOCK_SIZE, ConversionPolicy, FormatId, SignMode, SpecialPolicy, format_params
from .quant import BlockArrays, convert_words
from .scale import SCALE_INF, SCALE_NAN, ScaleClass

MAGIC = b"MX01"
HEADER = struct.Struct("<4sBBBBQ")

FLAG_PAPER_SIGNS = 0x01
FLAG_PROPAGATE = 0x02
FLAG_PACKED = 0x04


class MalformedContainer(ValueError):
    pass


@dataclass(frozen=True)
class ContainerHeader:
    format_id: FormatId
    policy: ConversionPolicy
    packed: bool
    element_count: int
    block_size: int = BLOCK_SIZE

    @property
    def flags(self) -> int:
        flags = 0
        if self.policy.paper_signs:
            flags |= FLAG_PAPER_SIGNS
        if self.policy.propagate:
            flags |= FLAG_PROPAGATE
        if self.packed:
            flags |= FLAG_PACKED
        return flags

    @property
    def n_blocks(self) -> int:
        return -(-self.element_count // BLOCK_SIZE)

    @property
    def block_bytes(self) -> int:
        bits = format_params(self.format_id).element_bits
        codes = (BLOCK_SIZE * bits + 7) // 8 if self.packed else BLOCK_SIZE
        return 1 + codes

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, int(self.format_id), self.flags, self.block_size, 0,
                           self.element_count)

    @classmethod
    def unpack(cls, data: bytes) -> "ContainerHeader":
        if len(data) < HEADER.size:
            raise MalformedContainer(f"file shorter than the {HEADER.size}-byte header")
        magic, fmt, flags, block_size, _, count = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedContainer(f"bad magic {magic!r}")
        if fmt > max(FormatId):
            raise MalformedContainer(f"unknown format id {fmt}")
        if flags & ~0x07:
            raise MalformedContainer(f"unknown flag bits {flags:#04x}")
        if block_size != BLOCK_SIZE:
            raise MalformedContainer(f"block size {block_size}, expected {BLOCK_SIZE}")
        policy = ConversionPolicy(
            SignMode.PAPER_EXAMPLE if flags & FLAG_PAPER_SIGNS else SignMode.CORRECTED,
            SpecialPolicy.PROPAGATE if flags & FLAG_PROPAGATE else SpecialPolicy.IGNORE,
        )
        return cls(FormatId(fmt), policy, bool(flags & FLAG_PACKED), count)


def pack_codes(codes: np.ndarray, bits: int) -> np.ndarray:
    """Bit-pack ``(n, 32)`` codes LSB first; returns ``(n, nbytes)`` uint8."""
    codes = np.asarray(codes, dtype=np.uint16)
    bitplane = ((codes[..., None] >> np.arange(bits, dtype=np.uint16)) & 1).astype(np.uint8)
    flat = bitplane.reshape(len(codes), -1)
    return np.packbits(flat, axis=1, bitorder="little")


def unpack_codes(data: np.ndarray, bits: int) -> np.ndarray:
    flat = np.unpackbits(data, axis=1, bitorder="little")[:, :BLOCK_SIZE * bits]
    planes = flat.reshape(len(data), BLOCK_SIZE, bits).astype(np.uint16)
    return (planes << np.arange(bits, dtype=np.uint16)).sum(axis=2).astype(np.uint16)


def pad_words(words: np.ndarray) -> np.ndarray:
    """Reshape a flat word stream into blocks, padding the tail with +0.0."""
    words = np.asarray(words, dtype=np.uint32).ravel()
    n_blocks = -(-len(words) // BLOCK_SIZE)
    padded = np.zeros(n_blocks * BLOCK_SIZE, dtype=np.uint32)
    padded[:len(words)] = words
    return padded.reshape(n_blocks, BLOCK_SIZE)


def encode(words: np.ndarray, format_id: FormatId, policy: ConversionPolicy,
           packed: bool = False) -> bytes:
    words = np.asarray(words, dtype=np.uint32).ravel()
    desc = format_params(format_id)
    header = ContainerHeader(desc.format_id, policy, packed, len(words))
    arrays = convert_words(pad_words(words), desc, policy)
    return header.pack() + serialize_blocks(arrays, packed)


def serialize_blocks(arrays: BlockArrays, packed: bool) -> bytes:
    bits = format_params(arrays.format_id).element_bits
    body = pack_codes(arrays.codes, bits) if packed else arrays.codes.astype(np.uint8)
    return np.concatenate([arrays.x.astype(np.uint8)[:, None], body], axis=1).tobytes()


def decode(data: bytes) -> tuple[ContainerHeader, BlockArrays]:
    header = ContainerHeader.unpack(data)
    desc = format_params(header.format_id)
    expected = HEADER.size + header.n_blocks * header.block_bytes
    if len(data) != expected:
        raise MalformedContainer(f"expected {expected} bytes for {header.element_count} "
                                 f"elements, found {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8, offset=HEADER.size)
    raw = raw.reshape(header.n_blocks, header.block_bytes)
    x = raw[:, 0].copy()
    if header.packed:
        codes = unpack_codes(raw[:, 1:], desc.element_bits)
    else:
        codes = raw[:, 1:].astype(np.uint16)
        if (codes >> desc.element_bits).any():
            raise MalformedContainer("element code wider than the format")
    cls = np.full(len(x), ScaleClass.NORMAL, dtype=np.int8)
    cls[x == SCALE_NAN] = ScaleClass.NAN
    inf = x == SCALE_INF
    if desc.max_normal_scale >= SCALE_INF:
        # a Normal scale can also be 0xFE here; Normal blocks never use the
        # all-ones element exponent, so it tells the two apart
        ek = (codes >> desc.R) & desc.exp_all_ones
        inf &= (ek == desc.exp_all_ones).any(axis=1)
    cls[inf] = ScaleClass.INFINITY
    return header, BlockArrays(x, cls, codes, header.format_id, header.policy)
