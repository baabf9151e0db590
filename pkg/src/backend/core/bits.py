"""
Bit-vector helpers
States are Python ints internally (bit i = wire i, i.e. x_{i+1});
callers may pass strings written x1-first, 0/1 sequences or numpy arrays.
"""

from typing import Sequence, Union

import numpy as np

from core.errors import DimensionError

BitsLike = Union[str, Sequence[int], np.ndarray, int]

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1


def word_count(nbits: int) -> int:
    """Number of 64-bit words needed for nbits (at least one)"""
    return max(1, -(-nbits // WORD_BITS))


def as_int(bits: BitsLike, length: int, what: str = "bit vector") -> int:
    """
    Convert a bit vector to its integer form and check its length

    Args:
        bits: "110"-style string (x1 first), 0/1 sequence, numpy array, or int
        length: expected number of bits
        what: name used in the error message

    Returns:
        Integer with bit i holding position i
    """
    if isinstance(bits, (int, np.integer)) and not isinstance(bits, bool):
        value = int(bits)
        if value < 0 or value >> length:
            raise DimensionError(f"{what} does not fit in {length} bits")
        return value

    if isinstance(bits, str):
        digits = bits.strip()
        if any(ch not in "01" for ch in digits):
            raise ValueError(f"{what} must contain only 0/1 characters")
        seq = [int(ch) for ch in digits]
    else:
        seq = [int(b) for b in np.asarray(bits).ravel()]

    if len(seq) != length:
        raise DimensionError(f"{what} has length {len(seq)}, expected {length}")

    value = 0
    for i, b in enumerate(seq):
        if b not in (0, 1):
            raise ValueError(f"{what} entries must be 0 or 1")
        value |= b << i
    return value


def to_array(value: int, length: int) -> np.ndarray:
    """Unpack an int into a uint8 0/1 array of the given length"""
    return np.array([(value >> i) & 1 for i in range(length)], dtype=np.uint8)


def to_string(value: int, length: int) -> str:
    """Render an int as a x1-first bit string"""
    return "".join(str((value >> i) & 1) for i in range(length))


def from_array(arr: np.ndarray) -> int:
    """Pack a 1-D 0/1 array into an int"""
    value = 0
    for i, b in enumerate(np.asarray(arr, dtype=np.uint8).tolist()):
        value |= (b & 1) << i
    return value


def mask_to_words(mask: int, nwords: int) -> list:
    """Split a mask into little-endian 64-bit words"""
    return [(mask >> (WORD_BITS * i)) & WORD_MASK for i in range(nwords)]


def words_to_mask(words: Sequence[int]) -> int:
    """Inverse of mask_to_words"""
    mask = 0
    for i, word in enumerate(words):
        mask |= int(word) << (WORD_BITS * i)
    return mask


def bit_matrix_to_words(bits: np.ndarray) -> np.ndarray:
    """
    Pack a (B, n) 0/1 matrix into (B, nwords) uint64 words, LSB first

    Args:
        bits: uint8 matrix, one state per row

    Returns:
        uint64 matrix suitable for monomial subset tests
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    nwords = word_count(bits.shape[1])
    packed = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((bits.shape[0], nwords * 8), dtype=np.uint8)
    padded[:, :packed.shape[1]] = packed
    return padded.view("<u8").astype(np.uint64)


def ints_to_bit_matrix(values: Sequence[int], length: int) -> np.ndarray:
    """Unpack a batch of ints into a (B, length) uint8 matrix"""
    out = np.zeros((len(values), length), dtype=np.uint8)
    for row, value in enumerate(values):
        out[row] = to_array(value, length)
    return out


def bit_matrix_to_ints(bits: np.ndarray) -> list:
    """Pack each row of a 0/1 matrix into an int"""
    return [from_array(row) for row in np.atleast_2d(bits)]


def pack_bytes(value: int, length: int) -> bytes:
    """Pack bits LSB-first into bytes, zero padded to a byte boundary"""
    return value.to_bytes(-(-length // 8), "little")


def unpack_bytes(data: bytes, length: int) -> int:
    """Inverse of pack_bytes; bits past length must be zero"""
    value = int.from_bytes(data, "little")
    if value >> length:
        raise DimensionError("packed bit vector has bits set past its length")
    return value
