"""
Invertible Multivariate Encryption
Ciphertext = public polynomial set evaluated at (message || padding);
decryption runs the inverse of the private encryption circuit on the ciphertext.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from config.settings import settings
from core.bits import BitsLike, as_int, bit_matrix_to_ints, ints_to_bit_matrix, to_string
from core.errors import DimensionError, UnsupportedOperationError
from core.gates import Circuit, run_state
from core.keygen import ImePrivateKey, ImePublicKey
from core.randomness import stream

logger = logging.getLogger(__name__)

LENGTH_PREFIX_BITS = 64


class PaddingMode(str, Enum):
    ZEROS = "zeros"
    RANDOM = "random"


@dataclass(frozen=True)
class Plaintext:
    bits: int
    length: int

    def __str__(self) -> str:
        return to_string(self.bits, self.length)


@dataclass(frozen=True)
class Ciphertext:
    bits: int
    length: int

    def __str__(self) -> str:
        return to_string(self.bits, self.length)


MessageLike = Union[Plaintext, BitsLike]


def _message_int(pk_k: int, m: MessageLike) -> int:
    if isinstance(m, Plaintext):
        if m.length != pk_k:
            raise DimensionError(f"plaintext has {m.length} bits, key expects k={pk_k}")
        return m.bits
    return as_int(m, pk_k, "plaintext")


def padding_bits(pk: ImePublicKey, mode: PaddingMode, seed: int = 0, block: int = 0) -> int:
    """Filler for wires k..v-1: zeros, or a labelled random draw per block"""
    count = pk.nvars - pk.k
    if count <= 0 or PaddingMode(mode) is PaddingMode.ZEROS:
        return 0
    draws = stream(seed, "padding", block).integers(0, 2, size=count)
    value = 0
    for i, b in enumerate(draws.tolist()):
        value |= int(b) << i
    return value


def encrypt(
    pk: ImePublicKey,
    m: MessageLike,
    padding: PaddingMode = PaddingMode.ZEROS,
    seed: int = 0,
    block: int = 0,
) -> Ciphertext:
    """
    Encrypt one k-bit block

    Args:
        pk: public key
        m: plaintext of k bits
        padding: filler for the w - k extra input wires (v = w keys)
        seed: root seed of the random padding stream
        block: block index used as the padding stream label

    Returns:
        w-bit ciphertext
    """
    message = _message_int(pk.k, m)
    point = message | (padding_bits(pk, padding, seed, block) << pk.k)
    return Ciphertext(pk.polys.evaluate(point), pk.w)


def encrypt_many(
    pk: ImePublicKey,
    messages: np.ndarray,
    padding: PaddingMode = PaddingMode.ZEROS,
    seed: int = 0,
    first_block: int = 0,
) -> np.ndarray:
    """
    Vectorised encryption of a batch of blocks

    Args:
        pk: public key
        messages: (B, k) 0/1 matrix
        padding: padding mode
        seed: padding stream seed
        first_block: label of the first row's padding stream

    Returns:
        (B, w) 0/1 matrix of ciphertexts
    """
    messages = np.atleast_2d(np.asarray(messages, dtype=np.uint8))
    if messages.shape[1] != pk.k:
        raise DimensionError(f"messages have {messages.shape[1]} bits, key expects k={pk.k}")
    points = np.zeros((messages.shape[0], pk.nvars), dtype=np.uint8)
    points[:, :pk.k] = messages
    if pk.nvars > pk.k and PaddingMode(padding) is PaddingMode.RANDOM:
        pads = [padding_bits(pk, padding, seed, first_block + row) for row in range(messages.shape[0])]
        points[:, pk.k:] = ints_to_bit_matrix(pads, pk.nvars - pk.k)
    return pk.polys.evaluate_many(points)


def _decryption_circuit(sk: ImePrivateKey) -> Circuit:
    if not sk.decryptable:
        raise UnsupportedOperationError(
            "keys over k < w variables are encrypt-only; verify ciphertexts by re-encryption"
        )
    return sk.encryption_circuit().inverse()


def decrypt(sk: ImePrivateKey, c: Union[Ciphertext, BitsLike]) -> Tuple[Plaintext, int]:
    """
    Decrypt one block exactly

    Args:
        sk: private key (v = w)
        c: w-bit ciphertext

    Returns:
        Tuple of (plaintext, padding bits as an int)
    """
    if isinstance(c, Ciphertext):
        if c.length != sk.w:
            raise DimensionError(f"ciphertext has {c.length} bits, key expects w={sk.w}")
        value = c.bits
    else:
        value = as_int(c, sk.w, "ciphertext")
    state = run_state(_decryption_circuit(sk), value)
    mask = (1 << sk.k) - 1
    return Plaintext(state & mask, sk.k), state >> sk.k


def decrypt_many(sk: ImePrivateKey, ciphertexts: np.ndarray) -> np.ndarray:
    """Decrypt a (B, w) batch; returns the (B, k) plaintext matrix"""
    ciphertexts = np.atleast_2d(np.asarray(ciphertexts, dtype=np.uint8))
    if ciphertexts.shape[1] != sk.w:
        raise DimensionError(f"ciphertexts have {ciphertexts.shape[1]} bits, key expects w={sk.w}")
    circuit = _decryption_circuit(sk)
    states = [run_state(circuit, value) for value in bit_matrix_to_ints(ciphertexts)]
    return ints_to_bit_matrix(states, sk.w)[:, :sk.k]


def verify_by_reencryption(pk: ImePublicKey, m: MessageLike, c: Ciphertext) -> bool:
    """Check a claimed plaintext against a ciphertext (zero padding)"""
    return encrypt(pk, m).bits == c.bits


# ============================================================================
# BLOCK MODE
# ============================================================================

def _bytes_to_bits(data: bytes) -> Tuple[int, int]:
    return int.from_bytes(data, "little"), 8 * len(data)


def split_blocks(data: bytes, k: int) -> List[int]:
    """
    Frame a byte string as k-bit blocks: a 64-bit length prefix, the data bits
    LSB-first, zero fill up to a multiple of k
    """
    value, length = _bytes_to_bits(data)
    stream_bits = length | (value << LENGTH_PREFIX_BITS)
    total = LENGTH_PREFIX_BITS + length
    count = -(-total // k)
    mask = (1 << k) - 1
    return [(stream_bits >> (i * k)) & mask for i in range(count)]


def join_blocks(blocks: Sequence[int], k: int) -> bytes:
    """Inverse of split_blocks"""
    stream_bits = 0
    for i, block in enumerate(blocks):
        stream_bits |= int(block) << (i * k)
    length = stream_bits & ((1 << LENGTH_PREFIX_BITS) - 1)
    if length > len(blocks) * k - LENGTH_PREFIX_BITS:
        raise DimensionError("length prefix exceeds the decrypted stream")
    value = (stream_bits >> LENGTH_PREFIX_BITS) & ((1 << length) - 1)
    return value.to_bytes(length // 8, "little")


def encrypt_message(
    pk: ImePublicKey,
    data: bytes,
    padding: PaddingMode = PaddingMode.ZEROS,
    seed: int = 0,
) -> List[Ciphertext]:
    """Encrypt an arbitrary byte string block by block with fresh padding per block"""
    blocks = split_blocks(data, pk.k)
    matrix = encrypt_many(pk, ints_to_bit_matrix(blocks, pk.k), padding, seed)
    logger.info(f"Encrypted {len(data)} bytes into {len(blocks)} blocks of {pk.w} bits")
    return [Ciphertext(value, pk.w) for value in bit_matrix_to_ints(matrix)]


def decrypt_message(sk: ImePrivateKey, ciphertexts: Sequence[Ciphertext], jobs: int = 1) -> bytes:
    """Decrypt a block sequence produced by encrypt_message"""
    if jobs > 1 and len(ciphertexts) > 1:
        results = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
            delayed(decrypt)(sk, c) for c in ciphertexts
        )
    else:
        results = [decrypt(sk, c) for c in ciphertexts]
    return join_blocks([plain.bits for plain, _ in results], sk.k)
