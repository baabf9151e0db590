"""
IME Encryption Tests
Single-block encryption and decryption, batch roundtrips per preset and block mode
"""
import time

import pytest
import numpy as np
from pathlib import Path
import sys

# Add backend to path
sys.path.insert(0, str(Path(__file__).parent.parent / "backend"))

from core.bits import as_int, bit_matrix_to_ints
from core.errors import DimensionError, UnsupportedOperationError
from core.gates import Circuit, cnot, negation, run_state
from core.ime import (
    Ciphertext,
    PaddingMode,
    Plaintext,
    decrypt,
    decrypt_many,
    decrypt_message,
    encrypt,
    encrypt_many,
    encrypt_message,
    join_blocks,
    padding_bits,
    split_blocks,
    verify_by_reencryption,
)
from core.keygen import KeyParams, generate_keypair, keypair_from_mapping, preset_params
from core.randomness import stream

ROUNDTRIP_PRESETS = [(16, 20), (32, 40), (64, 72), (128, 160)]
ROUNDTRIP_MESSAGES = 1000

_KEYS = {}


def preset_keys(k, w):
    if (k, w) not in _KEYS:
        _KEYS[(k, w)] = generate_keypair(preset_params(k, w, seed=k))
    return _KEYS[(k, w)]


@pytest.fixture
def small_keys():
    return generate_keypair(KeyParams(k=8, w=12, seed=21, insecure=True))


@pytest.fixture
def two_wire_keys():
    params = KeyParams(k=2, w=2, insecure=True)
    return keypair_from_mapping(params, Circuit(2, (cnot(0, 1), negation(0))))


# ============================================================================
# SINGLE BLOCK TESTS
# ============================================================================

def test_identity_key_encrypts_to_message():
    params = KeyParams(k=4, w=4, insecure=True)
    public, private = keypair_from_mapping(params, Circuit(4))
    for m in range(16):
        c = encrypt(public, m)
        assert c.bits == m
        assert decrypt(private, c)[0].bits == m


def test_two_wire_example(two_wire_keys):
    public, private = two_wire_keys
    c = encrypt(public, "10")
    assert str(c) == "01"
    plain, padding = decrypt(private, c)
    assert str(plain) == "10"
    assert padding == 0


def test_two_wire_example_exhaustive(two_wire_keys):
    public, private = two_wire_keys
    for m in range(4):
        c = encrypt(public, m)
        assert c.bits == run_state(private.encryption_circuit(), m)
        assert decrypt(private, c)[0].bits == m


def test_zero_plaintext_without_constants(small_keys):
    public, _ = small_keys
    if all(0 not in p.monomials for p in public.polys):
        assert encrypt(public, 0).bits == 0


def test_ciphertext_has_w_bits(small_keys):
    public, _ = small_keys
    c = encrypt(public, "10110011")
    assert c.length == public.w
    assert len(str(c)) == public.w


def test_encrypt_matches_circuit_execution(small_keys):
    public, private = small_keys
    circuit = private.encryption_circuit()
    for m in stream(1, "messages").integers(0, 256, size=50).tolist():
        assert encrypt(public, m).bits == run_state(circuit, m)


def test_plaintext_dimension_mismatch(small_keys):
    public, private = small_keys
    with pytest.raises(DimensionError):
        encrypt(public, "101")
    with pytest.raises(DimensionError):
        encrypt(public, Plaintext(0, 4))
    with pytest.raises(DimensionError):
        decrypt(private, Ciphertext(0, 8))


def test_random_padding_is_recovered(small_keys):
    public, private = small_keys
    for block in range(10):
        c = encrypt(public, 0b10100101, PaddingMode.RANDOM, seed=5, block=block)
        plain, padding = decrypt(private, c)
        assert plain.bits == 0b10100101
        assert padding == padding_bits(public, PaddingMode.RANDOM, seed=5, block=block)


def test_encrypt_only_key_cannot_decrypt():
    public, private = generate_keypair(KeyParams(k=8, w=12, nvars=8, seed=3, insecure=True))
    c = encrypt(public, "11001010")
    with pytest.raises(UnsupportedOperationError):
        decrypt(private, c)
    assert verify_by_reencryption(public, "11001010", c)
    assert not verify_by_reencryption(public, "11001011", c)


# ============================================================================
# PRESET ROUNDTRIP TESTS
# ============================================================================

@pytest.mark.parametrize("k,w", ROUNDTRIP_PRESETS)
@pytest.mark.parametrize("padding", [PaddingMode.ZEROS, PaddingMode.RANDOM])
def test_preset_roundtrip(k, w, padding):
    public, private = preset_keys(k, w)
    messages = stream(k, "roundtrip", padding.value).integers(0, 2, size=(ROUNDTRIP_MESSAGES, k)).astype(np.uint8)
    ciphertexts = encrypt_many(public, messages, padding, seed=17)
    assert ciphertexts.shape == (ROUNDTRIP_MESSAGES, w)
    assert np.array_equal(decrypt_many(private, ciphertexts), messages)


def test_batch_matches_single_encryption(small_keys):
    public, _ = small_keys
    messages = stream(2, "batch").integers(0, 2, size=(20, public.k)).astype(np.uint8)
    batch = bit_matrix_to_ints(encrypt_many(public, messages, PaddingMode.RANDOM, seed=8, first_block=3))
    for row, message in enumerate(messages):
        single = encrypt(public, message, PaddingMode.RANDOM, seed=8, block=3 + row)
        assert batch[row] == single.bits


def test_secure_preset_decryption_is_fast():
    public, private = preset_keys(128, 160)
    c = encrypt(public, stream(0, "fast").integers(0, 2, size=128))
    start = time.perf_counter()
    decrypt(private, c)
    assert time.perf_counter() - start < 1.0


# ============================================================================
# BLOCK MODE TESTS
# ============================================================================

def test_split_and_join_blocks():
    data = b"invertible multivariate"
    for k in (8, 13, 64, 128):
        blocks = split_blocks(data, k)
        assert all(0 <= b < 1 << k for b in blocks)
        assert join_blocks(blocks, k) == data


def test_empty_message_frames_length_only():
    blocks = split_blocks(b"", 16)
    assert blocks == [0, 0, 0, 0]
    assert join_blocks(blocks, 16) == b""


@pytest.mark.parametrize("jobs", [1, 2])
def test_message_roundtrip(small_keys, jobs):
    public, private = small_keys
    data = bytes(range(40))
    ciphertexts = encrypt_message(public, data, PaddingMode.RANDOM, seed=4)
    assert all(c.length == public.w for c in ciphertexts)
    assert decrypt_message(private, ciphertexts, jobs=jobs) == data


def test_blocks_get_fresh_padding(small_keys):
    public, _ = small_keys
    ciphertexts = encrypt_message(public, bytes(8), PaddingMode.RANDOM, seed=4)
    # identical zero blocks encrypt differently under per-block padding
    assert len({c.bits for c in ciphertexts[1:]}) > 1


def test_bit_string_helpers():
    assert as_int("100", 3) == 1
    assert str(Plaintext(1, 3)) == "100"
