"""
Binary artefact formats
Header: magic "EHE1", kind byte, version u16, params k, w, n, v, e as u32 and the
payload length as u64, all little endian. Bit vectors are packed LSB-first.
"""

import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from core.anf import Anf, PolySet
from core.bits import mask_to_words, pack_bytes, unpack_bytes, word_count, words_to_mask
from core.cryptoval import CryptovalPrivateKey, EncryptedProgram, Variant
from core.errors import (
    BadMagicError,
    DimensionError,
    FormatError,
    KindMismatchError,
    TruncatedDataError,
    VersionMismatchError,
)
from core.gates import Circuit, Gate
from core.ime import Ciphertext
from core.keygen import ImePrivateKey, ImePublicKey, InitialSet

logger = logging.getLogger(__name__)

MAGIC = b"EHE1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sBH5IQ")


class ArtifactKind(IntEnum):
    PUBKEY = 1
    PRIVKEY = 2
    CIPHERTEXT = 3
    CIRCUIT = 4
    PROGRAM = 5
    CVKEY = 6


@dataclass(frozen=True)
class FileHeader:
    kind: ArtifactKind
    k: int = 0
    w: int = 0
    n: int = 0
    v: int = 0
    e: int = 0
    payload_length: int = 0
    version: int = FORMAT_VERSION

    def pack(self) -> bytes:
        return HEADER.pack(
            MAGIC, int(self.kind), self.version, self.k, self.w, self.n, self.v, self.e, self.payload_length
        )

    @classmethod
    def unpack(cls, data: bytes) -> "FileHeader":
        prefix = data[:len(MAGIC)]
        if prefix != MAGIC[:len(prefix)]:
            raise BadMagicError(f"bad magic {prefix!r}, expected {MAGIC!r}")
        if len(data) < HEADER.size:
            raise TruncatedDataError(f"header needs {HEADER.size} bytes, got {len(data)}")
        magic, kind, version, k, w, n, v, e, length = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"format version {version} is not supported (expected {FORMAT_VERSION})")
        try:
            kind = ArtifactKind(kind)
        except ValueError:
            raise FormatError(f"unknown artefact kind {kind}")
        return cls(kind=kind, k=k, w=w, n=n, v=v, e=e, payload_length=length, version=version)


Artifact = Union[ImePublicKey, ImePrivateKey, Ciphertext, List[Ciphertext], Circuit, EncryptedProgram, CryptovalPrivateKey]


# ============================================================================
# PRIMITIVE WRITERS / READERS
# ============================================================================

class _Writer:
    def __init__(self):
        self.buffer = bytearray()

    def u8(self, value: int) -> None:
        self.buffer += struct.pack("<B", value)

    def u32(self, value: int) -> None:
        self.buffer += struct.pack("<I", value)

    def u64(self, value: int) -> None:
        self.buffer += struct.pack("<Q", value)

    def words(self, mask: int, nwords: int) -> None:
        self.buffer += struct.pack(f"<{nwords}Q", *mask_to_words(mask, nwords))

    def text(self, value: str) -> None:
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self.buffer += raw

    def raw(self, data: bytes) -> None:
        self.buffer += data

    def anf(self, p: Anf) -> None:
        nwords = word_count(p.nvars)
        monomials = p.sorted_monomials()
        self.u32(len(monomials))
        for mask in monomials:
            self.words(mask, nwords)

    def polyset(self, polys: PolySet) -> None:
        self.u32(len(polys))
        self.u32(polys.nvars)
        for p in polys:
            self.anf(p)

    def circuit(self, c: Circuit) -> None:
        nwords = word_count(c.width)
        self.u32(c.width)
        self.u32(len(c))
        for gate in c.gates:
            self.u32(gate.target)
            self.words(gate.controls, nwords)
            self.words(gate.polarity, nwords)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise TruncatedDataError(f"payload ends at byte {len(self.data)}, needed {end}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def words(self, nwords: int) -> int:
        return words_to_mask(struct.unpack(f"<{nwords}Q", self.take(8 * nwords)))

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def anf(self, nvars: int) -> Anf:
        nwords = word_count(nvars)
        count = self.u32()
        return Anf(nvars, [self.words(nwords) for _ in range(count)])

    def polyset(self) -> PolySet:
        count = self.u32()
        nvars = self.u32()
        return PolySet([self.anf(nvars) for _ in range(count)], nvars)

    def circuit(self) -> Circuit:
        width = self.u32()
        count = self.u32()
        nwords = word_count(width)
        gates = []
        for _ in range(count):
            target = self.u32()
            controls = self.words(nwords)
            polarity = self.words(nwords)
            gates.append(Gate(target, controls, polarity))
        return Circuit(width, tuple(gates))

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(f"{len(self.data) - self.offset} trailing payload bytes")


# ============================================================================
# ARTEFACT PAYLOADS
# ============================================================================

def _encode(value: Artifact) -> Tuple[FileHeader, bytes]:
    out = _Writer()
    if isinstance(value, ImePublicKey):
        out.u32(value.degree)
        out.polyset(value.polys)
        header = FileHeader(ArtifactKind.PUBKEY, k=value.k, w=value.w, v=value.nvars)
    elif isinstance(value, ImePrivateKey):
        out.u64(value.seed)
        out.text(value.rng_version)
        out.circuit(value.circuit)
        out.u32(len(value.initial.terms))
        for term in value.initial.terms:
            for index in term:
                out.u32(index)
        out.u32(len(value.block_spans))
        for start, end in value.block_spans:
            out.u32(start)
            out.u32(end)
        header = FileHeader(ArtifactKind.PRIVKEY, k=value.k, w=value.w, v=value.nvars)
    elif isinstance(value, (Ciphertext, list, tuple)):
        blocks = [value] if isinstance(value, Ciphertext) else list(value)
        if not blocks:
            raise DimensionError("no ciphertext blocks to write")
        length = blocks[0].length
        if any(block.length != length for block in blocks):
            raise DimensionError("ciphertext blocks differ in length")
        out.u32(len(blocks))
        for block in blocks:
            out.raw(pack_bytes(block.bits, length))
        header = FileHeader(ArtifactKind.CIPHERTEXT, w=length, e=len(blocks))
    elif isinstance(value, Circuit):
        out.circuit(value)
        header = FileHeader(ArtifactKind.CIRCUIT, n=value.width)
    elif isinstance(value, EncryptedProgram):
        out.u32(len(value.output_map))
        for wire in value.output_map:
            out.u32(wire)
        out.text(value.blindness_class)
        for section in value.sections:
            out.polyset(section)
        header = FileHeader(ArtifactKind.PROGRAM, k=value.k, w=value.w, n=value.n, v=value.n, e=value.e)
    elif isinstance(value, CryptovalPrivateKey):
        out.u8(0 if value.variant is Variant.TWO_KEY else 1)
        out.circuit(value.r_cv)
        out.circuit(value.r_en)
        header = FileHeader(ArtifactKind.CVKEY, k=value.k, w=value.w, n=value.n)
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")
    return header, bytes(out.buffer)


def _decode(header: FileHeader, payload: bytes) -> Artifact:
    data = _Reader(payload)
    kind = header.kind
    if kind is ArtifactKind.PUBKEY:
        degree = data.u32()
        polys = data.polyset()
        value = ImePublicKey(k=header.k, w=header.w, nvars=header.v, degree=degree, polys=polys)
    elif kind is ArtifactKind.PRIVKEY:
        seed = data.u64()
        version = data.text()
        circuit = data.circuit()
        terms = tuple((data.u32(), data.u32(), data.u32()) for _ in range(data.u32()))
        spans = tuple((data.u32(), data.u32()) for _ in range(data.u32()))
        initial = InitialSet(nvars=header.v, k=header.k, w=header.w, terms=terms)
        value = ImePrivateKey(
            k=header.k, w=header.w, nvars=header.v, circuit=circuit, initial=initial,
            block_spans=spans, seed=seed, rng_version=version,
        )
    elif kind is ArtifactKind.CIPHERTEXT:
        count = data.u32()
        size = -(-header.w // 8)
        value = [Ciphertext(unpack_bytes(data.take(size), header.w), header.w) for _ in range(count)]
    elif kind is ArtifactKind.CIRCUIT:
        value = data.circuit()
    elif kind is ArtifactKind.PROGRAM:
        output_map = tuple(data.u32() for _ in range(data.u32()))
        blindness = data.text()
        sections = tuple(data.polyset() for _ in range(header.e))
        value = EncryptedProgram(
            n=header.n, w=header.w, k=header.k, sections=sections,
            output_map=output_map, blindness_class=blindness,
        )
    else:
        variant = Variant.TWO_KEY if data.u8() == 0 else Variant.SAME_KEY
        r_cv = data.circuit()
        r_en = data.circuit()
        value = CryptovalPrivateKey(n=header.n, w=header.w, k=header.k, r_cv=r_cv, r_en=r_en, variant=variant)
    data.finish()
    return value


def serialize(value: Artifact) -> bytes:
    """Header plus payload bytes for any artefact"""
    header, payload = _encode(value)
    header = FileHeader(
        kind=header.kind, k=header.k, w=header.w, n=header.n, v=header.v, e=header.e,
        payload_length=len(payload),
    )
    return header.pack() + payload


def read_header(data: bytes) -> FileHeader:
    return FileHeader.unpack(data)


def deserialize(data: bytes, expected: Union[ArtifactKind, Sequence[ArtifactKind], None] = None) -> Artifact:
    """
    Parse an artefact

    Args:
        data: file bytes
        expected: kind (or kinds) the caller accepts

    Returns:
        The decoded value (ciphertext files decode to a list of blocks)
    """
    header = FileHeader.unpack(data)
    if expected is not None:
        allowed = (expected,) if isinstance(expected, ArtifactKind) else tuple(expected)
        if header.kind not in allowed:
            raise KindMismatchError(
                f"file holds a {header.kind.name.lower()}, expected {'/'.join(k.name.lower() for k in allowed)}"
            )
    end = HEADER.size + header.payload_length
    if len(data) < end:
        raise TruncatedDataError(f"payload declares {header.payload_length} bytes, file has {len(data) - HEADER.size}")
    if len(data) > end:
        raise FormatError(f"{len(data) - end} bytes after the declared payload")
    try:
        return _decode(header, data[HEADER.size:end])
    except (DimensionError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"corrupt {header.kind.name.lower()} payload: {e}")


def save(value: Artifact, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = serialize(value)
    path.write_bytes(data)
    logger.info(f"Wrote {type(value).__name__} ({len(data)} bytes) to {path}")
    return path


def load(path: Union[str, Path], expected: Union[ArtifactKind, Sequence[ArtifactKind], None] = None) -> Artifact:
    path = Path(path)
    return deserialize(path.read_bytes(), expected)
