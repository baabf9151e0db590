"""
Seeded random streams
PCG64 generators keyed by (seed, labels) so every sampling site draws from its own
reproducible sub-stream, independent of worker count and call order.
"""

import hashlib
import secrets
from typing import Union

import numpy as np

from core.errors import ParameterError

SEED_MASK = (1 << 64) - 1


def label_key(label: Union[str, int]) -> int:
    """Stable 64-bit integer for a stream label"""
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *labels: Union[str, int]) -> np.random.Generator:
    """
    Create the generator for one labelled sub-stream

    Args:
        seed: 64-bit root seed
        labels: path of labels identifying the sampling site

    Returns:
        numpy Generator backed by PCG64
    """
    sequence = np.random.SeedSequence(
        entropy=int(seed) & SEED_MASK,
        spawn_key=tuple(label_key(label) for label in labels),
    )
    return np.random.Generator(np.random.PCG64(sequence))


def resolve_seed(value: Union[str, int]) -> int:
    """Parse a CLI seed; "os" draws fresh entropy"""
    if isinstance(value, int):
        return value & SEED_MASK
    if value.strip().lower() == "os":
        return secrets.randbits(64)
    try:
        return int(value, 0) & SEED_MASK
    except ValueError:
        raise ParameterError(f"invalid seed {value!r}; use an integer or 'os'")
