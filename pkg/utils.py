import hashlib
from typing import Iterator, List

import numpy as np

from errors import InvalidParameter

SEED_MAX = 2**64 - 1


def check_seed(seed) -> int:
    """
    Validate a seed and return it as a plain int.

    Args:
        seed: Candidate 64-bit unsigned seed

    Returns:
        int: The seed

    Raises:
        InvalidParameter: If the seed is not an integer in [0, 2**64)
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidParameter(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if seed < 0 or seed > SEED_MAX:
        raise InvalidParameter(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def make_rng(seed) -> np.random.Generator:
    """PCG64 stream for a seed. All determinism claims are relative to this generator."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def derive_seed(base_seed: int, index: int) -> int:
    """Stable child seed for cell ``index`` of a run seeded with ``base_seed``."""
    digest = hashlib.sha256(f"{check_seed(base_seed)}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def iter_bits(bits: int) -> Iterator[int]:
    """Yield set bit positions in increasing order."""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def lowest_bit(bits: int) -> int:
    return (bits & -bits).bit_length() - 1


def mask_to_bits(mask: np.ndarray) -> int:
    """Boolean vector -> int bitset (bit i set iff mask[i])."""
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def bits_to_mask(bits: int, n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    raw = np.frombuffer(bits.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def parse_int_list(text: str) -> List[int]:
    """Parse "1,2,3" (or an empty string) into a list of ints."""
    text = (text or "").strip()
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated integers, got {text!r}")


def parse_float_list(text: str) -> List[float]:
    text = (text or "").strip()
    if not text:
        return []
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated numbers, got {text!r}")
