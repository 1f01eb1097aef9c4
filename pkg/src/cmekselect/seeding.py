"""Stable seed derivation so every randomized step is reproducible across
runs, machines, and worker scheduling."""

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(*parts) -> int:
    """Derive a 63-bit seed from a root seed and any number of string/int tags.

    The same parts always yield the same seed; results do not depend on
    Python's hash randomization.
    """
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big") & _MASK
