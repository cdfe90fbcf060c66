"""Vertex sets as Python int bitmasks (bit i set <=> vertex i in the set)."""
from __future__ import annotations

from typing import Iterable, Iterator


def to_mask(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_set(mask: int) -> frozenset[int]:
    return frozenset(iter_bits(mask))


def popcount(mask: int) -> int:
    return mask.bit_count()


def subsets(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask
