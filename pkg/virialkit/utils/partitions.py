"""Index templates for the combinatorial sums.

All templates are expressed over positions 0..n-1 and depend only on n, so
they are built once and shared by every tensor that needs them.
"""
from __future__ import annotations

from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, product
from math import comb, factorial
from typing import Tuple

Block = Tuple[int, ...]
Partition = Tuple[Block, ...]


@lru_cache(maxsize=None)
def set_partitions(n: int) -> Tuple[Partition, ...]:
    """All set partitions of range(n); blocks and their entries ascending."""
    if n == 0:
        return ((),)
    out = []
    for part in set_partitions(n - 1):
        # put n-1 into an existing block or open a new one
        for i in range(len(part)):
            blocks = list(part)
            blocks[i] = blocks[i] + (n - 1,)
            out.append(tuple(blocks))
        out.append(part + ((n - 1,),))
    return tuple(out)


@lru_cache(maxsize=None)
def ordered_assignments(n: int) -> Tuple[Tuple[Block, Tuple[Block, ...]], ...]:
    """Pairs (J, V) with J a non-empty subset of range(n) and V an ordered
    partition of the complement indexed by J, empty blocks allowed.

    V[i] is the block attached to J[i].
    """
    out = []
    positions = tuple(range(n))
    for m in range(1, n + 1):
        for J in combinations(positions, m):
            rest = tuple(p for p in positions if p not in J)
            for targets in product(range(m), repeat=len(rest)):
                blocks = [[] for _ in range(m)]
                for p, t in zip(rest, targets):
                    blocks[t].append(p)
                out.append((J, tuple(tuple(b) for b in blocks)))
    return tuple(out)


@lru_cache(maxsize=None)
def sub_multisets(key: Tuple[int, ...]) -> Tuple[Tuple[Tuple[int, ...], Tuple[int, ...], int], ...]:
    """Distinct splits of a sorted multi-index into (part, rest) with the
    number of position subsets that produce each split."""
    counts = sorted(Counter(key).items())
    out = []
    for picks in product(*(range(m + 1) for _, m in counts)):
        part, rest, weight = [], [], 1
        for (species, m), j in zip(counts, picks):
            part.extend([species] * j)
            rest.extend([species] * (m - j))
            weight *= comb(m, j)
        out.append((tuple(part), tuple(rest), weight))
    return tuple(out)


def pick(key: Tuple[int, ...], positions: Block) -> Tuple[int, ...]:
    """Sub-multi-index at the given positions (stays sorted)."""
    return tuple(key[p] for p in positions)


@lru_cache(maxsize=None)
def inverse_multiplicity(key: Tuple[int, ...]) -> Fraction:
    """1 / prod(m_k!) for the multiplicities m_k of a multi-index."""
    denom = 1
    for m in Counter(key).values():
        denom *= factorial(m)
    return Fraction(1, denom)


def bell(n: int) -> int:
    return len(set_partitions(n))


@lru_cache(maxsize=None)
def multi_indices(size: int, n: int) -> Tuple[Tuple[int, ...], ...]:
    """Canonical (sorted) multi-indices of length n over range(size)."""
    return tuple(combinations_with_replacement(range(size), n))


@lru_cache(maxsize=None)
def anchored_splits(key: Tuple[int, ...]) -> Tuple[Tuple[Tuple[int, ...], Tuple[int, ...], int], ...]:
    """Splits (part, rest, count) of a non-empty key where part always holds
    position 0; count is the number of position subsets giving the split."""
    head, tail = key[:1], key[1:]
    return tuple((head + part, rest, w) for part, rest, w in sub_multisets(tail))
