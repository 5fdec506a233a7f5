"""Chains of overlapping confidence intervals.

Two intervals are linked when they intersect (closed endpoints, so touching
counts). A chain is a connected component of the linked relation; because
the intervals live on a line, one sweep over the lower bounds finds them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ScoredInterval:
    index: int
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"interval {self.index}: lower {self.lower} > upper {self.upper}")


@dataclass(frozen=True)
class ChainPartition:
    """Chains ordered by their highest upper bound, best first."""

    chains: tuple[tuple[int, ...], ...]
    tops: tuple[float, ...]
    bottoms: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.chains)

    def __iter__(self):
        return iter(self.chains)

    def chain_of(self, index: int) -> tuple[int, ...]:
        for chain in self.chains:
            if index in chain:
                return chain
        raise KeyError(index)


EMPTY_PARTITION = ChainPartition((), (), ())


def linked(a: ScoredInterval, b: ScoredInterval) -> bool:
    return a.lower <= b.upper and b.lower <= a.upper


def partition_bounds(lower, upper, indices: Sequence[int] | None = None) -> ChainPartition:
    """Chain partition straight from arrays of bounds.

    ``indices`` names the intervals; it defaults to ``range(len(lower))``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(lower)
    if n == 0:
        return EMPTY_PARTITION
    if indices is None:
        indices = range(n)
    names = list(indices)
    order = np.lexsort((upper, lower))

    groups = []
    members = [int(order[0])]
    reach = upper[order[0]]
    for pos in order[1:]:
        if lower[pos] <= reach:
            members.append(int(pos))
            reach = max(reach, upper[pos])
        else:
            groups.append(members)
            members = [int(pos)]
            reach = upper[pos]
    groups.append(members)

    chains = []
    for g in groups:
        chain = tuple(sorted(names[i] for i in g))
        chains.append((-max(upper[i] for i in g), chain[0], chain, min(lower[i] for i in g)))
    # highest top first; equal tops (only possible for degenerate inputs) by lowest index
    chains.sort(key=lambda c: (c[0], c[1]))
    return ChainPartition(
        chains=tuple(c[2] for c in chains),
        tops=tuple(float(-c[0]) for c in chains),
        bottoms=tuple(float(c[3]) for c in chains),
    )


def chains(intervals: Sequence[ScoredInterval]) -> ChainPartition:
    if not intervals:
        return EMPTY_PARTITION
    return partition_bounds(
        [iv.lower for iv in intervals],
        [iv.upper for iv in intervals],
        [iv.index for iv in intervals],
    )


def top_chain(partition: ChainPartition) -> tuple[int, ...]:
    if not partition.chains:
        raise ValueError("empty partition has no top chain")
    return partition.chains[0]
