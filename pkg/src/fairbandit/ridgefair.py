"""Fair selection rules over chained confidence intervals.

``pick_exact`` fills a fixed capacity by taking whole chains in order and
drawing the remainder uniformly from the first chain that does not fit.
``pick_at_most`` takes every chain whose best upper bound is positive.
Both return the realised selection together with the analytic selection
rule, so marginals can be audited without resampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chaining import ChainPartition, partition_bounds
from .estimator import DesignState


@dataclass(frozen=True)
class SelectionDistribution:
    """Chains listed with the number of members drawn from each.

    ``take == len(chain)`` means the whole chain is selected; a smaller
    ``take`` means ``take`` members drawn uniformly without replacement.
    Indices absent from every listed chain are never selected.
    """

    entries: tuple[tuple[tuple[int, ...], int], ...]

    def marginal(self, index) -> float:
        for chain, take in self.entries:
            if index in chain:
                return take / len(chain)
        return 0.0

    def marginals(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        for chain, take in self.entries:
            out[list(chain)] = take / len(chain)
        return out

    @property
    def deterministic(self) -> bool:
        return all(take in (0, len(chain)) for chain, take in self.entries)

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        chosen = []
        for chain, take in self.entries:
            if take == len(chain):
                chosen.extend(chain)
            elif take > 0:
                picks = rng.choice(len(chain), size=take, replace=False)
                chosen.extend(chain[i] for i in picks)
        return tuple(sorted(chosen))


@dataclass(frozen=True)
class RidgeFairVariant:
    """``exactly(m)`` selects m contexts per round; ``at_most()`` any number."""

    m: int | None = None

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ValueError(f"exact selection size must be >= 1, got {self.m}")

    @property
    def exact(self) -> bool:
        return self.m is not None

    def __str__(self):
        return f"exactly({self.m})" if self.exact else "at-most-k"


def exactly(m: int) -> RidgeFairVariant:
    return RidgeFairVariant(m)


def at_most() -> RidgeFairVariant:
    return RidgeFairVariant(None)


def parse_variant(text: str) -> RidgeFairVariant:
    text = text.strip().lower()
    if text in ("at-most-k", "at_most", "at-most", "k"):
        return at_most()
    if text.startswith("exactly(") and text.endswith(")"):
        text = text[len("exactly("):-1]
    return exactly(int(text))


def pick_exact(partition: ChainPartition, m: int, rng, permissive: bool = False):
    total = sum(len(c) for c in partition.chains)
    if m > total:
        if not permissive:
            raise ValueError(f"cannot select {m} of {total} available contexts")
        m = total
    entries = []
    room = m
    for chain in partition.chains:
        if room == 0:
            break
        take = min(len(chain), room)
        entries.append((chain, take))
        room -= take
    dist = SelectionDistribution(tuple(entries))
    return dist.sample(rng), dist


def pick_at_most(partition: ChainPartition, ucbs=None):
    """Select every chain whose highest upper bound is positive.

    ``ucbs`` maps index to upper bound; when omitted the chain tops stored in
    the partition are used.
    """
    entries = []
    for chain, top in zip(partition.chains, partition.tops):
        if ucbs is not None:
            top = max(ucbs[i] for i in chain)
        if top > 0:
            entries.append((chain, len(chain)))
    dist = SelectionDistribution(tuple(entries))
    return tuple(sorted(i for chain, _ in entries for i in chain)), dist


def marginal_probability(dist: SelectionDistribution, index) -> float:
    return dist.marginal(index)


class RoundResult(NamedTuple):
    selected: tuple[int, ...]
    dist: SelectionDistribution
    lower: np.ndarray
    upper: np.ndarray
    partition: ChainPartition


def ridgefair_round(
    state: DesignState,
    contexts,
    delta: float,
    variant: RidgeFairVariant,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
    permissive: bool = False,
) -> RoundResult:
    """One selection round. The caller feeds rewards of ``selected`` back
    into ``state``; nothing is updated here."""
    X = np.atleast_2d(np.asarray(contexts, dtype=float))
    if len(X) == 0:
        raise ValueError("empty choice set")
    lower, upper = state.intervals(X, delta, noise_scale)
    partition = partition_bounds(lower, upper)
    if variant.exact:
        selected, dist = pick_exact(partition, variant.m, rng, permissive=permissive)
    else:
        selected, dist = pick_at_most(partition)
    return RoundResult(selected, dist, lower, upper, partition)
