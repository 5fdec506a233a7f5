"""Regret, mistreatment and fairness audits over per-round records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimator import DesignState
from .ridgefair import RidgeFairVariant

UCB_Z = 6.0


@dataclass
class RoundRecord:
    t: int
    rewards: np.ndarray
    marginals: np.ndarray
    selected: tuple[int, ...]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    algorithm: str = ""

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.marginals = np.asarray(self.marginals, dtype=float)
        if np.any(self.marginals < 0) or np.any(self.marginals > 1):
            raise ValueError("marginal probabilities must lie in [0, 1]")
        k = len(self.rewards)
        if any(i < 0 or i >= k for i in self.selected):
            raise ValueError("selected index outside the choice set")


@dataclass
class TrialSummary:
    regret: np.ndarray
    mistreatment: np.ndarray
    population_mistreatment: dict[str, int] = field(default_factory=dict)
    population_counts: dict[str, int] = field(default_factory=dict)
    violations: list[tuple[int, int, int]] = field(default_factory=list)


def optimal_value(rewards, variant: RidgeFairVariant) -> float:
    rewards = np.asarray(rewards, dtype=float)
    if variant.exact:
        m = min(variant.m, len(rewards))
        return float(np.sort(rewards)[::-1][:m].sum())
    return float(rewards[rewards > 0].sum())


def instant_regret(rewards, marginals, variant: RidgeFairVariant) -> float:
    return optimal_value(rewards, variant) - float(np.dot(marginals, rewards))


def pseudo_regret(records: Sequence[RoundRecord], variant: RidgeFairVariant) -> np.ndarray:
    """Cumulative expected regret of the analytic selection rules."""
    per_round = [instant_regret(r.rewards, r.marginals, variant) for r in records]
    return np.cumsum(per_round)


def mistreated(rewards, selected) -> np.ndarray:
    """Mask of unselected contexts that beat some selected context."""
    rewards = np.asarray(rewards, dtype=float)
    chosen = np.zeros(len(rewards), dtype=bool)
    chosen[list(selected)] = True
    if not chosen.any():
        return np.zeros(len(rewards), dtype=bool)
    return ~chosen & (rewards > rewards[chosen].min())


def mistreatment_count(record: RoundRecord) -> int:
    return int(mistreated(record.rewards, record.selected).sum())


def audit_round_fairness(record: RoundRecord, tol: float = 1e-12, tol_reward: float = 0.0):
    """Pairs ``(i, j)`` where ``i`` is at least as good as ``j`` but has a
    smaller selection probability."""
    r, g = record.rewards, record.marginals
    better = r[:, None] >= r[None, :] - tol_reward
    starved = g[:, None] < g[None, :] - tol
    bad = better & starved
    np.fill_diagonal(bad, False)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(bad))]


def round_fair_by_intervals(record: RoundRecord, tol: float = 1e-12) -> bool:
    """The mechanism-level check: unequal marginals only across separated
    intervals, equal marginals only across touching ones."""
    lo, hi, g = record.lower, record.upper, record.marginals
    separated = lo[:, None] > hi[None, :]
    above = g[:, None] > g[None, :] + tol
    if np.any(above & ~separated):
        return False
    linked = ~separated & ~separated.T
    return not np.any(linked & (np.abs(g[:, None] - g[None, :]) > tol))


class UCBBaseline:
    """Ridge UCB for the unconstrained setting: select every context whose
    upper bound ``beta_hat . x + z * ||x||_{V^-1}`` is positive."""

    def __init__(self, d: int, z: float = UCB_Z, gamma: float = 1.0):
        self.z = z
        self.state = DesignState(d, gamma, norm_bound=np.inf)

    def bounds(self, contexts):
        X = np.atleast_2d(np.asarray(contexts, dtype=float))
        center = X @ self.state.estimate()
        width = self.z * np.sqrt(np.einsum("ij,ij->i", X @ self.state.inverse(), X))
        return center - width, center + width

    def select(self, contexts) -> tuple[int, ...]:
        _, upper = self.bounds(contexts)
        return tuple(int(i) for i in np.nonzero(upper > 0)[0])

    def observe(self, contexts, selected, rewards) -> None:
        X = np.atleast_2d(np.asarray(contexts, dtype=float))
        self.state.update_batch(X[list(selected)], rewards)


def ucb_baseline_round(baseline: UCBBaseline, contexts, rng=None) -> tuple[int, ...]:
    return baseline.select(contexts)
