"""Single-trial simulation loops.

Every function here runs one independent trial and returns per-round
series as numpy arrays (cumulative where the name says so). Environment
draws are made up front so that two algorithms fed the same arrays face
identical individuals and identical noise.
"""

from __future__ import annotations

import math

import numpy as np

from .chaining import partition_bounds
from .environments import PopulationModel, PosteriorTracker, gen_disparity_contexts
from .estimator import DesignState
from .fairgap import FairGapParams, GapInstance, approx_fairgap_round, fairgap_round
from .metrics import UCB_Z, UCBBaseline, audit_round_fairness, mistreated, optimal_value, RoundRecord
from .ridgefair import RidgeFairVariant, pick_at_most, pick_exact


def mistreatment_environment(rng: np.random.Generator, T: int, k: int = 10, d: int = 2, R: float = 1.0):
    """``beta`` and contexts from U[-1,1]^d, Gaussian noise per individual."""
    beta = rng.uniform(-1.0, 1.0, d)
    X = rng.uniform(-1.0, 1.0, size=(T, k, d))
    noise = R * rng.standard_normal((T, k))
    return beta, X, noise


def ucb_k_trial(beta, X, noise, z: float = UCB_Z, gamma: float = 1.0) -> dict[str, np.ndarray]:
    T, k, d = X.shape
    ucb = UCBBaseline(d, z=z, gamma=gamma)
    mist = np.zeros(T)
    regret = np.zeros(T)
    for t in range(T):
        Xt = X[t]
        rewards = Xt @ beta
        selected = ucb.select(Xt)
        mist[t] = mistreated(rewards, selected).sum()
        regret[t] = rewards[rewards > 0].sum() - rewards[list(selected)].sum()
        if selected:
            ucb.observe(Xt, selected, rewards[list(selected)] + noise[t, list(selected)])
    return {"cum_mistreatment": np.cumsum(mist), "cum_regret": np.cumsum(regret)}


def ridgefair_trial(
    beta,
    X,
    noise,
    variant: RidgeFairVariant,
    rng: np.random.Generator,
    delta: float = 0.05,
    gamma: float = 1.0,
    noise_scale: float = 1.0,
    audit: bool = True,
) -> dict[str, np.ndarray]:
    """Run a RidgeFair variant over pre-drawn contexts.

    ``X`` must already satisfy the unit-norm bound. Audits compare analytic
    marginals against true rewards each round.
    """
    T, k, d = X.shape
    state = DesignState(d, gamma)
    mist = np.zeros(T)
    regret = np.zeros(T)
    violation = np.zeros(T)
    missed_positive = np.zeros(T)
    for t in range(T):
        Xt = X[t]
        rewards = Xt @ beta
        lower, upper = state.intervals(Xt, delta, noise_scale)
        partition = partition_bounds(lower, upper)
        if variant.exact:
            selected, dist = pick_exact(partition, variant.m, rng)
        else:
            selected, dist = pick_at_most(partition)
        g = dist.marginals(k)
        regret[t] = optimal_value(rewards, variant) - g @ rewards
        mist[t] = mistreated(rewards, selected).sum()
        if audit:
            record = RoundRecord(t + 1, rewards, g, selected)
            violation[t] = bool(audit_round_fairness(record))
            if not variant.exact:
                missed_positive[t] = bool(np.any((rewards > 0) & (g < 1)))
        if selected:
            idx = list(selected)
            state.update_batch(Xt[idx], rewards[idx] + noise[t, idx])
    out = {
        "cum_regret": np.cumsum(regret),
        "cum_mistreatment": np.cumsum(mist),
    }
    if audit:
        out["cum_violation_rounds"] = np.cumsum(violation)
        if not variant.exact:
            out["cum_missed_positive"] = np.cumsum(missed_positive)
    return out


def fairgap_trial(
    instance: GapInstance,
    T: int,
    params: FairGapParams,
    rng: np.random.Generator,
    gamma: float = 1.0,
) -> dict[str, np.ndarray]:
    """Pseudo-regret charges exploration rounds the gap to the centroid."""
    poly = instance.polytope
    state = DesignState(poly.d, gamma, norm_bound=poly.radius)
    play = approx_fairgap_round if params.epsilon > 0 else fairgap_round
    best = instance.best_value
    explore_cost = instance.explore_regret
    regret = np.zeros(T)
    det = np.zeros(T)
    wrong = np.zeros(T)
    first = 0
    observe = lambda x: instance.reward(x, rng)  # noqa: E731
    for t in range(1, T + 1):
        step = play(state, poly, t, params, rng, observe, instance.lam)
        if step.deterministic:
            det[t - 1] = 1
            value = float(step.action @ instance.beta)
            regret[t - 1] = best - value
            wrong[t - 1] = not np.allclose(step.action, instance.optimum)
            if not first:
                first = t
        else:
            regret[t - 1] = explore_cost
    return {
        "cum_regret": np.cumsum(regret),
        "cum_deterministic": np.cumsum(det),
        "cum_wrong_deterministic": np.cumsum(wrong),
        "first_deterministic": np.array([first]),
    }


def disparity_trial(model: PopulationModel, T: int, k: int, rng: np.random.Generator,
                    z: float = UCB_Z, R: float = 1.0) -> dict[str, np.ndarray]:
    """UCB on the two-population context model; cumulative counts per group."""
    beta = np.asarray(model.beta, dtype=float)
    ucb = UCBBaseline(2, z=z)
    counts = np.zeros((T, 4))
    for t in range(T):
        X, major = gen_disparity_contexts(k, model, rng)
        rewards = X @ beta
        selected = ucb.select(X)
        bad = mistreated(rewards, selected)
        counts[t] = (bad[major].sum(), major.sum(), bad[~major].sum(), (~major).sum())
        if selected:
            idx = list(selected)
            ucb.observe(X, selected, rewards[idx] + R * rng.standard_normal(len(idx)))
    cum = counts.cumsum(axis=0)
    return {
        "majority.mistreated": cum[:, 0],
        "majority.count": cum[:, 1],
        "minority.mistreated": cum[:, 2],
        "minority.count": cum[:, 3],
    }


def tracker_trial(eps: float, rng: np.random.Generator, max_rounds: int = 10_000_000) -> int:
    """Play uniformly on [-1,1]^2 until the consistent set first shrinks.

    Returns that round, or ``max_rounds + 1`` if it never does.
    """
    beta2 = rng.uniform(-eps, eps)
    tracker = PosteriorTracker(eps)
    batch = max(16, int(4 / eps))
    while tracker.rounds < max_rounds:
        xs = rng.uniform(-1.0, 1.0, size=(batch, 2))
        ys = xs[:, 0] + beta2 * xs[:, 1] + rng.uniform(-1.0, 1.0, batch)
        for x, y in zip(xs, ys):
            tracker.update(x, y)
            if tracker.first_shrink is not None:
                return tracker.first_shrink
            if tracker.rounds >= max_rounds:
                break
    return max_rounds + 1


def survival_curve(S, horizon: int) -> np.ndarray:
    """Empirical ``P(S >= t)`` for ``t = 1..horizon``."""
    S = np.asarray(S)
    return np.array([(S >= t).mean() for t in range(1, horizon + 1)])


def survival_bound(eps: float, horizon: int) -> np.ndarray:
    return (1 - 2 * eps) ** np.arange(1, horizon + 1)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)
