"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (also collected into the
terminal summary) and then asserts. Runs are seeded, so results are
reproducible; the whole module takes several minutes on one core.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import chisquare

from fairbandit import experiments as ex
from fairbandit.chaining import partition_bounds
from fairbandit.environments import random_unit_ball
from fairbandit.estimator import DesignState
from fairbandit.fairgap import Polytope, enumerate_vertices
from fairbandit.ridgefair import at_most, exactly, pick_exact
from fairbandit.simulate import ridgefair_trial

from oracles import closure_chains, mc_hull_vertices, random_bounded_halfspaces, same_point_set, set_probabilities

pytestmark = pytest.mark.acceptance


def report(log, n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} | {detail}"
    print(line)
    log.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def mistreatment_runs():
    cfg = ex.make_config(experiment="fair-vs-ucb")
    start = time.perf_counter()
    _, agg, _ = ex.run(cfg)
    elapsed = time.perf_counter() - start
    final = {r[3]: r[4] for r in agg.rows if r[1] == "mean" and r[2] == cfg.T}
    se = {r[3]: r[4] for r in agg.rows if r[1] == "stderr" and r[2] == cfg.T}
    return final, se, elapsed


def test_c1_ucb_mistreatment(mistreatment_runs, acceptance_log):
    final, se, elapsed = mistreatment_runs
    m = final["ucb.cum_mistreatment"]
    # the timed run also includes the fair algorithm, so it bounds the UCB-only cost
    ok = 200 <= m <= 800 and elapsed < 300
    report(acceptance_log, 1, "UCB mistreatment in [200, 800]", ok,
           f"mean {m:.1f} +/- {se['ucb.cum_mistreatment']:.1f} over 100 trials, run {elapsed:.0f}s")


def test_c2_ridgefair_fairness(acceptance_log):
    n, T, delta = 200, 500, 0.05
    violating = 0
    for i in range(n):
        rng = ex.trial_rng(2002, i, 0)
        d = int(rng.integers(1, 4))
        k = int(rng.integers(2, 11))
        choice = i % 3
        variant = exactly(1) if choice == 0 else exactly(int(rng.integers(1, k + 1))) if choice == 1 else at_most()
        beta = random_unit_ball(d, rng)
        X = rng.uniform(-1, 1, (T, k, d)) / math.sqrt(d)
        noise = rng.standard_normal((T, k))
        out = ridgefair_trial(beta, X, noise, variant, ex.trial_rng(2002, i, 1), delta=delta)
        violating += out["cum_violation_rounds"][-1] > 0
    frac = violating / n
    limit = delta + 3 * math.sqrt(delta * (1 - delta) / n)
    report(acceptance_log, 2, "RidgeFair violation-trial fraction", frac <= limit,
           f"{violating}/{n} = {frac:.3f} <= {limit:.3f}")


def test_c3_fair_mistreatment_vs_ucb(mistreatment_runs, acceptance_log):
    final, _, _ = mistreatment_runs
    fair, ucb = final["ridgefair.cum_mistreatment"], final["ucb.cum_mistreatment"]
    report(acceptance_log, 3, "RidgeFair<=k mistreatment <= 5% of UCB", fair <= 0.05 * ucb,
           f"fair {fair:.2f} vs ucb {ucb:.1f} (limit {0.05 * ucb:.1f})")


def test_c4_regret_scaling(acceptance_log):
    cfg = ex.make_config(experiment="ridgefair-regret", T=8000, N=50, k=5, d=2, variant="exactly(1)")
    results = ex.run_trials(cfg)
    reg = np.mean([r["cum_regret"] for r in results], axis=0)
    r1 = reg[3999] / reg[1999]
    r2 = reg[7999] / reg[3999]
    report(acceptance_log, 4, "regret ratio R(2T)/R(T) <= 1.7 at T=2000", r1 <= 1.7,
           f"R(4000)/R(2000) = {r1:.3f}; also R(8000)/R(4000) = {r2:.3f}")


def test_c5_fairgap_correctness(acceptance_log):
    cfg = ex.make_config(experiment="fairgap-regret", T=20_000, N=100, gap=1.0, R=0.5, delta=0.05)
    results = ex.run_trials(cfg)
    good = 0
    firsts = []
    for r in results:
        first = int(r["first_deterministic"][0])
        if first == 0:
            continue
        firsts.append(first)
        flat = np.all(r["cum_regret"][first - 1:] == r["cum_regret"][first - 1])
        good += bool(flat and r["cum_wrong_deterministic"][-1] == 0)
    report(acceptance_log, 5, "FairGap correct in >= 95/100 trials", good >= 95,
           f"{good}/100 correct and flat; median first deterministic round {np.median(firsts):.0f}")


def test_c6_gap_dependence(acceptance_log):
    cfg = ex.make_config(experiment="gap-sweep", T=20_000, N=25)
    results = ex.run_trials(cfg)
    med = {g: float(np.median([r[f"gap{g:g}.cum_regret"][-1] for r in results])) for g in cfg.gaps}
    gaps = sorted(med)
    monotone = all(med[a] >= med[b] for a, b in zip(gaps, gaps[1:]))
    ratio = med[0.125] / med[1.0]
    detail = ", ".join(f"gap {g:g}: {med[g]:.0f}" for g in gaps) + f"; ratio {ratio:.2f}"
    report(acceptance_log, 6, "median regret non-increasing in gap, ratio >= 2", monotone and ratio >= 2, detail)


def test_c7_lower_bound_survival(acceptance_log):
    cfg = ex.make_config(experiment="lowerbound-posterior", T=30, N=10_000, eps=(0.05, 0.1))
    results = ex.run_trials(cfg)
    ok, parts = True, []
    for eps in cfg.eps:
        surv = np.mean([r[f"eps{eps:g}.survive"] for r in results], axis=0)
        bound = (1 - 2 * eps) ** np.arange(1, 31)
        sigma = np.sqrt(bound * (1 - bound) / cfg.N)
        slack = float(np.min(surv - (bound - 3 * sigma)))
        mean_s = float(np.mean([r[f"eps{eps:g}.S"][0] for r in results]))
        ok &= slack >= 0 and mean_s >= 1 / (4 * eps)
        parts.append(f"eps {eps:g}: min slack {slack:+.4f}, mean S {mean_s:.2f} >= {1 / (4 * eps):.2f}")
    report(acceptance_log, 7, "tracker survival bound and mean S", ok, "; ".join(parts))


def test_c8_circle_never_separates(acceptance_log):
    ok, parts = True, []
    for angle in (0.0, 37.0, 200.5):
        cfg = ex.make_config(experiment="circle-demo", T=10_000, N=1, beta_angle=angle, seed=int(angle * 10))
        r = ex.run_trial(cfg, 0)
        circle_det = int(r["circle.cum_deterministic"][-1])
        box_first = int(r["box.first_deterministic"][0])
        ok &= circle_det == 0 and box_first > 0
        parts.append(f"angle {angle:g}: circle deterministic {circle_det}, box separates at {box_first}")
    report(acceptance_log, 8, "circle explores every round, box separates", ok, "; ".join(parts))


def test_c9_oracle_equivalences(acceptance_log):
    rng = np.random.default_rng(909)
    chain_ok = 0
    for _ in range(1000):
        k = int(rng.integers(1, 13))
        c = rng.uniform(-1, 1, k)
        w = rng.exponential(0.2, k)
        if rng.random() < 0.3:  # integer grids to hit touching endpoints
            c, w = np.round(c * 4), np.round(w * 4)
        chain_ok += [tuple(ch) for ch in partition_bounds(c - w, c + w).chains] == closure_chains(c - w, c + w)

    vert_ok = 0
    for _ in range(50):
        A, b = random_bounded_halfspaces(rng)
        vert_ok += same_point_set(enumerate_vertices(Polytope(A, b)), mc_hull_vertices(A, b, rng), 1e-6)

    pvals = []
    fixed = [
        (partition_bounds([0, 0.1, 0.2], [1, 1.1, 1.2]), 2),
        (partition_bounds([2, 0, 0.5], [3, 1, 1.5]), 2),
        (partition_bounds([1, 1.2, 1.1, -3, 5, 4.5], [2, 2.2, 2.1, -2, 6, 5.5]), 4),
    ]
    n = 100_000
    for part, m in fixed:
        _, dist = pick_exact(part, m, rng)
        law = set_probabilities(dist.entries)
        keys = sorted(law)
        counts = dict.fromkeys(keys, 0)
        for _ in range(n):
            counts[dist.sample(rng)] += 1
        if len(keys) == 1:
            pvals.append(1.0 if counts[keys[0]] == n else 0.0)
            continue
        pvals.append(float(chisquare([counts[k] for k in keys], [law[k] * n for k in keys]).pvalue))
    ok = chain_ok == 1000 and vert_ok == 50 and min(pvals) > 0.01
    report(acceptance_log, 9, "oracle equivalences", ok,
           f"chaining {chain_ok}/1000, vertices {vert_ok}/50, chi-square p-values "
           + ", ".join(f"{p:.3f}" for p in pvals))


def test_c10_confidence_coverage(acceptance_log):
    n, T, k, delta = 2000, 200, 4, 0.1
    failures = 0
    for i in range(n):
        rng = ex.trial_rng(1010, i)
        d = int(rng.integers(1, 4))
        beta = random_unit_ball(d, rng)
        uniform_noise = i % 2 == 1
        state = DesignState(d)
        X = rng.uniform(-1, 1, (T, k, d)) / math.sqrt(d)
        pick = rng.integers(0, k, T)
        noise = rng.uniform(-1, 1, T) if uniform_noise else rng.standard_normal(T)
        for t in range(T):
            lower, upper = state.intervals(X[t], delta)
            truth = X[t] @ beta
            if np.any(truth < lower) or np.any(truth > upper):
                failures += 1
                break
            x = X[t, pick[t]]
            state.update(x, float(x @ beta + noise[t]))
    frac = failures / n
    limit = delta + 3 * math.sqrt(delta * (1 - delta) / n)
    report(acceptance_log, 10, "confidence coverage failure fraction", frac <= limit,
           f"{failures}/{n} = {frac:.4f} <= {limit:.4f}")
