import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbandit.estimator import DesignState
from fairbandit.fairgap import (
    FairGapParams,
    GapInstance,
    Polytope,
    approx_fairgap_round,
    approx_schedule,
    enumerate_vertices,
    exploration_threshold,
    fairgap_round,
    format_polytope,
    gap,
    hit_and_run,
    lambda_uniform,
    load_polytope,
    parse_polytope,
    round_width,
    sample_uniform,
    top_two,
)

from oracles import box_lambda, mc_hull_vertices, random_bounded_halfspaces, same_point_set, simplex_centroid

BOX = Polytope.box(-1.0, 1.0, 2)
SIMPLEX = Polytope.simplex(2)


def test_box_vertices():
    V = enumerate_vertices(BOX)
    assert same_point_set(V, [[-1, -1], [-1, 1], [1, -1], [1, 1]], 1e-12)


def test_simplex_vertices():
    assert same_point_set(enumerate_vertices(SIMPLEX), [[0, 0], [1, 0], [0, 1]], 1e-12)


def test_random_polytope_matches_hull_oracle():
    rng = np.random.default_rng(99)
    for _ in range(3):
        A, b = random_bounded_halfspaces(rng)
        V = enumerate_vertices(Polytope(A, b))
        assert same_point_set(V, mc_hull_vertices(A, b, rng), 1e-6)


def test_vertices_of_cube_in_3d():
    V = enumerate_vertices(Polytope.box(-1, 1, 3))
    assert len(V) == 8
    assert np.all(np.abs(V) == 1)


def test_rejects_unbounded_empty_and_flat():
    with pytest.raises(ValueError, match="unbounded"):
        Polytope([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    with pytest.raises(ValueError, match="empty"):
        Polytope([[1.0], [-1.0]], [-1.0, -1.0])
    with pytest.raises(ValueError, match="interior"):
        Polytope([[1, 0], [-1, 0], [0, 1], [0, -1]], [0.0, 0.0, 1.0, 1.0])


def test_top_two_box():
    x1, x2 = top_two(BOX.vertices, [1.0, 0.5])
    np.testing.assert_array_equal(x1, [1, 1])
    np.testing.assert_array_equal(x2, [1, -1])


def test_top_two_zero_estimate_lexicographic():
    x1, x2 = top_two(BOX.vertices, [0.0, 0.0])
    np.testing.assert_array_equal(x1, [-1, -1])
    np.testing.assert_array_equal(x2, [-1, 1])


def test_top_two_simplex():
    x1, x2 = top_two(SIMPLEX.vertices, [2.0, 1.0])
    np.testing.assert_array_equal(x1, [1, 0])
    np.testing.assert_array_equal(x2, [0, 1])


@pytest.mark.parametrize(
    "poly,beta,expected",
    [(BOX, (1.0, 0.5), 1.0), (BOX, (1.0, 0.0), 0.0), (SIMPLEX, (3.0, 1.0), 2.0)],
)
def test_gap_values(poly, beta, expected):
    assert gap(poly, beta) == pytest.approx(expected, abs=1e-12)


def test_exact_moments_box_and_simplex():
    assert BOX.volume == pytest.approx(4.0)
    np.testing.assert_allclose(BOX.second_moment, np.eye(2) / 3, atol=1e-12)
    np.testing.assert_allclose(SIMPLEX.centroid, simplex_centroid(2), atol=1e-12)
    # E[x1^2] on the unit simplex is 1/6, E[x1 x2] is 1/12
    np.testing.assert_allclose(SIMPLEX.second_moment, [[1 / 6, 1 / 12], [1 / 12, 1 / 6]], atol=1e-12)


@pytest.mark.parametrize("a", [1.0, 2.5])
def test_lambda_uniform_box(a):
    poly = Polytope.box(-a, a, 2)
    est, se = lambda_uniform(poly, 100_000, np.random.default_rng(1))
    assert abs(est - box_lambda(a)) < 3 * se + 1e-3 * a * a
    assert poly.lam == pytest.approx(box_lambda(a))


def test_lambda_uniform_needs_samples():
    with pytest.raises(ValueError):
        lambda_uniform(BOX, 100, np.random.default_rng(0))


def test_sample_uniform_box_moments():
    n = 100_000
    X = sample_uniform(BOX, np.random.default_rng(2), n)
    assert BOX.contains(X).all()
    sd = math.sqrt(1 / 3 / n)
    assert np.all(np.abs(X.mean(axis=0)) < 3 * sd)
    # x^2 for x ~ U[-1,1] has variance 1/5 - 1/9
    sd2 = math.sqrt((1 / 5 - 1 / 9) / n)
    assert np.all(np.abs((X**2).mean(axis=0) - 1 / 3) < 3 * sd2)


def test_hit_and_run_box_moments():
    rng = np.random.default_rng(3)
    n = 4000
    # independent short chains; the box mixes within a few dozen steps
    X = np.array([hit_and_run(BOX, BOX.center, 50, rng) for _ in range(n)])
    assert BOX.contains(X).all()
    assert np.all(np.abs(X.mean(axis=0)) < 3 * math.sqrt(1 / 3 / n))
    assert np.all(np.abs((X**2).mean(axis=0) - 1 / 3) < 3 * math.sqrt((1 / 5 - 1 / 9) / n))


def test_hit_and_run_long_chain_box():
    rng = np.random.default_rng(4)
    x = hit_and_run(BOX, BOX.center, 10_000, rng)
    assert BOX.contains(x)


def test_hit_and_run_one_step_feasible():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = hit_and_run(BOX, [0.0, 0.0], 1, rng)
        assert BOX.contains(x)


def test_hit_and_run_simplex_mean():
    rng = np.random.default_rng(6)
    n = 3000
    X = np.array([hit_and_run(SIMPLEX, SIMPLEX.center, 50, rng) for _ in range(n)])
    sd = math.sqrt(1 / 18 / n)  # Var(x1) on the unit simplex is 1/18
    assert np.all(np.abs(X.mean(axis=0) - 1 / 3) < 3 * sd)


def test_hit_and_run_rejects_boundary_start():
    with pytest.raises(ValueError):
        hit_and_run(BOX, [1.0, 0.0], 5, np.random.default_rng(0))


def test_burn_in_reduces_moment_error_on_skewed_body():
    # long thin triangle, started near its blunt end
    poly = Polytope.from_vertices([[0, 0], [20, 0.5], [0, 1]])
    start = np.array([0.1, 0.5])
    rng = np.random.default_rng(8)
    target = poly.centroid

    def err(steps, n):
        X = np.array([hit_and_run(poly, start, steps, rng) for _ in range(n)])
        return np.linalg.norm(X.mean(axis=0) - target)

    assert err(10_000, 60) < err(1, 2000)


def test_approx_schedule_value():
    delta_p, eps_p = approx_schedule(0.1, 0.05, 1000)
    assert eps_p == pytest.approx(2.5e-8)
    assert delta_p == pytest.approx(0.025)


def test_polytope_text_round_trip(tmp_path):
    text = "4 2\n1 0 1\n-1 0 1\n0 1 2\n0 -1 2\n"
    p = parse_polytope(text)
    assert same_point_set(p.vertices, [[-1, -2], [-1, 2], [1, -2], [1, 2]], 1e-12)
    path = tmp_path / "p.txt"
    path.write_text(format_polytope(p))
    q = load_polytope(path)
    np.testing.assert_array_equal(q.A, p.A)
    with pytest.raises(ValueError):
        parse_polytope("3 2\n1 0 1\n")


def test_params_validation():
    with pytest.raises(ValueError):
        FairGapParams(delta=0.0)
    with pytest.raises(ValueError):
        FairGapParams(kappa_form="other")
    assert FairGapParams().steps(2) == 8000


def test_width_schedule_monotone():
    params = FairGapParams(noise_scale=0.5)
    widths = [round_width(t, 2, math.sqrt(2), 1 / 3, 0.05, params)[0] for t in (5_000, 10_000, 40_000)]
    assert widths[0] > widths[1] > widths[2]
    assert exploration_threshold(10, 2, math.sqrt(2), 1 / 3, 0.05)
    assert not exploration_threshold(5_000, 2, math.sqrt(2), 1 / 3, 0.05)


def _run(instance, T, params, seed):
    rng = np.random.default_rng(seed)
    state = DesignState(2, norm_bound=instance.polytope.radius)
    steps = []
    for t in range(1, T + 1):
        steps.append(fairgap_round(state, instance.polytope, t, params, rng,
                                   lambda x: instance.reward(x, rng), instance.lam))
    return state, steps


def test_small_t_explores():
    inst = GapInstance(BOX, [1.0, 0.5], 0.5, lam=1 / 3)
    state, steps = _run(inst, 50, FairGapParams(noise_scale=0.5), 0)
    assert not any(s.deterministic for s in steps)
    assert state.t == 50


def test_after_separation_plays_true_argmax():
    inst = GapInstance(BOX, [1.0, 0.5], 0.5, lam=1 / 3)
    state, steps = _run(inst, 6000, FairGapParams(noise_scale=0.5), 1)
    first = next(i for i, s in enumerate(steps) if s.deterministic)
    assert all(s.deterministic for s in steps[first:])
    assert all(np.array_equal(s.action, inst.optimum) for s in steps[first:])
    # deterministic rounds leave the state alone
    assert state.t == first


def test_tied_estimate_explores():
    state = DesignState(2, norm_bound=BOX.radius)
    # symmetric data gives beta_hat = (1, 0), tying (1, 1) and (1, -1)
    for _ in range(5000):
        state.update([1.0, 0.0], 1.0)
    step = fairgap_round(state, BOX, 50_000, FairGapParams(), np.random.default_rng(0),
                         lambda x: 0.0, 1 / 3)
    assert not step.deterministic


def test_approx_round_dispatch_and_feasibility():
    rng = np.random.default_rng(3)
    params = FairGapParams(epsilon=0.0)
    a = approx_fairgap_round(DesignState(2, norm_bound=2), BOX, 1, params, rng, lambda x: 0.0)
    assert BOX.contains(a.action) and not a.deterministic
    params = FairGapParams(epsilon=0.1, burn_in=20)
    state = DesignState(2, norm_bound=2)
    for t in range(1, 30):
        s = approx_fairgap_round(state, BOX, t, params, rng, lambda x: 0.0)
        assert BOX.contains(s.action)
    assert state.t == 29


def test_gap_instance_properties():
    inst = GapInstance(BOX, [1.0, 0.5])
    assert inst.gap == pytest.approx(1.0)
    assert inst.lam == pytest.approx(1 / 3)
    np.testing.assert_array_equal(inst.optimum, [1, 1])
    assert inst.best_value == pytest.approx(1.5)
    assert inst.explore_regret == pytest.approx(1.5)
    assert inst.to_config()["beta"] == "1.0,0.5"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumerated_vertices_are_feasible_and_tight(seed):
    rng = np.random.default_rng(seed)
    A, b = random_bounded_halfspaces(rng)
    poly = Polytope(A, b)
    V = enumerate_vertices(poly)
    assert poly.contains(V).all()
    tight = np.abs(V @ A.T - b) < 1e-7
    assert np.all(tight.sum(axis=1) >= 2)
    assert poly.volume > 0
    assert poly.contains(poly.centroid)


def test_width_hand_value():
    # t = 1e4 so delta_t = 1e-8; kappa = 1 - sqrt(12 ln(4e12) / 1e4),
    # width = sqrt(2 ln(2e12)) / (kappa * 100 / 3), evaluated by hand
    w, kappa = round_width(10_000, 2, math.sqrt(2), 1 / 3, 0.05, FairGapParams(noise_scale=0.5))
    assert kappa == pytest.approx(0.813397, abs=2e-6)
    assert w == pytest.approx(0.277597, abs=2e-6)
    w2, k2 = round_width(10_000, 2, math.sqrt(2), 1 / 3, 0.05,
                         FairGapParams(noise_scale=0.5, kappa_form="pseudocode"))
    # r * sqrt(2 ln / (t lam)) equals the proof form when r^2 sits inside the root
    assert k2 == pytest.approx(kappa)
    assert round_width(5, 2, math.sqrt(2), 1 / 3, 0.05, FairGapParams())[0] == math.inf


def test_separation_round_within_factor_of_bound():
    from fairbandit.environments import box_gap_instance
    from fairbandit.simulate import fairgap_trial

    inst = box_gap_instance(1.0, 0.5)
    T, delta = 20_000, 0.05
    r, lam = inst.polytope.radius, inst.lam
    _, kappa = round_width(T, 2, r, lam, delta, FairGapParams(noise_scale=0.5))
    L = 8 * r**4 * 0.5**2 * math.log(2 * T / delta) / (kappa**2 * lam**2 * inst.gap**2)
    for seed in range(5):
        out = fairgap_trial(inst, T, FairGapParams(delta=delta, noise_scale=0.5), np.random.default_rng(seed))
        first = int(out["first_deterministic"][0])
        assert first > 0
        assert L / 32 <= first <= 32 * L
