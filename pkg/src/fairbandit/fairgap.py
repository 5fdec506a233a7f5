"""Fair play over a bounded convex polytope.

The choice set is ``{x : A x <= b}``. Each round either plays the estimated
best vertex, once its confidence interval separates from the runner-up's, or
samples uniformly from the whole body and learns from the result.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay

from .estimator import DesignState

VERTEX_TOL = 1e-9
MIN_ACCEPTANCE = 1e-6


def _lp_max(c, A, b):
    res = linprog(-np.asarray(c, dtype=float), A_ub=A, b_ub=b,
                  bounds=[(None, None)] * A.shape[1], method="highs")
    return res


def _chebyshev_center(A, b):
    """Centre and radius of the largest ball inside ``A x <= b``."""
    norms = np.linalg.norm(A, axis=1)
    d = A.shape[1]
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([A, norms[:, None]]), b_ub=b,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0:
        return None, 0.0
    return res.x[:d], float(res.x[-1])


def _dedup(points: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for p in points:
        if not kept or np.max(np.abs(np.asarray(kept) - p), axis=1).min() > tol:
            kept.append(p)
    out = np.asarray(kept).reshape(-1, points.shape[1])
    return out[np.lexsort(out.T[::-1])]


def _basic_feasible_points(A, b, tol=VERTEX_TOL, chunk=20000):
    m, d = A.shape
    found = []
    combos = itertools.combinations(range(m), d)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        sub = A[block]
        scale = np.prod(np.linalg.norm(sub, axis=2), axis=1)
        ok = np.abs(np.linalg.det(sub)) > 1e-10 * scale
        if not ok.any():
            continue
        pts = np.linalg.solve(sub[ok], b[block[ok]][..., None])[..., 0]
        feasible = np.all(pts @ A.T <= b + tol, axis=1)
        found.append(pts[feasible])
    if not found:
        return np.zeros((0, d))
    return _dedup(np.vstack(found), tol)


class Polytope:
    """Bounded full-dimensional polytope in H-representation.

    Boundedness and non-empty interior are checked on construction. Vertices
    are enumerated unless supplied (for instances where they are known in
    closed form) and kept in lexicographic order.
    """

    def __init__(self, A, b, vertices=None, tol: float = VERTEX_TOL):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite constraint data")
        self.A, self.b, self.tol = A, b, tol
        self.d = A.shape[1]

        for i in range(self.d):
            for sign in (1.0, -1.0):
                e = np.zeros(self.d)
                e[i] = sign
                res = _lp_max(e, A, b)
                if res.status == 2:
                    raise ValueError("polytope is empty")
                if res.status != 0:
                    raise ValueError(f"polytope is unbounded along {'+' if sign > 0 else '-'}e{i}")

        center, inradius = _chebyshev_center(A, b)
        if center is None or inradius <= tol:
            raise ValueError("polytope has empty interior (zero volume)")
        self.center = center
        self.inradius = inradius

        if vertices is None:
            vertices = _basic_feasible_points(A, b, tol)
        else:
            vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
            vertices = vertices[np.lexsort(vertices.T[::-1])]
        if len(vertices) < self.d + 1:
            raise ValueError("polytope has fewer than d + 1 vertices")
        self.vertices = vertices
        self.radius = float(np.linalg.norm(vertices, axis=1).max())

    @classmethod
    def box(cls, lo=-1.0, hi=1.0, d: int = 2) -> Polytope:
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
        A = np.vstack([np.eye(d), -np.eye(d)])
        return cls(A, np.concatenate([hi, -lo]))

    @classmethod
    def simplex(cls, d: int = 2) -> Polytope:
        A = np.vstack([-np.eye(d), np.ones((1, d))])
        return cls(A, np.concatenate([np.zeros(d), [1.0]]))

    @classmethod
    def from_vertices(cls, points) -> Polytope:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        hull = ConvexHull(points)
        eq = hull.equations
        return cls(eq[:, :-1], -eq[:, -1], vertices=points[hull.vertices])

    def contains(self, x, tol: float | None = None) -> bool | np.ndarray:
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.A.T <= self.b + tol, axis=-1)

    @cached_property
    def _simplices(self):
        V = self.vertices
        if self.d == 1:
            return V[None, [0, -1]] if len(V) >= 2 else V[None]
        return V[Delaunay(V).simplices]

    @cached_property
    def _simplex_volumes(self) -> np.ndarray:
        S = self._simplices
        edges = S[:, 1:] - S[:, :1]
        return np.abs(np.linalg.det(edges)) / math.factorial(self.d)

    @property
    def volume(self) -> float:
        return float(self._simplex_volumes.sum())

    @cached_property
    def centroid(self) -> np.ndarray:
        w = self._simplex_volumes / self._simplex_volumes.sum()
        return w @ self._simplices.mean(axis=1)

    @cached_property
    def second_moment(self) -> np.ndarray:
        """Exact ``E[x x^T]`` for ``x`` uniform on the polytope."""
        d = self.d
        w = self._simplex_volumes / self._simplex_volumes.sum()
        S = self._simplices
        sums = S.sum(axis=1)
        per = np.einsum("svi,svj->sij", S, S) + np.einsum("si,sj->sij", sums, sums)
        return np.einsum("s,sij->ij", w, per) / ((d + 1) * (d + 2))

    @property
    def lam(self) -> float:
        return float(np.linalg.eigvalsh(self.second_moment).min())

    def __repr__(self):
        return f"Polytope(m={len(self.b)}, d={self.d}, vertices={len(self.vertices)})"


def parse_polytope(text: str) -> Polytope:
    """Read ``"m d"`` followed by m rows of ``a_1 .. a_d b``."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty polytope description")
    m, d = (int(v) for v in rows[0])
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    if body.shape != (m, d + 1):
        raise ValueError(f"expected {m} rows of {d + 1} numbers, got shape {body.shape}")
    return Polytope(body[:, :d], body[:, d])


def format_polytope(polytope: Polytope) -> str:
    lines = [f"{len(polytope.b)} {polytope.d}"]
    for a, b in zip(polytope.A, polytope.b):
        lines.append(" ".join(repr(float(v)) for v in (*a, b)))
    return "\n".join(lines) + "\n"


def load_polytope(path) -> Polytope:
    return parse_polytope(Path(path).read_text())


def enumerate_vertices(polytope: Polytope, tol: float = VERTEX_TOL) -> np.ndarray:
    """All basic feasible points of ``A x <= b``, deduplicated within ``tol``."""
    return _basic_feasible_points(polytope.A, polytope.b, tol)


def top_two(vertices, beta_hat):
    """Best and runner-up vertex under ``beta_hat``; ties go to the
    lexicographically smaller vertex."""
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    if len(V) < 2:
        raise ValueError("top_two needs at least two vertices")
    scores = V @ np.asarray(beta_hat, dtype=float)
    order = np.lexsort(tuple(V.T[::-1]) + (-scores,))
    return V[order[0]], V[order[1]]


def gap(polytope: Polytope, beta, tol: float = 1e-12) -> float:
    scores = np.sort(polytope.vertices @ np.asarray(beta, dtype=float))[::-1]
    g = float(scores[0] - scores[1])
    return 0.0 if g <= tol else g


def sample_uniform(polytope: Polytope, rng: np.random.Generator, size: int | None = None):
    """Exact uniform draws by rejection from the vertices' bounding box."""
    lo = polytope.vertices.min(axis=0)
    hi = polytope.vertices.max(axis=0)
    accept = polytope.volume / float(np.prod(hi - lo))
    if accept < MIN_ACCEPTANCE:
        raise ValueError(f"rejection acceptance {accept:.2e} is too low; use hit_and_run")
    n = 1 if size is None else size
    out = np.empty((n, polytope.d))
    filled = 0
    while filled < n:
        batch = max(4, int(1.5 * (n - filled) / accept) + 1)
        pts = rng.uniform(lo, hi, size=(batch, polytope.d))
        pts = pts[np.all(pts @ polytope.A.T <= polytope.b, axis=1)]
        take = min(len(pts), n - filled)
        out[filled:filled + take] = pts[:take]
        filled += take
    return out[0] if size is None else out


def lambda_uniform(polytope: Polytope, n_samples: int, rng: np.random.Generator):
    """Monte Carlo smallest eigenvalue of ``E[x x^T]`` and its standard error."""
    if n_samples < 10_000:
        raise ValueError("lambda_uniform needs at least 1e4 samples")
    X = sample_uniform(polytope, rng, n_samples)
    M = X.T @ X / n_samples
    vals, vecs = np.linalg.eigh(M)
    proj = (X @ vecs[:, 0]) ** 2
    return float(vals[0]), float(proj.std(ddof=1) / math.sqrt(n_samples))


def hit_and_run(polytope: Polytope, start, steps: int, rng: np.random.Generator) -> np.ndarray:
    x = np.array(start, dtype=float)
    if steps < 1:
        raise ValueError("hit_and_run needs at least one step")
    if not np.all(polytope.A @ x < polytope.b):
        raise ValueError("hit-and-run must start strictly inside the polytope")
    A, b = polytope.A, polytope.b
    dirs = rng.standard_normal((steps, polytope.d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    unif = rng.random(steps)
    slack = b - A @ x
    for u, s in zip(dirs, unif):
        Au = A @ u
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / Au
        hi = ratio[Au > 0].min()
        lo = ratio[Au < 0].max()
        step = lo + s * (hi - lo)
        x += step * u
        slack -= step * Au
    return x


def theoretical_burn_in(d: int, r: float, r_inner: float, alpha: float, epsilon: float) -> float:
    """Step count guaranteeing ``epsilon`` total variation from uniform."""
    return 1e11 * d**3 * (r / r_inner) ** 2 * math.log(r / (alpha * epsilon))


def approx_schedule(epsilon: float, delta: float, horizon: int) -> tuple[float, float]:
    """Per-round ``(delta', epsilon')`` for the approximately fair variant."""
    return delta / 2, min(epsilon / horizon, delta / (2 * horizon**2))


@dataclass
class FairGapParams:
    delta: float = 0.05
    decay: float = 1.0
    burn_in: int | None = None
    epsilon: float = 0.0
    noise_scale: float = 1.0
    kappa_form: str = "proof"

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.decay <= 0:
            raise ValueError("decay exponent must be positive")
        if self.burn_in is not None and self.burn_in < 1:
            raise ValueError("burn_in must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.kappa_form not in ("proof", "pseudocode"):
            raise ValueError(f"unknown kappa form {self.kappa_form!r}")

    def steps(self, d: int) -> int:
        return self.burn_in if self.burn_in is not None else 1000 * d**3


@dataclass
class GapInstance:
    """A polytope with a true parameter and Gaussian noise of scale R."""

    polytope: Polytope
    beta: np.ndarray
    noise_scale: float = 1.0
    lam: float | None = None
    gap: float = field(init=False)
    optimum: np.ndarray = field(init=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.lam is None:
            self.lam = self.polytope.lam
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        self.gap = gap(self.polytope, self.beta)
        self.optimum = top_two(self.polytope.vertices, self.beta)[0]

    @property
    def best_value(self) -> float:
        return float(self.optimum @ self.beta)

    @property
    def explore_regret(self) -> float:
        return self.best_value - float(self.polytope.centroid @ self.beta)

    def reward(self, x, rng: np.random.Generator) -> float:
        return float(np.asarray(x) @ self.beta + self.noise_scale * rng.standard_normal())

    def to_config(self) -> dict[str, str]:
        return {
            "beta": ",".join(repr(float(v)) for v in self.beta),
            "R": repr(float(self.noise_scale)),
            "lambda": repr(float(self.lam)),
        }


class FairGapStep(NamedTuple):
    action: np.ndarray
    deterministic: bool
    width: float
    kappa: float
    x1: np.ndarray | None
    x2: np.ndarray | None


def exploration_threshold(t: int, d: int, r: float, lam: float, delta: float) -> bool:
    """True while the round is still in forced warm-up exploration."""
    return 2 * r * r * math.log(2 * d * t / delta) / lam >= t


def round_width(t: int, d: int, r: float, lam: float, delta: float, params: FairGapParams):
    """``(width, kappa)`` at round ``t``; ``kappa <= 0`` means no valid width."""
    delta_t = min(delta, 1.0 / t ** (1 + params.decay))
    log_d = math.log(2 * d * t / delta_t)
    if params.kappa_form == "proof":
        kappa = 1 - math.sqrt(2 * r * r * log_d / (t * lam))
    else:
        kappa = 1 - r * math.sqrt(2 * log_d / (t * lam))
    if kappa <= 0:
        return math.inf, kappa
    width = r * r * params.noise_scale * math.sqrt(2 * math.log(2 * t / delta_t)) / (kappa * lam * math.sqrt(t))
    return width, kappa


def _round(state, polytope, t, params, rng, observe, lam, delta, sampler) -> FairGapStep:
    r, d = polytope.radius, polytope.d
    width, kappa = math.inf, -math.inf
    x1 = x2 = None
    if not exploration_threshold(t, d, r, lam, delta):
        width, kappa = round_width(t, d, r, lam, delta, params)
        if kappa > 0:
            beta_hat = state.estimate()
            x1, x2 = top_two(polytope.vertices, beta_hat)
            c1, c2 = float(x1 @ beta_hat), float(x2 @ beta_hat)
            if c1 - width > c2 + width:
                return FairGapStep(x1, True, width, kappa, x1, x2)
    x = sampler()
    state.update(x, observe(x))
    return FairGapStep(x, False, width, kappa, x1, x2)


def fairgap_round(
    state: DesignState,
    polytope: Polytope,
    t: int,
    params: FairGapParams,
    rng: np.random.Generator,
    observe: Callable[[np.ndarray], float],
    lam: float | None = None,
) -> FairGapStep:
    """Play round ``t`` (1-based).

    Exploration rounds draw an exact uniform point, call ``observe`` for its
    reward and absorb it into ``state``; exploitation rounds leave ``state``
    untouched.
    """
    lam = polytope.lam if lam is None else lam
    return _round(state, polytope, t, params, rng, observe, lam, params.delta,
                  lambda: sample_uniform(polytope, rng))


def approx_fairgap_round(
    state: DesignState,
    polytope: Polytope,
    t: int,
    params: FairGapParams,
    rng: np.random.Generator,
    observe: Callable[[np.ndarray], float],
    lam: float | None = None,
) -> FairGapStep:
    """As ``fairgap_round`` but sampling by hit-and-run with half the delta."""
    if params.epsilon == 0:
        return fairgap_round(state, polytope, t, params, rng, observe, lam)
    lam = polytope.lam if lam is None else lam
    steps = params.steps(polytope.d)
    return _round(state, polytope, t, params, rng, observe, lam, params.delta / 2,
                  lambda: hit_and_run(polytope, polytope.center, steps, rng))
