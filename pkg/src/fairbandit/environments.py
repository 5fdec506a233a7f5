"""Instance generators and the two lower-bound constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fairgap import GapInstance, Polytope

NOISE_KINDS = ("gaussian", "uniform", "none")


@dataclass
class LinearEnvironment:
    """Rewards ``beta . x + eta``.

    ``noise="gaussian"`` draws N(0, R^2), which is R-sub-Gaussian;
    ``"uniform"`` draws U[-1, 1], which is 1-sub-Gaussian.
    """

    beta: np.ndarray
    noise: str = "gaussian"
    noise_scale: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise model {self.noise!r}")

    @property
    def d(self) -> int:
        return len(self.beta)

    def mean(self, x) -> np.ndarray | float:
        return np.asarray(x, dtype=float) @ self.beta

    def reward(self, x, rng: np.random.Generator):
        mean = self.mean(x)
        shape = np.shape(mean)
        if self.noise == "gaussian":
            eta = self.noise_scale * rng.standard_normal(shape)
        elif self.noise == "uniform":
            eta = rng.uniform(-1.0, 1.0, shape)
        else:
            eta = np.zeros(shape)
        out = mean + eta
        return float(out) if shape == () else out

    def to_config(self) -> dict[str, str]:
        return {
            "beta": ",".join(repr(float(v)) for v in self.beta),
            "noise": self.noise,
            "R": repr(float(self.noise_scale)),
        }


def reward(env: LinearEnvironment, x, rng: np.random.Generator):
    return env.reward(x, rng)


def gen_contexts_uniform(k: int, d: int, rng: np.random.Generator, rescale: bool = False) -> np.ndarray:
    """``k`` contexts with i.i.d. U[-1, 1] entries, optionally scaled by
    ``1/sqrt(d)`` so every context has norm at most one."""
    X = rng.uniform(-1.0, 1.0, size=(k, d))
    if rescale:
        X /= math.sqrt(d)
    return X


def random_unit_ball(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v) * rng.random() ** (1.0 / d)


def random_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class PopulationModel:
    """Majority contexts ``(x, x)`` with probability ``p``, else U[-1,1]^2."""

    p: float = 0.9
    beta: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"majority probability must lie in [0, 1], got {self.p}")


def gen_disparity_contexts(k: int, model: PopulationModel, rng: np.random.Generator):
    """Return ``(contexts, majority)`` where ``majority`` flags population 1."""
    majority = rng.random(k) < model.p
    X = rng.uniform(-1.0, 1.0, size=(k, 2))
    X[majority, 1] = X[majority, 0]
    return X, majority


@dataclass
class PosteriorTracker:
    """Set of values of the second coefficient consistent with every
    observation so far, when the first coefficient is known to be 1 and the
    noise is U[-1, 1]. ``first_shrink`` is the first round the set became
    strictly smaller than the prior ``[-eps, eps]``."""

    eps: float
    lo: float = field(init=False)
    hi: float = field(init=False)
    rounds: int = 0
    first_shrink: int | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("prior half-width must be positive")
        self.lo, self.hi = -self.eps, self.eps

    @property
    def at_prior(self) -> bool:
        return self.lo == -self.eps and self.hi == self.eps

    def update(self, x, y: float) -> PosteriorTracker:
        self.rounds += 1
        x1, x2 = float(x[0]), float(x[1])
        if x2 != 0.0:
            a = (y - x1 - 1.0) / x2
            b = (y - x1 + 1.0) / x2
            self.lo = max(self.lo, min(a, b))
            self.hi = min(self.hi, max(a, b))
        if self.first_shrink is None and not self.at_prior:
            self.first_shrink = self.rounds
        return self


def posterior_update(tracker: PosteriorTracker, x, y: float) -> PosteriorTracker:
    return tracker.update(x, y)


def survival_times(eps: float, n: int, rng: np.random.Generator, max_rounds: int = 1_000_000) -> np.ndarray:
    """First-shrink rounds for ``n`` independent trackers.

    Each tracker draws its second coefficient from U[-eps, eps], plays
    uniformly on [-1, 1]^2 and observes U[-1, 1] noise. The prior
    interval is the same for all of them, so only the first shrink needs
    tracking. Trackers that never shrink report ``max_rounds + 1``.
    """
    beta2 = rng.uniform(-eps, eps, n)
    S = np.full(n, max_rounds + 1, dtype=np.int64)
    alive = np.arange(n)
    t = 0
    while alive.size and t < max_rounds:
        t += 1
        x = rng.uniform(-1.0, 1.0, size=(alive.size, 2))
        y = x[:, 0] + beta2[alive] * x[:, 1] + rng.uniform(-1.0, 1.0, alive.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (y - x[:, 0] - 1.0) / x[:, 1]
            b = (y - x[:, 0] + 1.0) / x[:, 1]
        informative = x[:, 1] != 0
        shrunk = informative & ((np.minimum(a, b) > -eps) | (np.maximum(a, b) < eps))
        S[alive[shrunk]] = t
        alive = alive[~shrunk]
    return S


def circle_instance(n: int, beta=(1.0, 0.0), noise_scale: float = 1.0, allow_small: bool = False) -> GapInstance:
    """Regular ``n``-gon inscribed in the unit circle, first vertex at (1, 0)."""
    if n < 8 and not allow_small:
        raise ValueError("circle discretisation needs n >= 8")
    if n < 3:
        raise ValueError("need at least three points")
    angles = 2 * np.pi * np.arange(n) / n
    V = np.column_stack([np.cos(angles), np.sin(angles)])
    V[np.abs(V) < 1e-15] = 0.0
    mids = angles + np.pi / n
    A = np.column_stack([np.cos(mids), np.sin(mids)])
    b = np.full(n, math.cos(math.pi / n))
    return GapInstance(Polytope(A, b, vertices=V), np.asarray(beta, dtype=float), noise_scale)


def box_gap_instance(gap_value: float, noise_scale: float = 0.5, fixed_best: bool = False) -> GapInstance:
    """[-1, 1]^2 with a chosen vertex gap.

    By default ``beta = (1, gap/2)``. With ``fixed_best`` it is
    ``(1 - gap/2, gap/2)``, which keeps the optimal value at 1 for every
    ``gap <= 1`` so exploration costs the same across a sweep.
    """
    if fixed_best:
        if not 0 < gap_value <= 1:
            raise ValueError("fixed-best box instances need 0 < gap <= 1")
        beta = (1 - gap_value / 2, gap_value / 2)
    else:
        beta = (1.0, gap_value / 2)
    box = Polytope.box(-1.0, 1.0, 2)
    return GapInstance(box, np.array(beta), noise_scale, lam=1.0 / 3.0)
