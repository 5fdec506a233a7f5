"""Regularized least-squares state and per-context confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth >= 0:
            raise ValueError(f"halfwidth must be non-negative, got {self.halfwidth}")

    @property
    def lower(self) -> float:
        return self.center - self.halfwidth

    @property
    def upper(self) -> float:
        return self.center + self.halfwidth


@dataclass
class DesignState:
    """Running ridge regression state.

    ``gram`` holds ``X^T X + gamma * I`` and ``moment`` holds ``X^T y`` for
    every observation absorbed so far; ``t`` counts those observations.

    Contexts are checked against ``norm_bound`` on update. With
    ``norm_policy="strict"`` an oversized context raises, with ``"clip"`` it is
    rescaled onto the ball. Set ``rank_one=True`` to maintain the inverse by
    Sherman-Morrison instead of solving from scratch.
    """

    d: int
    gamma: float = 1.0
    norm_bound: float = 1.0
    norm_policy: str = "strict"
    rank_one: bool = False
    gram: np.ndarray = field(default=None, repr=False)
    moment: np.ndarray = field(default=None, repr=False)
    t: int = 0
    _inv: np.ndarray | None = field(default=None, repr=False)
    _beta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not self.gamma >= 1:
            raise ValueError(f"regularizer gamma must be >= 1, got {self.gamma}")
        if self.norm_policy not in ("strict", "clip"):
            raise ValueError(f"unknown norm policy {self.norm_policy!r}")
        self.d = int(self.d)
        if self.gram is None:
            self.gram = self.gamma * np.eye(self.d)
        if self.moment is None:
            self.moment = np.zeros(self.d)
        if self.rank_one and self._inv is None:
            self._inv = np.linalg.inv(self.gram)

    def update(self, x, y: float) -> DesignState:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.d,):
            raise ValueError(f"context has shape {x.shape}, expected ({self.d},)")
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            raise ValueError("non-finite context or reward")
        norm = float(np.linalg.norm(x))
        if norm > self.norm_bound + 1e-9:
            if self.norm_policy == "strict":
                raise ValueError(f"context norm {norm:.6g} exceeds bound {self.norm_bound}")
            x = x * (self.norm_bound / norm)
        self.gram += np.outer(x, x)
        self.moment += y * x
        self.t += 1
        if self.rank_one:
            vx = self._inv @ x
            self._inv -= np.outer(vx, vx) / (1.0 + x @ vx)
        self._beta = None
        return self

    def update_batch(self, X, y) -> DesignState:
        """Absorb several observations at once (rows of ``X``)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.d)
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(X) != len(y):
            raise ValueError("contexts and rewards differ in length")
        if self.rank_one or len(X) <= 1:
            for row, val in zip(X, y):
                self.update(row, float(val))
            return self
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite context or reward")
        norms = np.linalg.norm(X, axis=1)
        over = norms > self.norm_bound + 1e-9
        if over.any():
            if self.norm_policy == "strict":
                raise ValueError(f"context norm {norms.max():.6g} exceeds bound {self.norm_bound}")
            X = X.copy()
            X[over] *= (self.norm_bound / norms[over])[:, None]
        self.gram += X.T @ X
        self.moment += X.T @ y
        self.t += len(X)
        self._beta = None
        return self

    def inverse(self) -> np.ndarray:
        if self.rank_one:
            return self._inv
        return np.linalg.inv(self.gram)

    def estimate(self) -> np.ndarray:
        if self._beta is None:
            if self.rank_one:
                self._beta = self._inv @ self.moment
            else:
                self._beta = np.linalg.solve(self.gram, self.moment)
        return self._beta

    def check(self, tol: float = SYMMETRY_TOL) -> None:
        """Raise if the Gram matrix is not symmetric with spectrum >= gamma."""
        if not np.allclose(self.gram, self.gram.T, atol=tol, rtol=0):
            raise AssertionError("gram matrix is not symmetric")
        low = np.linalg.eigvalsh(self.gram).min()
        if low < self.gamma - tol * max(1.0, self.t):
            raise AssertionError(f"gram eigenvalue {low} below gamma {self.gamma}")

    def width_multiplier(self, delta: float, noise_scale: float = 1.0) -> float:
        if not 0 < delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        log_term = math.log((1 + self.t / self.gamma) / delta)
        return noise_scale * math.sqrt(2 * self.d * log_term) + math.sqrt(self.gamma)

    def confidence_widths(self, contexts, delta: float, noise_scale: float = 1.0) -> np.ndarray:
        """Vectorised halfwidths for a ``(k, d)`` array of contexts."""
        X = np.atleast_2d(np.asarray(contexts, dtype=float))
        mult = self.width_multiplier(delta, noise_scale)
        quad = np.einsum("ij,ij->i", X @ self.inverse(), X)
        return np.sqrt(np.maximum(quad, 0.0)) * mult

    def confidence_width(self, x, delta: float, noise_scale: float = 1.0) -> float:
        return float(self.confidence_widths(x, delta, noise_scale)[0])

    def intervals(self, contexts, delta: float, noise_scale: float = 1.0):
        """Return ``(lower, upper)`` arrays for a batch of contexts."""
        X = np.atleast_2d(np.asarray(contexts, dtype=float))
        centers = X @ self.estimate()
        widths = self.confidence_widths(X, delta, noise_scale)
        return centers - widths, centers + widths

    def interval(self, x, delta: float, noise_scale: float = 1.0) -> ConfidenceInterval:
        x = np.asarray(x, dtype=float)
        return ConfidenceInterval(
            center=float(x @ self.estimate()),
            halfwidth=self.confidence_width(x, delta, noise_scale),
        )


def new_design_state(d: int, gamma: float = 1.0, **kwargs) -> DesignState:
    return DesignState(d=d, gamma=gamma, **kwargs)


def update(state: DesignState, x, y: float) -> DesignState:
    return state.update(x, y)


def estimate(state: DesignState) -> np.ndarray:
    return state.estimate()


def confidence_width(state: DesignState, x, delta: float, noise_scale: float = 1.0) -> float:
    """Halfwidth ``||x||_{V^-1} * (R * sqrt(2 d ln((1 + t/gamma) / delta)) + sqrt(gamma))``."""
    return state.confidence_width(x, delta, noise_scale)


def interval(state: DesignState, x, delta: float, noise_scale: float = 1.0) -> ConfidenceInterval:
    return state.interval(x, delta, noise_scale)
