"""Config-driven experiment runner producing long-format CSV tables.

Trial ``i`` of a run with master seed ``s`` draws all randomness from
``numpy.random.SeedSequence(entropy=s, spawn_key=(i,))``. That is numpy's
documented hash-based seed splitting, so trial streams never overlap and
do not depend on the number of workers or on execution order.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import simulate
from .environments import PopulationModel, box_gap_instance, circle_instance, random_unit_sphere
from .fairgap import FairGapParams
from .metrics import UCB_Z
from .ridgefair import at_most, exactly, parse_variant

HEADER = ("experiment", "trial", "t", "metric", "value")
THREADS_ENV = "FAIRBANDIT_THREADS"

EXPERIMENTS = (
    "ucb-mistreatment",
    "fair-vs-ucb",
    "disparity",
    "ridgefair-regret",
    "fairgap-regret",
    "gap-sweep",
    "lowerbound-posterior",
    "circle-demo",
)

# per-experiment defaults, applied before file and command-line settings
DEFAULTS: dict[str, dict[str, object]] = {
    "ucb-mistreatment": dict(T=10_000, N=100, k=10, d=2, R=1.0),
    "fair-vs-ucb": dict(T=10_000, N=100, k=10, d=2, R=1.0),
    "disparity": dict(T=25, N=1000, k=10, d=2, p=(0.8, 0.9, 0.95)),
    "ridgefair-regret": dict(T=4000, N=50, k=5, d=2, variant="exactly(1)"),
    "fairgap-regret": dict(T=20_000, N=100, gap=1.0, R=0.5),
    "gap-sweep": dict(T=20_000, N=25, gaps=(0.125, 0.25, 0.5, 1.0), R=0.5),
    "lowerbound-posterior": dict(T=30, N=10_000, eps=(0.05, 0.1)),
    "circle-demo": dict(T=10_000, N=1, n_circle=360, gap=1.0, R=0.5),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    T: int = 1000
    N: int = 10
    k: int = 10
    d: int = 2
    variant: str = "exactly(1)"
    delta: float = 0.05
    gamma: float = 1.0
    R: float = 1.0
    z: float = UCB_Z
    gap: float = 1.0
    gaps: tuple[float, ...] = (0.125, 0.25, 0.5, 1.0)
    p: tuple[float, ...] = (0.9,)
    eps: tuple[float, ...] = (0.1,)
    n_circle: int = 360
    beta_angle: float = 0.0
    epsilon: float = 0.0
    burn_in: int = 0
    decay: float = 1.0
    seed: int = 0
    record_every: int = 0
    output: str = ""

    def validate(self) -> ExperimentConfig:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.T < 1 or self.N < 1:
            raise ConfigError("T and N must be at least 1")
        if self.k < 1 or self.d < 1:
            raise ConfigError("k and d must be at least 1")
        if not 0 < self.delta <= 1:
            raise ConfigError("delta must lie in (0, 1]")
        if self.gamma < 1:
            raise ConfigError("gamma must be >= 1")
        if self.R <= 0 or self.z <= 0:
            raise ConfigError("R and z must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.experiment == "ridgefair-regret":
            try:
                v = parse_variant(self.variant)
            except ValueError as exc:
                raise ConfigError(f"bad variant {self.variant!r}: {exc}") from None
            if v.exact and v.m > self.k:
                raise ConfigError(f"cannot select {v.m} of k={self.k} contexts")
        if self.experiment == "disparity" and any(not 0 <= p <= 1 for p in self.p):
            raise ConfigError("p must lie in [0, 1]")
        if self.experiment in ("fairgap-regret", "circle-demo") and self.gap <= 0:
            raise ConfigError("gap must be positive")
        if self.experiment == "gap-sweep" and any(not 0 < g <= 1 for g in self.gaps):
            raise ConfigError("gap-sweep gaps must lie in (0, 1]")
        if self.experiment == "lowerbound-posterior" and any(not 0 < e < 0.5 for e in self.eps):
            raise ConfigError("eps must lie in (0, 0.5)")
        if self.experiment == "circle-demo" and self.n_circle < 8:
            raise ConfigError("n_circle must be at least 8")
        return self

    @property
    def stride(self) -> int:
        if self.record_every > 0:
            return self.record_every
        return max(1, self.T // 1000)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, text: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    default = _FIELDS[name].default
    text = text.strip()
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_settings(lines) -> dict[str, object]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, object] = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, overrides=()) -> ExperimentConfig:
    settings: dict[str, object] = {}
    if path is not None:
        settings.update(parse_settings(Path(path).read_text().splitlines()))
    settings.update(parse_settings(overrides))
    return make_config(**settings)


def make_config(**settings) -> ExperimentConfig:
    experiment = settings.get("experiment")
    if not experiment:
        raise ConfigError("config must name an experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    merged = {**DEFAULTS[experiment], **settings}
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**merged).validate()


def trial_rng(seed: int, trial: int, stream: int | None = None) -> np.random.Generator:
    key = (trial,) if stream is None else (trial, stream)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# --- trial functions: (config, trial index) -> {metric: series} -------------


def _mistreatment_env(cfg: ExperimentConfig, i: int):
    return simulate.mistreatment_environment(trial_rng(cfg.seed, i, 0), cfg.T, cfg.k, cfg.d, cfg.R)


def _trial_ucb(cfg, i):
    beta, X, noise = _mistreatment_env(cfg, i)
    out = simulate.ucb_k_trial(beta, X, noise, z=cfg.z, gamma=cfg.gamma)
    return {f"ucb.{k}": v for k, v in out.items()}


def _trial_fair_vs_ucb(cfg, i):
    beta, X, noise = _mistreatment_env(cfg, i)
    out = {f"ucb.{k}": v for k, v in simulate.ucb_k_trial(beta, X, noise, z=cfg.z, gamma=cfg.gamma).items()}
    fair = simulate.ridgefair_trial(beta, X / math.sqrt(cfg.d), noise, at_most(), trial_rng(cfg.seed, i, 1),
                                    delta=cfg.delta, gamma=cfg.gamma, noise_scale=cfg.R, audit=False)
    out.update({f"ridgefair.{k}": v for k, v in fair.items()})
    return out


def _trial_disparity(cfg, i):
    out = {}
    for j, p in enumerate(cfg.p):
        series = simulate.disparity_trial(PopulationModel(p), cfg.T, cfg.k, trial_rng(cfg.seed, i, j),
                                          z=cfg.z, R=cfg.R)
        out.update({f"p{p:g}.{k}": v for k, v in series.items()})
    return out


def _trial_ridgefair(cfg, i):
    rng = trial_rng(cfg.seed, i, 0)
    beta = random_unit_sphere(cfg.d, rng)
    X = rng.uniform(-1.0, 1.0, size=(cfg.T, cfg.k, cfg.d)) / math.sqrt(cfg.d)
    noise = cfg.R * rng.standard_normal((cfg.T, cfg.k))
    return simulate.ridgefair_trial(beta, X, noise, parse_variant(cfg.variant), trial_rng(cfg.seed, i, 1),
                                    delta=cfg.delta, gamma=cfg.gamma, noise_scale=cfg.R)


def _gap_params(cfg):
    return FairGapParams(delta=cfg.delta, decay=cfg.decay, burn_in=cfg.burn_in or None,
                         epsilon=cfg.epsilon, noise_scale=cfg.R)


def _trial_fairgap(cfg, i):
    instance = box_gap_instance(cfg.gap, cfg.R)
    return simulate.fairgap_trial(instance, cfg.T, _gap_params(cfg), trial_rng(cfg.seed, i), cfg.gamma)


def _trial_gap_sweep(cfg, i):
    out = {}
    for j, g in enumerate(cfg.gaps):
        instance = box_gap_instance(g, cfg.R, fixed_best=True)
        series = simulate.fairgap_trial(instance, cfg.T, _gap_params(cfg), trial_rng(cfg.seed, i, j), cfg.gamma)
        out.update({f"gap{g:g}.{k}": v for k, v in series.items()})
    return out


def _trial_posterior(cfg, i):
    out = {}
    for j, eps in enumerate(cfg.eps):
        S = simulate.tracker_trial(eps, trial_rng(cfg.seed, i, j))
        out[f"eps{eps:g}.survive"] = (np.arange(1, cfg.T + 1) <= S).astype(float)
        out[f"eps{eps:g}.S"] = np.array([float(S)])
    return out


def _trial_circle(cfg, i):
    angle = math.radians(cfg.beta_angle)
    circle = circle_instance(cfg.n_circle, (math.cos(angle), math.sin(angle)), cfg.R)
    params = _gap_params(cfg)
    out = {f"circle.{k}": v for k, v in
           simulate.fairgap_trial(circle, cfg.T, params, trial_rng(cfg.seed, i, 0), cfg.gamma).items()}
    box = box_gap_instance(cfg.gap, cfg.R)
    out.update({f"box.{k}": v for k, v in
                simulate.fairgap_trial(box, cfg.T, params, trial_rng(cfg.seed, i, 1), cfg.gamma).items()})
    return out


TRIALS: dict[str, Callable[[ExperimentConfig, int], dict[str, np.ndarray]]] = {
    "ucb-mistreatment": _trial_ucb,
    "fair-vs-ucb": _trial_fair_vs_ucb,
    "disparity": _trial_disparity,
    "ridgefair-regret": _trial_ridgefair,
    "fairgap-regret": _trial_fairgap,
    "gap-sweep": _trial_gap_sweep,
    "lowerbound-posterior": _trial_posterior,
    "circle-demo": _trial_circle,
}


def run_trial(cfg: ExperimentConfig, i: int) -> dict[str, np.ndarray]:
    return TRIALS[cfg.experiment](cfg, i)


def _run_indexed(args):
    cfg, i = args
    return run_trial(cfg, i)


def worker_count(requested: int | None = None) -> int:
    if requested:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_trials(cfg: ExperimentConfig, workers: int | None = None) -> list[dict[str, np.ndarray]]:
    """All trials in trial-index order, optionally across a process pool."""
    n = min(worker_count(workers), cfg.N)
    jobs = [(cfg, i) for i in range(cfg.N)]
    if n <= 1:
        return [_run_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_indexed, jobs, chunksize=max(1, cfg.N // (4 * n))))


@dataclass
class ResultTable:
    """Append-only long-format rows ``(experiment, trial, t, metric, value)``."""

    rows: list[tuple[str, str, int, str, float]] = field(default_factory=list)

    def append(self, experiment: str, trial, t: int, metric: str, value: float) -> None:
        self.rows.append((experiment, str(trial), int(t), metric, float(value)))

    def __len__(self):
        return len(self.rows)

    def metrics(self) -> list[str]:
        return sorted({r[3] for r in self.rows})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for e, trial, t, metric, value in self.rows:
            w.writerow((e, trial, t, metric, _fmt(value)))
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path) -> ResultTable:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != HEADER:
                raise ValueError(f"{path}: expected header {','.join(HEADER)}")
            return cls([(e, trial, int(t), m, float(v)) for e, trial, t, m, v in reader])


def _record_points(T: int, stride: int) -> np.ndarray:
    pts = np.arange(stride, T + 1, stride)
    if pts.size == 0 or pts[-1] != T:
        pts = np.append(pts, T)
    return pts


def tabulate(cfg: ExperimentConfig, results: list[dict[str, np.ndarray]]):
    """Per-trial table and aggregate (mean / stderr across trials) table.

    Series of length T are recorded at every ``stride`` rounds plus the last
    round; one-element series are per-trial scalars and are written at t=0.
    """
    trials, agg = ResultTable(), ResultTable()
    points = _record_points(cfg.T, cfg.stride)
    names = list(results[0]) if results else []
    for name in names:
        stack = np.array([r[name] for r in results], dtype=float)
        if stack.shape[1] == 1:
            ts, cols = [0], stack
        else:
            ts, cols = points, stack[:, points - 1]
        for i in range(len(results)):
            for t, v in zip(ts, cols[i]):
                trials.append(cfg.experiment, i, t, name, v)
        mean = cols.mean(axis=0)
        se = cols.std(axis=0, ddof=1) / math.sqrt(len(results)) if len(results) > 1 else np.zeros_like(mean)
        for t, m, s in zip(ts, mean, se):
            agg.append(cfg.experiment, "mean", t, name, m)
            agg.append(cfg.experiment, "stderr", t, name, s)
    if cfg.experiment == "disparity" and results:
        # pooled per-person mistreatment rate over all trials and rounds
        for p in cfg.p:
            for group in ("majority", "minority"):
                bad = sum(r[f"p{p:g}.{group}.mistreated"][-1] for r in results)
                count = sum(r[f"p{p:g}.{group}.count"][-1] for r in results)
                agg.append(cfg.experiment, "pooled", cfg.T, f"p{p:g}.{group}.rate", bad / count if count else 0.0)
    return trials, agg


def _atomic_write(files: dict[Path, str]) -> None:
    staged = []
    try:
        for path, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def run(cfg: ExperimentConfig, out_dir=None, workers: int | None = None):
    """Run every trial and, if ``out_dir`` is given, write ``trials.csv`` and
    ``aggregate.csv`` there. Nothing is written unless all trials finish."""
    cfg.validate()
    results = run_trials(cfg, workers)
    trials, agg = tabulate(cfg, results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write({out / "trials.csv": trials.to_csv(), out / "aggregate.csv": agg.to_csv()})
    return trials, agg, results


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes).validate()
