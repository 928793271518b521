"""Sequential hyperparameter search with a Tree-structured Parzen Estimator.

Completed trials are split at the gamma-quantile of the objective into a
good and a bad set; per-dimension kernel densities (truncated Gaussians
with Scott's bandwidth on continuous/integer dimensions, smoothed
frequencies on categorical ones) are fit to each, candidates are drawn
from the good density and the one maximizing the good/bad density ratio is
suggested. The first ``n_startup`` trials are uniform random draws, as is
any step where the good/bad split degenerates.

Each suggestion derives its RNG from (seed, number of prior trials), so a
rerun with the same seed reproduces the exact trial sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError, OptimizationError

_EPS = 1e-300


@dataclass(frozen=True)
class Dimension:
    """One hyperparameter: continuous/integer range (optionally log-scaled)
    or a categorical choice set."""

    name: str
    kind: str  # "float" | "int" | "cat"
    lo: float | None = None
    hi: float | None = None
    log: bool = False
    choices: tuple = ()

    def __post_init__(self):
        if self.kind in ("float", "int"):
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ConfigError(f"dimension {self.name!r} needs lo < hi")
            if self.log and self.lo <= 0:
                raise ConfigError(f"log-scaled dimension {self.name!r} needs lo > 0")
        elif self.kind == "cat":
            if not self.choices:
                raise ConfigError(f"categorical dimension {self.name!r} needs choices")
        else:
            raise ConfigError(f"unknown dimension kind {self.kind!r}")

    def transform(self, x):
        return math.log10(x) if self.log else float(x)

    def untransform(self, t: float):
        x = 10.0**t if self.log else t
        x = min(max(x, self.lo), self.hi)
        if self.kind == "int":
            return int(min(max(round(x), self.lo), self.hi))
        return float(x)

    @property
    def bounds_t(self) -> tuple[float, float]:
        return self.transform(self.lo), self.transform(self.hi)

    def contains(self, x) -> bool:
        if self.kind == "cat":
            return x in self.choices
        if self.kind == "int" and x != int(x):
            return False
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple

    def __post_init__(self):
        if not self.dims:
            raise ConfigError("search space is empty")
        names = [d.name for d in self.dims]
        if len(names) != len(set(names)):
            raise ConfigError("dimension names must be unique")

    def __iter__(self):
        return iter(self.dims)

    def contains(self, assignment: dict) -> bool:
        return all(d.name in assignment and d.contains(assignment[d.name]) for d in self.dims)


@dataclass(frozen=True)
class Trial:
    assignment: dict
    objective: float
    status: str = "ok"  # "ok" | "failed"

    def __post_init__(self):
        if self.status == "ok" and not np.isfinite(self.objective):
            raise ConfigError("a successful trial must carry a finite objective")


@dataclass(frozen=True)
class TPEConfig:
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    categorical_smoothing: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")
        if self.n_startup < 0:
            raise ConfigError("n_startup must be >= 0")


def default_gbdt_space() -> SearchSpace:
    """Search domain for the tree-ensemble hyperparameters."""
    return SearchSpace((
        Dimension("n_trees", "int", 50, 800),
        Dimension("learning_rate", "float", 0.01, 0.3, log=True),
        Dimension("max_leaves", "int", 4, 64),
        Dimension("min_samples_leaf", "int", 5, 100),
        Dimension("feature_fraction", "float", 0.5, 1.0),
        Dimension("row_subsample", "float", 0.5, 1.0),
        Dimension("l2_leaf_reg", "float", 0.0, 10.0),
    ))


def _uniform_draw(space: SearchSpace, rng: np.random.Generator) -> dict:
    out = {}
    for d in space:
        if d.kind == "cat":
            out[d.name] = d.choices[int(rng.integers(len(d.choices)))]
        else:
            lo_t, hi_t = d.bounds_t
            out[d.name] = d.untransform(float(rng.uniform(lo_t, hi_t)))
    return out


def _scott_bandwidth(xs: np.ndarray, lo_t: float, hi_t: float) -> float:
    spread = float(xs.std())
    h = spread * len(xs) ** (-1 / 5)
    # floor keeps the mixture from collapsing onto an early cluster
    return float(min(max(h, (hi_t - lo_t) * 0.08), hi_t - lo_t))


class _NumericKDE:
    """Truncated Gaussian mixture over a transformed [lo, hi] interval.

    One kernel per observation with a Scott-rule bandwidth, plus a wide
    prior kernel at the domain midpoint so the tails never vanish.
    """

    def __init__(self, xs: np.ndarray, lo_t: float, hi_t: float):
        width = hi_t - lo_t
        h = _scott_bandwidth(xs, lo_t, hi_t)
        self.centers = np.append(xs, (lo_t + hi_t) / 2.0)
        self.h = np.append(np.full(len(xs), h), width)
        self.lo, self.hi = lo_t, hi_t
        self.norm = ndtr((hi_t - self.centers) / self.h) - ndtr((lo_t - self.centers) / self.h)

    def sample(self, rng: np.random.Generator) -> float:
        k = int(rng.integers(len(self.centers)))
        mu, h = self.centers[k], self.h[k]
        a = ndtr((self.lo - mu) / h)
        b = ndtr((self.hi - mu) / h)
        u = rng.uniform(a, b)
        return float(mu + h * ndtri(min(max(u, 1e-12), 1 - 1e-12)))

    def logpdf(self, x: float) -> float:
        z = (x - self.centers) / self.h
        dens = np.exp(-0.5 * z * z) / (self.h * math.sqrt(2 * math.pi))
        return math.log(float(np.mean(dens / np.maximum(self.norm, _EPS))) + _EPS)


class _CategoricalPMF:
    def __init__(self, values: list, choices: tuple, smoothing: float):
        counts = np.array([sum(v == c for v in values) for c in choices], dtype=float)
        self.choices = choices
        self.probs = (counts + smoothing) / (counts.sum() + smoothing * len(choices))

    def sample(self, rng: np.random.Generator):
        return self.choices[int(rng.choice(len(self.choices), p=self.probs))]

    def logpdf(self, x) -> float:
        return math.log(float(self.probs[self.choices.index(x)]) + _EPS)


def _fit_density(dim: Dimension, trials: list, config: TPEConfig):
    values = [t.assignment[dim.name] for t in trials]
    if dim.kind == "cat":
        return _CategoricalPMF(values, dim.choices, config.categorical_smoothing)
    xs = np.array([dim.transform(v) for v in values], dtype=float)
    return _NumericKDE(xs, *dim.bounds_t)


def suggest(history: Sequence[Trial], space: SearchSpace, config: TPEConfig) -> dict:
    """Next assignment to evaluate, conditioned on all prior trials."""
    rng = np.random.default_rng([config.seed, len(history)])
    ok = [t for t in history if t.status == "ok"]
    if len(ok) < config.n_startup:
        return _uniform_draw(space, rng)

    objectives = np.array([t.objective for t in ok])
    n_good = max(1, int(math.ceil(config.gamma * len(ok))))
    cut = np.sort(objectives)[n_good - 1]
    good = [t for t in ok if t.objective <= cut]  # boundary ties join the good set
    bad = [t for t in ok if t.objective > cut]
    if not bad:
        return _uniform_draw(space, rng)

    l_dens = {d.name: _fit_density(d, good, config) for d in space}
    g_dens = {d.name: _fit_density(d, bad, config) for d in space}

    best_score, best = -math.inf, None
    for _ in range(config.n_candidates):
        candidate = {}
        score = 0.0
        for d in space:
            if d.kind == "cat":
                value = l_dens[d.name].sample(rng)
                score += l_dens[d.name].logpdf(value) - g_dens[d.name].logpdf(value)
            else:
                t = l_dens[d.name].sample(rng)
                value = d.untransform(t)
                t_eval = d.transform(value)  # score the value actually proposed
                score += l_dens[d.name].logpdf(t_eval) - g_dens[d.name].logpdf(t_eval)
            candidate[d.name] = value
        if score > best_score:
            best_score, best = score, candidate
    return best


@dataclass
class TuneResult:
    best: Trial
    history: list = field(default_factory=list)

    def history_csv(self, space: SearchSpace) -> str:
        names = [d.name for d in space]
        lines = ["trial,status,objective," + ",".join(names)]
        for i, t in enumerate(self.history):
            obj = f"{t.objective:.9g}" if t.status == "ok" else ""
            values = ",".join(str(t.assignment.get(n, "")) for n in names)
            lines.append(f"{i},{t.status},{obj},{values}")
        return "\n".join(lines) + "\n"


def tune(
    evaluator: Callable[[dict], float],
    space: SearchSpace,
    config: TPEConfig,
    budget: int,
) -> TuneResult:
    """Run suggest -> evaluate for ``budget`` trials; return the argmin trial.

    Evaluator exceptions and non-finite objectives are recorded as failed
    trials and excluded from density fitting.
    """
    if budget < 1:
        raise ConfigError("budget must be >= 1 trial")
    history: list[Trial] = []
    for _ in range(budget):
        assignment = suggest(history, space, config)
        assert space.contains(assignment), "suggestion left the search domain"
        try:
            value = float(evaluator(assignment))
            trial = (
                Trial(assignment, value)
                if np.isfinite(value)
                else Trial(assignment, float("nan"), status="failed")
            )
        except Exception:
            trial = Trial(assignment, float("nan"), status="failed")
        history.append(trial)
    ok = [t for t in history if t.status == "ok"]
    if not ok:
        raise OptimizationError(f"all {budget} trials failed")
    best = min(ok, key=lambda t: t.objective)
    return TuneResult(best=best, history=history)


def random_search(
    evaluator: Callable[[dict], float],
    space: SearchSpace,
    seed: int,
    budget: int,
) -> TuneResult:
    """Pure uniform search: TPE with the startup phase covering the budget."""
    cfg = TPEConfig(n_startup=budget, seed=seed)
    return tune(evaluator, space, cfg, budget)
