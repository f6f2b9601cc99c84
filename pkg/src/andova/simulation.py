"""Replicated mixture scenarios and a ROC harness.

Each replicate sample is drawn from a three-component normal mixture whose
weights are a softmax of independent standard-normal logits, so replicates
within a group differ even when group centroids coincide.  Group 1 always
uses the null centroid; the remaining groups use the scenario centroid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np
from scipy import stats

from .model import FitConfig, fit
from .partition import Dataset

__all__ = [
    "SCENARIOS",
    "OMEGA",
    "ScenarioSpec",
    "RocResult",
    "centroid",
    "mixture_weights",
    "generate",
    "auc",
    "run_roc",
    "run_statistics",
    "RunError",
    "iter_datasets",
    "joint_null_methods",
]

log = logging.getLogger(__name__)

OMEGA = (0.0, 3.2)

# (means, sds) of the three mixture components
_NULL = (np.array([1.0, 1.5, 2.5]), np.array([0.05, 0.2, 0.1]))
SCENARIOS = {
    "null": _NULL,
    "local_shift": (np.array([1.1, 1.5, 2.5]), np.array([0.05, 0.2, 0.1])),
    "local_dispersion": (np.array([1.0, 1.5, 2.5]), np.array([0.15, 0.2, 0.1])),
    "global_shift": (np.array([1.05, 1.55, 2.55]), np.array([0.05, 0.2, 0.1])),
    "global_dispersion": (np.array([1.0, 1.5, 2.5]), np.array([0.1, 0.4, 0.2])),
}


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str = "null"
    k: int = 2
    replicates: int = 4
    n: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if self.k < 2 or self.replicates < 1 or self.n < 1:
            raise ValueError("need k >= 2, replicates >= 1, n >= 1")


def centroid(scenario: str, group: int):
    """Component means and sds of a group's centroid (group 0 is always null)."""
    return SCENARIOS["null" if group == 0 else scenario]


def mixture_weights(z: np.ndarray) -> np.ndarray:
    """Softmax of logits along the last axis."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _draw_mixture(rng, n, weights, means, sds, lo, hi):
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = n - filled
        comp = rng.choice(3, size=m, p=weights)
        x = rng.normal(means[comp], sds[comp])
        x = x[(x >= lo) & (x <= hi)]
        out[filled : filled + x.size] = x
        filled += x.size
    return out


def generate(spec: ScenarioSpec, equal_logits: bool = False) -> Dataset:
    """Draw one replicated dataset.

    ``equal_logits`` forces the three logits of every replicate to be
    equal (uniform mixture weights); it exists for testing.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = OMEGA
    groups = []
    for i in range(spec.k):
        means, sds = centroid(spec.scenario, i)
        probs = rng.dirichlet(np.ones(spec.replicates))
        sizes = rng.multinomial(spec.n, probs)
        reps = []
        for j in range(spec.replicates):
            z = np.zeros(3) if equal_logits else rng.standard_normal(3)
            w = mixture_weights(z)
            reps.append(_draw_mixture(rng, sizes[j], w, means, sds, lo, hi))
        groups.append(reps)
    return Dataset.from_groups(groups, labels=[f"group{i + 1}" for i in range(spec.k)])


def auc(null_stats, alt_stats) -> float:
    """Area under the ROC curve for calling alternatives by *small* statistics.

    Mann-Whitney form: ``P(null > alt) + P(null == alt) / 2`` from pooled ranks.
    """
    s0 = np.asarray(null_stats, dtype=float)
    s1 = np.asarray(alt_stats, dtype=float)
    if s0.size == 0 or s1.size == 0:
        raise ValueError("both samples must be non-empty")
    ranks = stats.rankdata(np.concatenate([s0, s1]))
    r0 = ranks[: s0.size].sum()
    u = r0 - s0.size * (s0.size + 1) / 2.0
    return float(u / (s0.size * s1.size))


@dataclass
class RocResult:
    """Per-method statistics under null and alternative runs, with AUCs."""

    null_stats: dict[str, np.ndarray]
    alt_stats: dict[str, np.ndarray]
    auc: dict[str, float]
    scenario: str

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "auc": dict(self.auc),
            "null": {m: v.tolist() for m, v in self.null_stats.items()},
            "alternative": {m: v.tolist() for m, v in self.alt_stats.items()},
        }


class RunError(RuntimeError):
    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run


def run_statistics(
    scenario: str,
    n_runs: int,
    methods: dict[str, Callable[[Dataset], float]],
    base: ScenarioSpec | None = None,
    seed: int = 0,
    on_result: Callable[[dict], None] | None = None,
) -> dict[str, np.ndarray]:
    """Fit every method on ``n_runs`` datasets of one scenario.

    Run ``r`` uses data seed derived from ``(seed, scenario, r)`` so runs are
    independent of each other and of the order they execute in.
    """
    base = base or ScenarioSpec()
    out = {m: np.empty(n_runs) for m in methods}
    tag = sorted(SCENARIOS).index(scenario)
    for r in range(n_runs):
        ss = np.random.SeedSequence([seed, tag, r])
        spec = replace(base, scenario=scenario, seed=int(ss.generate_state(1)[0]))
        data = generate(spec)
        for m, fn in methods.items():
            try:
                val = float(fn(data))
            except Exception as exc:
                raise RunError(f"run {r} ({scenario}, {m}) failed: {exc}", run=r) from exc
            out[m][r] = val
            if on_result is not None:
                on_result({"run": r, "scenario": scenario, "method": m, "statistic": val})
        log.debug("run %d/%d of %s done", r + 1, n_runs, scenario)
    return out


def run_roc(
    n_runs: int,
    scenario: str,
    methods: dict[str, Callable[[Dataset], float]],
    base: ScenarioSpec | None = None,
    seed: int = 0,
    null_stats: dict[str, np.ndarray] | None = None,
    on_result: Callable[[dict], None] | None = None,
) -> RocResult:
    """ROC/AUC of each method, alternative ``scenario`` against the null.

    Precomputed null statistics can be passed to share them across
    scenarios.
    """
    if n_runs < 2:
        raise ValueError("at least 2 runs are needed for a ROC curve")
    if null_stats is None:
        null_stats = run_statistics("null", n_runs, methods, base, seed, on_result)
    alt = run_statistics(scenario, n_runs, methods, base, seed, on_result)
    aucs = {m: auc(null_stats[m], alt[m]) for m in methods}
    return RocResult(dict(null_stats), alt, aucs, scenario)


def iter_datasets(spec: ScenarioSpec, n_runs: int) -> Iterable[Dataset]:
    """``n_runs`` datasets from consecutive seeds starting at ``spec.seed``."""
    for r in range(n_runs):
        yield generate(replace(spec, seed=spec.seed + r))


def joint_null_methods(config: FitConfig | None = None) -> dict[str, Callable[[Dataset], float]]:
    """The two compared statistics, ``1 - PJAP`` of the full and the ``nu = inf`` fit."""
    config = config or FitConfig()
    full = replace(config, omega=OMEGA, restrict_nu_infinity=False, model="graphical")
    inf = replace(full, restrict_nu_infinity=True)
    return {
        "andova": lambda d: 1.0 - fit(d, full).pjap,
        "nu_inf": lambda d: 1.0 - fit(d, inf).pjap,
    }
