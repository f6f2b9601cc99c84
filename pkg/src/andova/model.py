"""End-to-end fitting: partition, counts, evidence, tree posterior, decisions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decision import DecisionReport, decide
from .evidence import BetaPrior, NuGrid, TreeEvidence, compute_evidence, effect_size
from .markov_tree import (
    PosteriorTransitions,
    TransitionSpec,
    downward_marginals,
    level_transitions,
    posterior_transitions,
    prior_marginals,
    upward_messages,
)
from .msbb import fit_independent
from .partition import CountTree, Dataset, WindowTree, bin_counts, build_ndp, default_omega

__all__ = ["FitConfig", "FitResult", "fit", "fit_counts"]


@dataclass
class FitConfig:
    K: int = 11
    beta: float = 0.07
    delta: float = 0.4
    T: int = 50
    l: float = -1.0
    u: float = 4.0
    prior0: tuple[float, float] = (0.5, 0.5)
    prior1: tuple[float, float] = (0.5, 0.5)
    fdr: float | None = 0.1
    threshold: float | None = None
    restrict_nu_infinity: bool = False
    omega: tuple[float, float] | None = None
    model: str = "graphical"
    inner: str = "corrected"

    def __post_init__(self):
        if self.model not in ("graphical", "independent"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.inner not in ("corrected", "beta", "gauss"):
            raise ValueError(f"unknown inner approximation {self.inner!r}")
        if self.T < 1 or not self.l < self.u:
            raise ValueError("need T >= 1 and l < u for the precision grid")
        if self.fdr is not None and not 0 < self.fdr < 1:
            raise ValueError("FDR target must lie in (0, 1)")
        self.prior0 = tuple(float(x) for x in self.prior0)
        self.prior1 = tuple(float(x) for x in self.prior1)
        if self.omega is not None:
            self.omega = tuple(float(x) for x in self.omega)

    def grid(self) -> NuGrid:
        if self.restrict_nu_infinity:
            return NuGrid.infinity()
        return NuGrid.log_uniform(self.T, self.l, self.u)


@dataclass
class FitResult:
    """Everything a fit produces; arrays are over tested windows in heap order."""

    tree: WindowTree
    counts: CountTree
    evidence: TreeEvidence
    pmap: np.ndarray
    prmap: np.ndarray
    effects: np.ndarray
    decision: DecisionReport
    pjap: float | None = None
    prjap: float | None = None
    transitions: TransitionSpec | None = None
    posterior: PosteriorTransitions | None = field(default=None, repr=False)

    @property
    def n_tested(self) -> int:
        return self.pmap.shape[0]


def fit_counts(
    tree: WindowTree,
    counts: CountTree,
    config: FitConfig | None = None,
    backend: str | None = None,
) -> FitResult:
    config = config or FitConfig()
    p0, p1 = BetaPrior(*config.prior0), BetaPrior(*config.prior1)
    ev = compute_evidence(counts, config.grid(), p0, p1, config.inner, backend)
    trans = level_transitions(config.beta, config.delta, counts.max_depth)
    prmap, prjap = prior_marginals(trans)
    if config.model == "independent":
        ind = fit_independent(counts, evidence=ev, beta=config.beta)
        pmap, effects, pjap, post = ind.pmap, ind.effects, None, None
        prmap, prjap = ind.rho, None
    else:
        msg = upward_messages(ev.log_BF, trans, ev.degenerate)
        post = downward_marginals(posterior_transitions(msg, trans, ev.log_BF, ev.degenerate))
        pmap, pjap = post.pmap.copy(), post.pjap
        effects = effect_size(ev, pmap)
    dec = decide(pmap, config.threshold, config.fdr)
    return FitResult(tree, counts, ev, pmap, prmap, effects, dec, pjap, prjap, trans, post)


def fit(data: Dataset, config: FitConfig | None = None, backend: str | None = None) -> FitResult:
    """Fit the model to a replicated multi-group dataset."""
    config = config or FitConfig()
    data.validate()
    lo, hi = config.omega if config.omega is not None else default_omega(data)
    tree = build_ndp(lo, hi, config.K)
    return fit_counts(tree, bin_counts(tree, data), config, backend)
