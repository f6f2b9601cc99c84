"""Window-autonomous model: each window tested on its own prior odds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .evidence import JEFFREYS, BetaPrior, NuGrid, TreeEvidence, compute_evidence, effect_size
from .markov_tree import level_transitions
from .partition import CountTree

__all__ = ["pmap_independent", "level_rho", "IndependentFit", "fit_independent"]


def pmap_independent(log_bf, rho):
    """Posterior alternative probability ``rho BF / ((1 - rho) + rho BF)``.

    Evaluated as ``expit(logit(rho) + log BF)``; ``rho`` of exactly 0 or 1
    is returned unchanged whatever the evidence.
    """
    log_bf = np.asarray(log_bf, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any((rho < 0) | (rho > 1)):
        raise ValueError("rho must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        lo = np.log(rho) - np.log1p(-rho)
    out = special.expit(lo + log_bf)
    out = np.where(rho == 0, 0.0, np.where(rho == 1, 1.0, out))
    out = np.where(log_bf == 0, rho, out)
    return out if out.ndim else float(out)


def level_rho(beta: float, n_levels: int) -> np.ndarray:
    """Per-window prior alternative probability under the level rule."""
    return level_transitions(beta, 0.0, n_levels).rho[:, 0, 1].copy()


@dataclass
class IndependentFit:
    evidence: TreeEvidence
    rho: np.ndarray
    pmap: np.ndarray
    effects: np.ndarray


def fit_independent(
    counts: CountTree,
    grid: NuGrid | None = None,
    prior0: BetaPrior = JEFFREYS,
    prior1: BetaPrior = JEFFREYS,
    rho=None,
    beta: float = 0.07,
    restrict_nu_infinity: bool = False,
    inner: str = "corrected",
    backend: str | None = None,
    evidence: TreeEvidence | None = None,
) -> IndependentFit:
    """PMAPs and effect sizes of every tested window, windows treated independently.

    ``rho`` defaults to the level rule with the given ``beta``; a scalar is
    broadcast.  Degenerate windows keep ``PMAP = rho``.
    """
    if evidence is None:
        if restrict_nu_infinity:
            grid = NuGrid.infinity()
        evidence = compute_evidence(counts, grid, prior0, prior1, inner, backend)
    W = evidence.n_windows
    rho = level_rho(beta, counts.max_depth) if rho is None else np.broadcast_to(
        np.asarray(rho, dtype=float), (W,)
    ).copy()
    pmap = np.asarray(pmap_independent(evidence.log_BF, rho), dtype=float)
    pmap[evidence.degenerate] = rho[evidence.degenerate]
    return IndependentFit(evidence, rho, pmap, effect_size(evidence, pmap))
