"""Significance calls from posterior marginal alternative probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DecisionReport", "bayesian_fdr", "threshold_for_fdr", "decide"]


def _check(pmaps) -> np.ndarray:
    p = np.asarray(pmaps, dtype=float).ravel()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("PMAPs must lie in [0, 1]")
    return p


def bayesian_fdr(pmaps, c: float) -> float | None:
    """``1 - mean(PMAP)`` over windows with ``PMAP > c``; None if nothing is called."""
    p = _check(pmaps)
    called = p[p > c]
    if called.size == 0:
        return None
    return float(1.0 - called.sum() / called.size)


def threshold_for_fdr(pmaps, target: float) -> float:
    """Smallest threshold whose Bayesian FDR does not exceed ``target``.

    Candidates are 0 and the distinct PMAP values; each one fixes a called
    set, and the FDR is constant between consecutive candidates.  Returns 1
    when no candidate calls anything within the target.
    """
    if not 0 < target < 1:
        raise ValueError("target FDR must lie in (0, 1)")
    p = _check(pmaps)
    if p.size == 0:
        return 1.0
    # sort descending; calling the top m windows corresponds to c = next value down
    desc = np.sort(p)[::-1]
    fdr = 1.0 - np.cumsum(desc) / np.arange(1, desc.size + 1)
    best = 1.0
    for m in range(desc.size, 0, -1):
        c = desc[m] if m < desc.size else 0.0
        if m < desc.size and desc[m] == desc[m - 1]:
            continue  # ties cannot be split by a strict threshold
        if desc[m - 1] <= c:
            continue
        if fdr[m - 1] <= target:
            best = float(c)
            break
    return best


@dataclass
class DecisionReport:
    threshold: float
    significant: list[int] = field(default_factory=list)
    fdr: float | None = None
    target_fdr: float | None = None


def decide(pmaps, threshold: float | None = None, target_fdr: float | None = 0.1) -> DecisionReport:
    """Call windows with ``PMAP > threshold``.

    Without an explicit threshold it is chosen by :func:`threshold_for_fdr`;
    with ``target_fdr=None`` as well the fixed rule ``c = 0.5`` is used.
    """
    p = _check(pmaps)
    if threshold is None:
        threshold = 0.5 if target_fdr is None else threshold_for_fdr(p, target_fdr)
    sig = np.flatnonzero(p > threshold).tolist()
    return DecisionReport(float(threshold), sig, bayesian_fdr(p, threshold), target_fdr)
