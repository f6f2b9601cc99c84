"""Draws from the joint posterior of states and window parameters.

States come exactly from the posterior Markov tree.  Given the states,
each window's precision is drawn on the grid, the PACs from truncated
normal approximations at the stored modes, and replicate-level PACs from
their conjugate Beta updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evidence import TreeEvidence
from .markov_tree import PosteriorTransitions, _levels
from .partition import CountTree

__all__ = ["PosteriorDraw", "sample_states", "sample_params", "replicate_update"]

MAX_REJECT = 100
_EPS = 1e-12


def sample_states(post: PosteriorTransitions, seed=None, size: int | None = None) -> np.ndarray:
    """Top-down draw of window states.

    Returns shape ``(W,)`` or ``(size, W)`` of 0/1 values.  The root row of
    the posterior transitions is its marginal.
    """
    rng = np.random.default_rng(seed)
    rho = post.rho
    W = rho.shape[0]
    n = 1 if size is None else int(size)
    S = np.zeros((n, W), dtype=np.int8)
    for sl in _levels(W):
        idx = np.arange(sl.start, sl.stop)
        parent = np.zeros((n, idx.size), dtype=np.int64) if sl.start == 0 else S[:, (idx - 1) // 2]
        p1 = rho[idx[None, :], parent, 1]
        S[:, sl] = rng.random((n, idx.size)) < p1
    return S[0] if size is None else S


@dataclass
class PosteriorDraw:
    """One joint draw over tested windows.

    ``nu`` is ``(W,)``; ``theta`` is ``(W, k)`` (rows constant where
    ``states == 0``); ``theta_rep`` is ``(W, R)``.  ``clamped`` flags windows
    where a truncated-normal draw hit the rejection cap.
    """

    states: np.ndarray
    nu: np.ndarray
    theta: np.ndarray
    theta_rep: np.ndarray
    clamped: np.ndarray


def replicate_update(theta_i, nu, n_left, n):
    """Conjugate update ``(theta~, nu~)`` of a replicate PAC; ``nu = inf`` pins it."""
    theta_i = np.asarray(theta_i, dtype=float)
    nu = np.asarray(nu, dtype=float)
    n_left = np.asarray(n_left, dtype=float)
    n = np.asarray(n, dtype=float)
    inf = np.isinf(nu)
    with np.errstate(invalid="ignore"):
        tt = np.where(inf, theta_i, (theta_i * nu + n_left) / (nu + n))
    return tt, nu + n


def _truncnorm(rng, mean, sd):
    """Normal draws truncated to (0, 1) by rejection; clamps after the cap."""
    out = rng.normal(mean, sd)
    bad = (out <= 0) | (out >= 1)
    tries = 1
    while np.any(bad) and tries < MAX_REJECT:
        out[bad] = rng.normal(mean[bad], sd[bad])
        bad = (out <= 0) | (out >= 1)
        tries += 1
    if np.any(bad):
        out[bad] = np.clip(mean[bad], _EPS, 1 - _EPS)
    return out, bad


def sample_params(
    states: np.ndarray,
    evidence: TreeEvidence,
    counts: CountTree,
    seed=None,
) -> PosteriorDraw:
    """Draw ``nu``, group PACs and replicate PACs for every tested window.

    ``nu`` has mass proportional to ``L0 w`` (null) or ``prod_i L_i w``
    (alternative) on the grid; PAC draws use ``N(theta_hat, sd^2)`` with the
    mode's curvature mapped from the logit scale.
    """
    rng = np.random.default_rng(seed)
    states = np.asarray(states).astype(bool)
    W, k, T = evidence.log_L1.shape
    grid = evidence.grid
    rows = np.arange(W)

    w0 = evidence.posterior_nu_weights(0)
    w1 = evidence.posterior_nu_weights(1)
    w = np.where(states[:, None], w1, w0)
    cum = np.cumsum(w, axis=1)
    h = (rng.random(W)[:, None] > cum).sum(axis=1)
    h = np.minimum(h, T - 1)
    nu = grid.points[h]

    # mode and logit curvature at the drawn grid point
    th0 = evidence.theta0[rows, h]
    c0 = evidence.curv0[rows, h]
    th1 = evidence.theta1[rows, :, h]
    c1 = evidence.curv1[rows, :, h]
    mean = np.where(states[:, None], th1, th0[:, None])
    curv = np.where(states[:, None], c1, c0[:, None])
    # d(theta)/d(eta) = theta (1 - theta)
    sd = mean * (1 - mean) / np.sqrt(-curv)
    theta, bad = _truncnorm(rng, mean.ravel(), sd.ravel())
    theta = theta.reshape(W, k)
    bad = bad.reshape(W, k)
    # null windows share one PAC across groups
    theta[~states] = theta[~states, :1]
    clamped = np.where(states, bad.any(axis=1), bad[:, 0])

    nl = counts.left.astype(float)
    n = counts.n[:W].astype(float)
    t_i = theta[:, counts.group]
    tt, vv = replicate_update(t_i, nu[:, None], nl, n)
    rep = np.empty_like(tt)
    fin = np.isfinite(vv)
    rep[~fin] = tt[~fin]
    rep[fin] = rng.beta(tt[fin] * vv[fin], (1 - tt[fin]) * vv[fin])
    np.clip(rep, _EPS, 1 - _EPS, out=rep)
    return PosteriorDraw(states.astype(np.int8), nu, theta, rep, clamped)
