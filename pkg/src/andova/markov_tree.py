"""Markov-tree prior over window states and exact message passing.

Nodes are heap-ordered (children of ``t`` are ``2t+1`` and ``2t+2`` when
those indices exist).  Each node ``A`` carries a 2x2 transition matrix
``rho[A, s, s']`` = P(S(A) = s' | S(parent) = s); the root's two rows are
equal and hold its unconditional prior.

Upward messages are kept in the log domain and rescaled per node so their
larger component is 0; the per-node constants cancel in every posterior
transition and are recorded only for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "TransitionSpec",
    "MessageSet",
    "PosteriorTransitions",
    "level_transitions",
    "upward_messages",
    "posterior_transitions",
    "downward_marginals",
    "prior_marginals",
    "prjap_closed_form",
    "expected_signals",
    "elicit_beta",
    "elicit_delta",
    "ElicitationError",
]


class ElicitationError(ValueError):
    pass


def _levels(n_nodes: int) -> list[slice]:
    out = []
    j = 0
    while 2**j - 1 < n_nodes:
        out.append(slice(2**j - 1, min(2 ** (j + 1) - 1, n_nodes)))
        j += 1
    return out


@dataclass
class TransitionSpec:
    """Per-node 2x2 transition matrices, shape ``(W, 2, 2)``."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 3 or self.rho.shape[1:] != (2, 2):
            raise ValueError("transition array must have shape (W, 2, 2)")
        if np.any(self.rho < 0) or np.any(self.rho > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(self.rho.sum(axis=2) - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1")

    @property
    def n_nodes(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_root_and_rows(cls, root_alt: float, rho01, rho11) -> "TransitionSpec":
        """Build from the root's P(S=1) and per-node ``rho01``/``rho11`` arrays."""
        rho01 = np.asarray(rho01, dtype=float)
        rho11 = np.asarray(rho11, dtype=float)
        W = rho01.shape[0]
        rho = np.empty((W, 2, 2))
        rho[:, 0, 1] = rho01
        rho[:, 0, 0] = 1.0 - rho01
        rho[:, 1, 1] = rho11
        rho[:, 1, 0] = 1.0 - rho11
        rho[0] = [[1.0 - root_alt, root_alt], [1.0 - root_alt, root_alt]]
        return cls(rho)


def level_transitions(beta: float, delta: float, n_levels: int) -> TransitionSpec:
    """Level-symmetric prior over ``n_levels`` levels of windows.

    ``rho01(j) = min(1, beta 2^-j)``, ``rho11(j) = delta`` and the root is
    alternative with probability ``min(1, beta / 2)``.
    """
    if beta < 0 or not 0 <= delta <= 1:
        raise ValueError(f"need beta >= 0 and delta in [0, 1], got {beta}, {delta}")
    W = 2**n_levels - 1
    if W == 0:
        return TransitionSpec(np.zeros((0, 2, 2)))
    lev = np.concatenate([np.full(2**j, j) for j in range(n_levels)])
    rho01 = np.minimum(1.0, beta * 2.0 ** (-lev.astype(float)))
    return TransitionSpec.from_root_and_rows(min(1.0, beta / 2.0), rho01, np.full(W, delta))


@dataclass
class MessageSet:
    """Rescaled upward messages ``log phi`` (``(W, 2)``) and the log scale removed."""

    log_phi: np.ndarray
    log_scale: np.ndarray
    degenerate: np.ndarray | None = None

    @property
    def phi(self) -> np.ndarray:
        return np.exp(self.log_phi)

    def unscaled_log_phi(self) -> np.ndarray:
        """``log phi`` with every rescaling in the node's subtree added back."""
        W = self.log_phi.shape[0]
        sub = self.log_scale.copy()
        for t in range(W - 1, 0, -1):
            p = (t - 1) // 2
            if self.degenerate is None or not self.degenerate[p]:
                sub[p] += sub[t]
        return self.log_phi + sub[:, None]


@dataclass
class PosteriorTransitions:
    """Posterior transition matrices, marginal state probabilities and PJAP."""

    rho: np.ndarray
    marginal: np.ndarray | None = None
    pjap: float | None = None

    @property
    def pmap(self) -> np.ndarray:
        return self.marginal[:, 1]


def _child_sums(log_phi: np.ndarray, sl: slice, W: int) -> np.ndarray:
    idx = np.arange(sl.start, sl.stop)
    out = np.zeros((idx.size, 2))
    for c in (2 * idx + 1, 2 * idx + 2):
        has = c < W
        out[has] += log_phi[c[has]]
    return out


def _log_terms(rho, log_bf, child):
    # u[s, s'] = log rho[s, s'] + log m[s'] + child[s']
    with np.errstate(divide="ignore"):
        lr = np.log(rho)
    m = np.stack([np.zeros_like(log_bf), log_bf], axis=1)
    return lr + (m + child)[:, None, :]


def upward_messages(
    log_bf: np.ndarray,
    transitions: TransitionSpec,
    degenerate: np.ndarray | None = None,
) -> MessageSet:
    """Leaf-to-root pass computing every node's message ``phi``.

    ``phi_s(A) = sum_s' rho[A,s,s'] m_s'(A) phi_s'(A_l) phi_s'(A_r)`` with
    ``m = (1, BF)``; missing children contribute factor 1 and degenerate
    nodes are pinned to ``phi = (1, 1)``.
    """
    log_bf = np.asarray(log_bf, dtype=float)
    W = transitions.n_nodes
    if log_bf.shape != (W,):
        raise ValueError(f"need one log Bayes factor per node ({W}), got {log_bf.shape}")
    deg = np.zeros(W, dtype=bool) if degenerate is None else np.asarray(degenerate, bool)
    log_phi = np.zeros((W, 2))
    log_scale = np.zeros(W)
    for sl in reversed(_levels(W)):
        child = _child_sums(log_phi, sl, W)
        u = _log_terms(transitions.rho[sl], log_bf[sl], child)
        lp = special.logsumexp(u, axis=2)
        lp[deg[sl]] = 0.0
        scale = lp.max(axis=1)
        log_phi[sl] = lp - scale[:, None]
        log_scale[sl] = scale
    return MessageSet(log_phi, log_scale, deg)


def posterior_transitions(
    messages: MessageSet,
    transitions: TransitionSpec,
    log_bf: np.ndarray,
    degenerate: np.ndarray | None = None,
) -> PosteriorTransitions:
    """Posterior transition matrices given the upward messages.

    Each row is ``rho[s, s'] m_s' phi_s'(A_l) phi_s'(A_r)`` normalised over
    ``s'``; the normaliser is ``phi_s(A)`` up to the node's rescaling.
    """
    W = transitions.n_nodes
    log_bf = np.asarray(log_bf, dtype=float)
    deg = np.zeros(W, dtype=bool) if degenerate is None else np.asarray(degenerate, bool)
    post = np.empty((W, 2, 2))
    for sl in _levels(W):
        child = _child_sums(messages.log_phi, sl, W)
        u = _log_terms(transitions.rho[sl], log_bf[sl], child)
        norm = special.logsumexp(u, axis=2, keepdims=True)
        if not np.all(np.isfinite(norm)):
            raise FloatingPointError("zero upward message; transition prior has no support")
        p = np.exp(u - norm)
        p /= p.sum(axis=2, keepdims=True)
        post[sl] = p
    post[deg] = transitions.rho[deg]
    return PosteriorTransitions(post)


def _downward(rho: np.ndarray) -> tuple[np.ndarray, float]:
    W = rho.shape[0]
    marg = np.empty((W, 2))
    if W == 0:
        return marg, 0.0
    marg[0] = rho[0, 0]
    for sl in _levels(W)[1:]:
        idx = np.arange(sl.start, sl.stop)
        parent = marg[(idx - 1) // 2]
        marg[sl] = np.einsum("ws,wst->wt", parent, rho[sl])
    np.clip(marg, 0.0, 1.0, out=marg)
    with np.errstate(divide="ignore"):
        log_null = np.log(rho[:, 0, 0]).sum()
    joint = float(-np.expm1(log_null))
    return marg, min(1.0, max(0.0, joint))


def downward_marginals(post: PosteriorTransitions) -> PosteriorTransitions:
    """Root-to-leaf pass: per-node marginals and the joint alternative probability.

    The joint probability is ``1 - prod_A rho~[A, 0, 0]`` over all nodes.
    """
    marg, joint = _downward(post.rho)
    post.marginal = marg
    post.pjap = joint
    return post


def prior_marginals(transitions: TransitionSpec) -> tuple[np.ndarray, float]:
    """Prior marginal alternative probabilities per node and the prior joint one."""
    marg, joint = _downward(transitions.rho)
    return marg[:, 1], joint


def prjap_closed_form(beta: float, n_levels: int) -> float:
    """Prior joint alternative probability of the level rule, in closed form.

    ``1 - (1 - min(1, beta/2)) prod_{j=1}^{L-1} (1 - min(1, beta 2^-j))^(2^j)``.
    """
    if n_levels <= 0:
        return 0.0
    log_null = np.log1p(-min(1.0, beta / 2.0)) if beta < 2 else -np.inf
    for j in range(1, n_levels):
        r = min(1.0, beta * 2.0**-j)
        log_null += 2**j * (np.log1p(-r) if r < 1 else -np.inf)
    return float(-np.expm1(log_null))


def expected_signals(beta: float, delta: float, n_levels: int) -> float:
    """Sum of prior marginal alternative probabilities over all nodes."""
    if n_levels <= 0:
        return 0.0
    p = min(1.0, beta / 2.0)
    total = p
    for j in range(1, n_levels):
        r = min(1.0, beta * 2.0**-j)
        p = (1.0 - p) * r + p * delta
        total += 2**j * p
    return float(total)


def elicit_beta(target_prjap: float, n_levels: int, beta_max: float = 2.0) -> float:
    """Solve ``prjap_closed_form(beta) = target`` for beta in ``[0, beta_max]``."""
    if not 0.0 <= target_prjap < 1.0:
        raise ElicitationError(f"target PrJAP must lie in [0, 1), got {target_prjap}")
    if target_prjap == 0.0:
        return 0.0
    top = prjap_closed_form(beta_max, n_levels)
    if top < target_prjap:
        raise ElicitationError(
            f"PrJAP {target_prjap} unreachable with beta <= {beta_max} (max {top:.6g})"
        )
    return float(
        optimize.brentq(
            lambda b: prjap_closed_form(b, n_levels) - target_prjap,
            0.0, beta_max, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500,
        )
    )


def elicit_delta(target_signals: float, beta: float, n_levels: int) -> float:
    """Solve ``expected_signals(beta, delta) = target`` for delta in ``[0, 1]``."""
    floor = expected_signals(beta, 0.0, n_levels)
    ceil = expected_signals(beta, 1.0, n_levels)
    if not floor - 1e-12 <= target_signals <= ceil + 1e-12:
        raise ElicitationError(
            f"expected signal count {target_signals} outside attainable range "
            f"[{floor:.6g}, {ceil:.6g}] for beta={beta}"
        )
    if target_signals <= floor:
        return 0.0
    if target_signals >= ceil:
        return 1.0
    return float(
        optimize.brentq(
            lambda d: expected_signals(beta, d, n_levels) - target_signals,
            0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500,
        )
    )
