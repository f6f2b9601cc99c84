"""Window-level Beta-Binomial evidence.

For each window the marginal likelihoods under the null (one shared PAC
for all groups) and the alternative (one PAC per group) are computed by
integrating the PAC out with a Laplace-type approximation at each point of
a precision grid, then summing over the grid in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _kernels
from .partition import CountTree

__all__ = [
    "EvidenceError",
    "NuGrid",
    "BetaPrior",
    "WindowEvidence",
    "TreeEvidence",
    "log_D",
    "laplace_inner",
    "window_evidence",
    "compute_evidence",
    "effect_size",
]

THETA_CLAMP = 1e-8


class EvidenceError(ArithmeticError):
    """Mode search failed; carries the window and the last iterate."""

    def __init__(self, message, window=None, nu=None, last_theta=None):
        super().__init__(message)
        self.window = window
        self.nu = nu
        self.last_theta = last_theta


@dataclass(frozen=True)
class NuGrid:
    """Precision grid with prior-CDF increments as weights.

    Points are the midpoints of ``T`` equal cells of ``[l, u]`` on the
    log10 scale, so a log10-uniform prior gives every point weight ``1/T``.
    """

    points: np.ndarray
    weights: np.ndarray
    l: float = -1.0
    u: float = 4.0
    include_infinity: bool = False

    @classmethod
    def log_uniform(cls, T: int = 50, l: float = -1.0, u: float = 4.0) -> "NuGrid":
        if T < 1 or not l < u:
            raise ValueError(f"bad grid: T={T}, l={l}, u={u}")
        e = l + (u - l) * (np.arange(T) + 0.5) / T
        return cls(10.0**e, np.full(T, 1.0 / T), float(l), float(u), False)

    @classmethod
    def infinity(cls) -> "NuGrid":
        return cls(np.array([np.inf]), np.array([1.0]), np.inf, np.inf, True)

    @property
    def T(self) -> int:
        return self.points.shape[0]

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


@dataclass(frozen=True)
class BetaPrior:
    shape1: float = 0.5
    shape2: float = 0.5

    def __post_init__(self):
        if not (self.shape1 > 0 and self.shape2 > 0):
            raise ValueError(f"Beta shapes must be positive: {self.shape1}, {self.shape2}")

    def logpdf(self, theta):
        return special.xlogy(self.shape1 - 1, theta) + special.xlog1py(
            self.shape2 - 1, -np.asarray(theta)
        ) - special.betaln(self.shape1, self.shape2)


JEFFREYS = BetaPrior(0.5, 0.5)


def log_D(n1, n2, theta, nu):
    """Log Beta-Binomial likelihood kernel ``log D(n1, n2, theta, nu)``.

    ``log B(theta nu + n1, (1 - theta) nu + n2) - log B(theta nu, (1 - theta) nu)``
    for finite ``nu``; ``n1 log theta + n2 log(1 - theta)`` for ``nu = inf``.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    theta = np.asarray(theta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(~((theta > 0) & (theta < 1))):
        raise ValueError("theta must lie strictly inside (0, 1)")
    if np.any(n1 < 0) or np.any(n2 < 0) or np.any(~(nu > 0)):
        raise ValueError("counts must be non-negative and nu positive")
    inf = np.isinf(nu)
    nuf = np.where(inf, 1.0, nu)
    a = theta * nuf
    b = (1.0 - theta) * nuf
    fin = (
        special.gammaln(a + n1) - special.gammaln(a)
        + special.gammaln(b + n2) - special.gammaln(b)
        - special.gammaln(nuf + n1 + n2) + special.gammaln(nuf)
    )
    lim = special.xlogy(n1, theta) + special.xlog1py(n2, -theta)
    out = np.where(inf, lim, fin)
    return out if out.ndim else float(out)


def _mode(inner: str) -> int:
    try:
        return _kernels.MODES[inner]
    except KeyError:
        raise ValueError(f"unknown inner approximation {inner!r}; use one of {sorted(_kernels.MODES)}") from None


def laplace_inner(counts, nu: float, prior: BetaPrior = JEFFREYS, inner: str = "corrected"):
    """Approximate one inner integral over the PAC of a single cell.

    Parameters
    ----------
    counts : sequence of (n_left, n_right)
    nu : float
        Precision; ``np.inf`` gives the Binomial limit.

    Returns
    -------
    log_L : float
    theta_hat : float
        Mode, mapped back from the logit scale.
    curvature : float
        Second derivative of the log integrand at the mode, logit scale.
    """
    c = np.asarray(counts, dtype=float).reshape(-1, 2)
    if c.shape[0] == 0:
        raise ValueError("at least one (n_left, n_right) pair is required")
    logl, eta, curv, status = _kernels.solve_cells(
        c[None, :, 0], c[None, :, 1], np.array([float(nu)]),
        np.array([prior.shape1]), np.array([prior.shape2]), mode=_mode(inner),
    )
    if status[0, 0] != _kernels.STATUS_OK:
        raise EvidenceError(
            "mode search did not converge", nu=nu, last_theta=float(special.expit(eta[0, 0]))
        )
    return float(logl[0, 0]), float(special.expit(eta[0, 0])), float(curv[0, 0])


@dataclass
class WindowEvidence:
    """Evidence for one window.

    Per-grid arrays have length ``T``; group arrays have shape ``(k, T)``.
    Modes are on the PAC scale, curvatures on the logit scale.
    """

    log_M0: float
    log_M1: float
    log_BF: float
    log_L0: np.ndarray
    log_L1: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    curv0: np.ndarray
    curv1: np.ndarray
    degenerate: bool
    grid: NuGrid = field(repr=False)


@dataclass
class TreeEvidence:
    """Evidence for every internal window of a partition, in heap order.

    ``log_L0``/``theta0``/``curv0`` have shape ``(W, T)``; the per-group
    versions ``(W, k, T)``.
    """

    log_M0: np.ndarray
    log_M1: np.ndarray
    log_BF: np.ndarray
    log_L0: np.ndarray
    log_L1: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    curv0: np.ndarray
    curv1: np.ndarray
    degenerate: np.ndarray
    grid: NuGrid

    @property
    def n_windows(self) -> int:
        return self.log_BF.shape[0]

    @property
    def n_groups(self) -> int:
        return self.log_L1.shape[1]

    def window(self, t: int) -> WindowEvidence:
        return WindowEvidence(
            float(self.log_M0[t]), float(self.log_M1[t]), float(self.log_BF[t]),
            self.log_L0[t], self.log_L1[t], self.theta0[t], self.theta1[t],
            self.curv0[t], self.curv1[t], bool(self.degenerate[t]), self.grid,
        )

    def posterior_nu_weights(self, state: int) -> np.ndarray:
        """Normalised grid weights of the precision given the window state."""
        lw = self.grid.log_weights
        x = (self.log_L0 if state == 0 else self.log_L1.sum(axis=1)) + lw
        return np.exp(x - special.logsumexp(x, axis=1, keepdims=True))


def _evidence_arrays(nl, nr, group, k, grid, prior0, prior1, inner, backend):
    """Core evidence computation on dense ``(W, R)`` count matrices."""
    W, R = nl.shape
    masks = np.vstack([np.ones(R, dtype=bool)] + [group == i for i in range(k)])
    cl = (nl[:, None, :] * masks[None]).reshape(W * (k + 1), R)
    cr = (nr[:, None, :] * masks[None]).reshape(W * (k + 1), R)
    a = np.tile(np.r_[prior0.shape1, np.full(k, prior1.shape1)], W)
    b = np.tile(np.r_[prior0.shape2, np.full(k, prior1.shape2)], W)
    logl, eta, curv, status = _kernels.solve_cells(
        cl, cr, grid.points, a, b, mode=_mode(inner), backend=backend
    )
    T = grid.T
    bad = np.argwhere(status.reshape(W, k + 1, T) != _kernels.STATUS_OK)
    if bad.size:
        w, c, h = bad[0]
        raise EvidenceError(
            f"mode search failed in window {w} (cell {c}, nu={grid.points[h]:g})",
            window=int(w), nu=float(grid.points[h]),
            last_theta=float(special.expit(eta.reshape(W, k + 1, T)[w, c, h])),
        )
    logl = logl.reshape(W, k + 1, T)
    theta = special.expit(eta).reshape(W, k + 1, T)
    curv = curv.reshape(W, k + 1, T)
    lw = grid.log_weights
    log_M0 = special.logsumexp(logl[:, 0] + lw, axis=1)
    log_M1 = special.logsumexp(logl[:, 1:].sum(axis=1) + lw, axis=1)
    present = (np.stack([(nl + nr)[:, group == i].sum(axis=1) for i in range(k)], axis=1) > 0)
    degenerate = present.sum(axis=1) <= 1
    log_BF = np.where(degenerate, 0.0, log_M1 - log_M0)
    return dict(
        log_M0=log_M0, log_M1=np.where(degenerate, log_M0, log_M1), log_BF=log_BF,
        log_L0=logl[:, 0], log_L1=logl[:, 1:], theta0=theta[:, 0], theta1=theta[:, 1:],
        curv0=curv[:, 0], curv1=curv[:, 1:], degenerate=degenerate,
    )


def window_evidence(
    n_left,
    n_right,
    group,
    grid: NuGrid | None = None,
    prior0: BetaPrior = JEFFREYS,
    prior1: BetaPrior = JEFFREYS,
    inner: str = "corrected",
    n_groups: int | None = None,
    backend: str | None = None,
) -> WindowEvidence:
    """Evidence for a single window from per-replicate child counts."""
    grid = grid or NuGrid.log_uniform()
    nl = np.atleast_2d(np.asarray(n_left, dtype=float))
    nr = np.atleast_2d(np.asarray(n_right, dtype=float))
    group = np.asarray(group, dtype=np.int64)
    if np.any(nl < 0) or np.any(nr < 0):
        raise ValueError("counts must be non-negative")
    k = int(n_groups if n_groups is not None else group.max() + 1)
    d = _evidence_arrays(nl, nr, group, k, grid, prior0, prior1, inner, backend)
    return TreeEvidence(grid=grid, **d).window(0)


def compute_evidence(
    counts: CountTree,
    grid: NuGrid | None = None,
    prior0: BetaPrior = JEFFREYS,
    prior1: BetaPrior = JEFFREYS,
    inner: str = "corrected",
    backend: str | None = None,
) -> TreeEvidence:
    """Evidence for every internal window of a count tree."""
    grid = grid or NuGrid.log_uniform()
    nl = counts.left.astype(float)
    nr = counts.right.astype(float)
    d = _evidence_arrays(
        nl, nr, counts.group, counts.n_groups, grid, prior0, prior1, inner, backend
    )
    return TreeEvidence(grid=grid, **d)


def _logit(p):
    p = np.clip(p, THETA_CLAMP, 1.0 - THETA_CLAMP)
    return np.log(p) - np.log1p(-p)


def effect_size(ev, pmap):
    """Posterior expected per-group log-odds effect sizes.

    ``ev`` is a :class:`WindowEvidence` (returns shape ``(k,)``) or a
    :class:`TreeEvidence` with ``pmap`` an array of window PMAPs (returns
    ``(W, k)``).  Degenerate windows get zeros.
    """
    single = isinstance(ev, WindowEvidence)
    theta1 = ev.theta1[None] if single else ev.theta1
    log_L1 = ev.log_L1[None] if single else ev.log_L1
    degenerate = np.atleast_1d(ev.degenerate)
    pmap = np.atleast_1d(np.asarray(pmap, dtype=float))
    k = theta1.shape[1]
    if k < 2:
        out = np.zeros(theta1.shape[:2])
        return out[0] if single else out
    loo = (theta1.sum(axis=1, keepdims=True) - theta1) / (k - 1)
    eff = _logit(theta1) - _logit(loo)
    x = log_L1.sum(axis=1) + ev.grid.log_weights
    w = np.exp(x - special.logsumexp(x, axis=1, keepdims=True))
    cond = (eff * w[:, None, :]).sum(axis=2)
    out = np.where(degenerate[:, None], 0.0, pmap[:, None] * cond)
    return out[0] if single else out
