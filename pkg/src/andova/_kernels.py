"""Inner-integral kernels: one Laplace solve per (cell, precision) pair.

A *cell* is a set of Binomial pairs ``(n_left, n_right)`` sharing one PAC
``theta`` under a Beta(a, b) prior.  For each precision ``nu`` the kernel
maximises, over ``eta = logit(theta)``,

    g(eta) = sum log D(n_l, n_r, theta, nu) + a log theta + b log(1 - theta) - log B(a, b)

(the prior density times the Jacobian of the logit map) by safeguarded
Newton on a bracket, then returns the log inner integral.

Inner modes:

* ``MODE_BETA``: integrate the Beta density matched to the mode and
  curvature of ``g`` (exact when the integrand is itself of Beta form, e.g.
  empty cells or ``nu = inf``).
* ``MODE_CORRECTED`` (default): the Beta-matched value times the ratio of
  Gauss-Hermite sums of ``exp(g)`` and of the matched Beta kernel, both on
  the Laplace nodes.  Quadrature error common to both cancels.
* ``MODE_GAUSS``: ``g + log(2 pi / -g'') / 2``.

Two interchangeable backends share this contract: ``solve_cells_numba``
(compiled, CSR pair storage) and ``solve_cells_numpy`` (lockstep
vectorised Newton over padded arrays).
"""

import math

import numpy as np
from scipy import special

from . import _accel

ETA_BOUND = 40.0
GRAD_TOL = 1e-8
MAX_ITER = 100
SMALL_N = 16

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_NOT_CONCAVE = 2

MODE_CORRECTED = 0
MODE_BETA = 1
MODE_GAUSS = 2
MODES = {"corrected": MODE_CORRECTED, "beta": MODE_BETA, "gauss": MODE_GAUSS}

GH_NODES = 10
_GH_X, _GH_W = np.polynomial.hermite.hermgauss(GH_NODES)
_GH_LOGW = np.log(_GH_W) + _GH_X**2


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

def _njit(*args, **kwargs):
    if _accel.HAVE_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)
    return lambda f: f


@_njit(cache=True)
def _digamma(x):
    r = 0.0
    while x < 10.0:
        r -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    t = f * (-1.0 / 12 + f * (1.0 / 120 + f * (-1.0 / 252 + f * (1.0 / 240 + f * (-1.0 / 132)))))
    return r + math.log(x) - 0.5 / x + t


@_njit(cache=True)
def _trigamma(x):
    r = 0.0
    while x < 10.0:
        r += 1.0 / (x * x)
        x += 1.0
    f = 1.0 / (x * x)
    t = 1.0 / x + 0.5 * f + (f / x) * (
        1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f * (1.0 / 30 - f * 5.0 / 66)))
    )
    return r + t


@_njit(cache=True)
def _dpsi(x, n):
    # psi(x + n) - psi(x) for integer-valued n >= 0
    if n == 0.0:
        return 0.0
    if n <= SMALL_N:
        s = 0.0
        m = 0.0
        while m < n:
            s += 1.0 / (x + m)
            m += 1.0
        return s
    if x < 1.0:
        return 1.0 / x + _digamma(x + n) - _digamma(x + 1.0)
    return _digamma(x + n) - _digamma(x)


@_njit(cache=True)
def _dpsi1(x, n):
    # trigamma(x + n) - trigamma(x)
    if n == 0.0:
        return 0.0
    if n <= SMALL_N:
        s = 0.0
        m = 0.0
        while m < n:
            s -= 1.0 / ((x + m) * (x + m))
            m += 1.0
        return s
    if x < 1.0:
        return -1.0 / (x * x) + _trigamma(x + n) - _trigamma(x + 1.0)
    return _trigamma(x + n) - _trigamma(x)


@_njit(cache=True)
def _dlgamma(x, n):
    # lgamma(x + n) - lgamma(x)
    if n == 0.0:
        return 0.0
    if n <= SMALL_N:
        s = 0.0
        m = 0.0
        while m < n:
            s += math.log(x + m)
            m += 1.0
        return s
    return math.lgamma(x + n) - math.lgamma(x)


@_njit(cache=True)
def _cell_terms(pl, pr, start, stop, eta, nu, a, b):
    """Return g, g', g'' at eta (derivatives with respect to eta)."""
    if eta >= 0.0:
        e = math.exp(-eta)
        th = 1.0 / (1.0 + e)
        thc = e / (1.0 + e)
    else:
        e = math.exp(eta)
        th = e / (1.0 + e)
        thc = 1.0 / (1.0 + e)
    lth = math.log(th)
    lthc = math.log(thc)
    g0 = a * lth + b * lthc
    s1 = 0.0
    s2 = 0.0
    if math.isinf(nu):
        for p in range(start, stop):
            nl = pl[p]
            nr = pr[p]
            g0 += nl * lth + nr * lthc
            s1 += nl / th - nr / thc
            s2 -= nl / (th * th) + nr / (thc * thc)
    else:
        x = th * nu
        y = thc * nu
        for p in range(start, stop):
            nl = pl[p]
            nr = pr[p]
            g0 += _dlgamma(x, nl) + _dlgamma(y, nr) - _dlgamma(nu, nl + nr)
            s1 += _dpsi(x, nl) - _dpsi(y, nr)
            s2 += _dpsi1(x, nl) + _dpsi1(y, nr)
        s1 *= nu
        s2 *= nu * nu
    q = th * thc
    g1 = q * s1 + a * thc - b * th
    g2 = q * q * s2 + q * (thc - th) * s1 - (a + b) * q
    return g0, g1, g2, th, thc


@_njit(cache=True)
def _log_expit_pair(eta):
    # log(theta), log(1 - theta) without cancellation
    if eta >= 0.0:
        l = math.log1p(math.exp(-eta))
        return -l, -eta - l
    l = math.log1p(math.exp(eta))
    return eta - l, -l


@_njit(cache=True)
def _cell_value(pl, pr, start, stop, eta, nu, a, b):
    lth, lthc = _log_expit_pair(eta)
    x = math.exp(lth) * nu
    y = math.exp(lthc) * nu
    g0 = a * lth + b * lthc
    for p in range(start, stop):
        g0 += _dlgamma(x, pl[p]) + _dlgamma(y, pr[p]) - _dlgamma(nu, pl[p] + pr[p])
    return g0


@_njit(cache=True)
def _gh_correction(pl, pr, start, stop, nu, a, b, eta, g0, g2, aa, bb, gx, glogw):
    # log GH(exp g) - log GH(matched Beta kernel), both relative to the mode
    sd = math.sqrt(2.0 / -g2)
    lt0, lc0 = _log_expit_pair(eta)
    b0 = aa * lt0 + bb * lc0
    mg = -np.inf
    mb = -np.inf
    vg = np.empty(gx.shape[0])
    vb = np.empty(gx.shape[0])
    for k in range(gx.shape[0]):
        e = eta + sd * gx[k]
        lt, lc = _log_expit_pair(e)
        vg[k] = glogw[k] + _cell_value(pl, pr, start, stop, e, nu, a, b) - g0
        vb[k] = glogw[k] + aa * lt + bb * lc - b0
        mg = max(mg, vg[k])
        mb = max(mb, vb[k])
    sg = 0.0
    sb = 0.0
    for k in range(gx.shape[0]):
        sg += math.exp(vg[k] - mg)
        sb += math.exp(vb[k] - mb)
    return mg + math.log(sg) - mb - math.log(sb)


@_njit(cache=True)
def _solve_one(pl, pr, start, stop, nu, a, b, mode, gx, glogw):
    sl = 0.0
    sn = 0.0
    for p in range(start, stop):
        sl += pl[p]
        sn += pl[p] + pr[p]
    f0 = (sl + 0.5) / (sn + 1.0)
    eta = math.log(f0) - math.log1p(-f0)
    lo = -ETA_BOUND
    hi = ETA_BOUND
    status = STATUS_NO_CONVERGENCE
    for _ in range(MAX_ITER):
        g0, g1, g2, th, thc = _cell_terms(pl, pr, start, stop, eta, nu, a, b)
        if abs(g1) < GRAD_TOL or hi - lo < 1e-13:
            status = STATUS_OK
            break
        if g1 > 0.0:
            lo = eta
        else:
            hi = eta
        new = eta - g1 / g2 if g2 < 0.0 else np.nan
        if not (new > lo and new < hi):
            new = 0.5 * (lo + hi)
        eta = new
    g0, g1, g2, th, thc = _cell_terms(pl, pr, start, stop, eta, nu, a, b)
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    if not g2 < 0.0:
        return g0 - lbeta, eta, g2, STATUS_NOT_CONCAVE
    if mode == MODE_GAUSS:
        return g0 - lbeta + 0.5 * math.log(2.0 * math.pi / -g2), eta, g2, status
    s = -g2 / (th * thc)
    aa = s * th
    bb = s * thc
    logl = (
        g0 - lbeta
        + math.lgamma(aa) + math.lgamma(bb) - math.lgamma(aa + bb)
        - aa * math.log(th) - bb * math.log(thc)
    )
    if mode == MODE_CORRECTED and not math.isinf(nu) and stop > start:
        logl += _gh_correction(pl, pr, start, stop, nu, a, b, eta, g0, g2, aa, bb, gx, glogw)
    return logl, eta, g2, status


def _solve_cells_numba_impl(ptr, pl, pr, nus, a, b, mode, gx, glogw, logl, eta, curv, status):
    C = ptr.shape[0] - 1
    T = nus.shape[0]
    for c in _prange(C):
        for h in range(T):
            r = _solve_one(pl, pr, ptr[c], ptr[c + 1], nus[h], a[c], b[c], mode, gx, glogw)
            logl[c, h] = r[0]
            eta[c, h] = r[1]
            curv[c, h] = r[2]
            status[c, h] = r[3]


if _accel.HAVE_NUMBA:
    import numba

    _prange = numba.prange
    _solve_cells_numba = numba.njit(cache=True, parallel=True)(_solve_cells_numba_impl)
else:  # pragma: no cover
    _prange = range
    _solve_cells_numba = _solve_cells_numba_impl


def solve_cells_numba(ptr, pl, pr, nus, a, b, mode=MODE_CORRECTED):
    C = ptr.shape[0] - 1
    T = nus.shape[0]
    logl = np.empty((C, T))
    eta = np.empty((C, T))
    curv = np.empty((C, T))
    status = np.empty((C, T), dtype=np.int64)
    _solve_cells_numba(
        np.ascontiguousarray(ptr, dtype=np.int64),
        np.ascontiguousarray(pl, dtype=np.float64),
        np.ascontiguousarray(pr, dtype=np.float64),
        np.ascontiguousarray(nus, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        int(mode), _GH_X, _GH_LOGW,
        logl, eta, curv, status,
    )
    return logl, eta, curv, status


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _np_dpsi(x, n, poly):
    # psi^(poly)(x + n) - psi^(poly)(x), stable for small x
    f = special.digamma if poly == 0 else (lambda z: special.polygamma(1, z))
    small = x < 1.0
    xs = np.where(small, x + 1.0, x)
    base = f(xs + n) - f(xs)
    corr = 1.0 / x if poly == 0 else -1.0 / (x * x)
    # when x < 1: psi(x+n) - psi(x) = [psi(x+n) - psi(x+1)] + 1/x; here
    # base = psi(x+1+n) - psi(x+1) so subtract the extra last term back
    last = 1.0 / (x + n) if poly == 0 else -1.0 / ((x + n) ** 2)
    out = np.where(small, base + corr - last, base)
    return np.where(n == 0, 0.0, out)


def _np_dlgamma(x, n):
    return np.where(n == 0, 0.0, special.gammaln(x + n) - special.gammaln(x))


def _np_terms(nl, nr, eta, nu, a, b):
    th = special.expit(eta)
    thc = special.expit(-eta)
    lth = np.log(th)
    lthc = np.log(thc)
    # shapes: nl, nr (C, 1, R); eta (C, T); nu (1, T); a, b (C, 1)
    thr = th[..., None]
    thcr = thc[..., None]
    finite = np.isfinite(nu)
    nuf = np.where(finite, nu, 1.0)[..., None]
    x = thr * nuf
    y = thcr * nuf
    g_fin = (_np_dlgamma(x, nl) + _np_dlgamma(y, nr) - _np_dlgamma(nuf, nl + nr)).sum(-1)
    s1_fin = nuf[..., 0] * (_np_dpsi(x, nl, 0) - _np_dpsi(y, nr, 0)).sum(-1)
    s2_fin = nuf[..., 0] ** 2 * (_np_dpsi(x, nl, 1) + _np_dpsi(y, nr, 1)).sum(-1)
    NL = nl.sum(-1)
    NR = nr.sum(-1)
    g_inf = NL * lth + NR * lthc
    s1_inf = NL / th - NR / thc
    s2_inf = -(NL / th**2 + NR / thc**2)
    g0 = np.where(finite, g_fin, g_inf) + a * lth + b * lthc
    s1 = np.where(finite, s1_fin, s1_inf)
    s2 = np.where(finite, s2_fin, s2_inf)
    q = th * thc
    g1 = q * s1 + a * thc - b * th
    g2 = q * q * s2 + q * (thc - th) * s1 - (a + b) * q
    return g0, g1, g2, th, thc


def _np_log_expit_pair(eta):
    return -np.logaddexp(0.0, -eta), -np.logaddexp(0.0, eta)


def _np_value(nl, nr, eta, nu, a, b):
    """``g`` at nodes ``eta`` of shape ``(C, T, Q)``; ``nl``/``nr`` ``(C, R)``, ``nu`` ``(T,)``."""
    lth, lthc = _np_log_expit_pair(eta)
    nu = nu[None, :, None, None]
    x = np.exp(lth)[..., None] * nu
    y = np.exp(lthc)[..., None] * nu
    l = nl[:, None, None, :]
    r = nr[:, None, None, :]
    g = (_np_dlgamma(x, l) + _np_dlgamma(y, r) - _np_dlgamma(nu, l + r)).sum(-1)
    return g + a[:, None, None] * lth + b[:, None, None] * lthc


def _np_gh_correction(nl, nr, nus, a, b, eta, g0, g2, aa, bb, chunk=256):
    out = np.zeros_like(eta)
    sd = np.sqrt(2.0 / -g2)
    for c0 in range(0, eta.shape[0], chunk):
        sl = slice(c0, c0 + chunk)
        e = eta[sl, :, None] + sd[sl, :, None] * _GH_X
        vg = _GH_LOGW + _np_value(nl[sl], nr[sl], e, nus, a[sl], b[sl]) - g0[sl, :, None]
        lt, lc = _np_log_expit_pair(e)
        lt0, lc0 = _np_log_expit_pair(eta[sl])
        vb = _GH_LOGW + aa[sl, :, None] * (lt - lt0[..., None]) + bb[sl, :, None] * (lc - lc0[..., None])
        out[sl] = special.logsumexp(vg, axis=-1) - special.logsumexp(vb, axis=-1)
    return out


def solve_cells_numpy(nl, nr, nus, a, b, mode=MODE_CORRECTED):
    """Padded-array variant: ``nl``, ``nr`` have shape ``(C, R)``."""
    nl2 = np.asarray(nl, dtype=float)
    nr2 = np.asarray(nr, dtype=float)
    nus1 = np.asarray(nus, dtype=float)
    a1 = np.asarray(a, dtype=float)
    b1 = np.asarray(b, dtype=float)
    nl = np.asarray(nl, dtype=float)[:, None, :]
    nr = np.asarray(nr, dtype=float)[:, None, :]
    nus = np.asarray(nus, dtype=float)[None, :]
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    C, T = nl.shape[0], nus.shape[1]
    f0 = (nl.sum(-1) + 0.5) / (nl.sum(-1) + nr.sum(-1) + 1.0)
    eta = np.broadcast_to(special.logit(f0), (C, T)).copy()
    lo = np.full((C, T), -ETA_BOUND)
    hi = np.full((C, T), ETA_BOUND)
    done = np.zeros((C, T), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(MAX_ITER):
            act = ~done
            if not act.any():
                break
            ci, hi_idx = np.nonzero(act)
            g0, g1, g2, _, _ = _np_terms(
                nl[ci], nr[ci], eta[ci, hi_idx][:, None], nus[0, hi_idx][None, :].T,
                a[ci], b[ci],
            )
            g1 = g1[:, 0]
            g2 = g2[:, 0]
            e = eta[ci, hi_idx]
            l = lo[ci, hi_idx]
            u = hi[ci, hi_idx]
            conv = (np.abs(g1) < GRAD_TOL) | (u - l < 1e-13)
            l = np.where(g1 > 0, e, l)
            u = np.where(g1 > 0, u, e)
            new = np.where(g2 < 0, e - g1 / g2, np.nan)
            bad = ~((new > l) & (new < u))
            new = np.where(bad, 0.5 * (l + u), new)
            done[ci, hi_idx] = conv
            eta[ci, hi_idx] = np.where(conv, e, new)
            lo[ci, hi_idx] = l
            hi[ci, hi_idx] = u
        status = np.where(done, STATUS_OK, STATUS_NO_CONVERGENCE)
        graw, _, g2, th, thc = _np_terms(nl, nr, eta, nus, a, b)
        g0 = graw - special.betaln(a, b)
        if mode == MODE_GAUSS:
            logl = g0 + 0.5 * np.log(2.0 * np.pi / -g2)
        else:
            s = -g2 / (th * thc)
            aa = s * th
            bb = s * thc
            logl = g0 + special.betaln(aa, bb) - aa * np.log(th) - bb * np.log(thc)
            if mode == MODE_CORRECTED:
                fix = np.isfinite(nus1)[None, :] & ((nl2 + nr2).sum(-1) > 0)[:, None] & (g2 < 0)
                corr = _np_gh_correction(nl2, nr2, nus1, a1, b1, eta, graw, np.where(fix, g2, -1.0),
                                         np.where(fix, aa, 1.0), np.where(fix, bb, 1.0))
                logl = logl + np.where(fix, corr, 0.0)
    status = np.where(g2 < 0, status, STATUS_NOT_CONCAVE)
    return logl, eta, g2, status


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def pack_cells(nl, nr):
    """Dense ``(C, R)`` count matrices to CSR (empty pairs dropped)."""
    nl = np.asarray(nl, dtype=float)
    nr = np.asarray(nr, dtype=float)
    keep = (nl + nr) > 0
    ptr = np.concatenate([[0], np.cumsum(keep.sum(axis=1))]).astype(np.int64)
    return ptr, nl[keep], nr[keep]


def solve_cells(nl, nr, nus, a, b, mode=MODE_CORRECTED, backend=None):
    """Solve every (cell, nu) pair.

    Returns ``(logL, eta_hat, curvature, status)`` each of shape ``(C, T)``;
    ``curvature`` is ``g''`` at the mode on the logit scale.
    """
    if backend is None:
        backend = "numba" if _accel.USE_NUMBA else "numpy"
    if backend == "numba":
        ptr, pl, pr = pack_cells(nl, nr)
        return solve_cells_numba(ptr, pl, pr, nus, a, b, mode)
    if backend == "numpy":
        return solve_cells_numpy(nl, nr, nus, a, b, mode)
    raise ValueError(f"unknown backend {backend!r}")
