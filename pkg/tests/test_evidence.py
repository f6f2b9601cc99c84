import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from andova import _kernels
from andova.evidence import (
    BetaPrior,
    EvidenceError,
    NuGrid,
    compute_evidence,
    effect_size,
    laplace_inner,
    log_D,
    window_evidence,
)
from andova.partition import Dataset, bin_counts, build_ndp

from oracles import dense_log_bf, inner_exact

GRID = NuGrid.log_uniform()


def flat(groups):
    """(n_left, n_right, group) arrays from nested per-group pair lists."""
    nl = [c[0] for g in groups for c in g]
    nr = [c[1] for g in groups for c in g]
    gi = [i for i, g in enumerate(groups) for _ in g]
    return nl, nr, gi


def ev_of(groups, grid=GRID, **kw):
    nl, nr, gi = flat(groups)
    return window_evidence(nl, nr, gi, grid, n_groups=len(groups), **kw)


# --- log_D -----------------------------------------------------------------

def test_log_D_empty():
    assert log_D(0, 0, 0.3, 5.0) == 0.0


def test_log_D_infinite_precision():
    assert log_D(2, 1, 0.5, np.inf) == pytest.approx(np.log(0.5**3), abs=1e-15)
    assert log_D(2, 1, 0.5, np.inf) == pytest.approx(-2.0794415416798357)


def test_log_D_finite_matches_quadrature():
    # D(3, 2, 0.4, 10) = E[p^3 (1-p)^2] under Beta(4, 6)
    u = (np.arange(10**6) + 0.5) / 10**6
    dens = np.exp(special.xlogy(3, u) + special.xlog1py(5, -u) - special.betaln(4, 6))
    quad = np.mean(u**3 * (1 - u) ** 2 * dens)
    exact = special.betaln(7, 8) - special.betaln(4, 6)
    assert log_D(3, 2, 0.4, 10.0) == pytest.approx(exact, abs=1e-12)
    assert log_D(3, 2, 0.4, 10.0) == pytest.approx(np.log(quad), abs=1e-6)


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 1.5])
def test_log_D_domain(theta):
    with pytest.raises(ValueError):
        log_D(1, 1, theta, 3.0)


def test_nu_grid():
    g = NuGrid.log_uniform(50, -1, 4)
    assert g.T == 50
    assert g.weights.sum() == pytest.approx(1, abs=1e-12)
    assert np.all(np.diff(g.points) > 0)
    assert NuGrid.infinity().include_infinity


def test_beta_prior_rejects_nonpositive():
    with pytest.raises(ValueError):
        BetaPrior(0, 1)


# --- inner integral --------------------------------------------------------

@pytest.mark.parametrize("nu", [0.1, 3.0, 1e4])
def test_inner_empty_symmetric(nu):
    _, th, curv = laplace_inner([(0, 0)], nu)
    assert th == pytest.approx(0.5)
    assert curv < 0


def test_inner_symmetric_data():
    _, th, _ = laplace_inner([(5, 5), (5, 5)], 100.0)
    assert th == pytest.approx(0.5, abs=1e-12)


def test_inner_matches_quadrature():
    lg, _, _ = laplace_inner([(7, 3)], 50.0)
    assert lg == pytest.approx(inner_exact([(7, 3)], 50.0), abs=2e-3)


@pytest.mark.parametrize("inner", ["corrected", "beta"])
def test_inner_exact_for_conjugate_and_empty(inner):
    # nu = inf: Beta(a + L, b + R) / Beta(a, b)
    lg, _, _ = laplace_inner([(4, 9), (2, 0)], np.inf, inner=inner)
    assert lg == pytest.approx(special.betaln(6.5, 9.5) - special.betaln(0.5, 0.5), abs=1e-10)
    lg, _, _ = laplace_inner([(0, 0)], 7.0, inner=inner)
    assert lg == pytest.approx(0.0, abs=1e-10)


def test_inner_gauss_mode_available():
    lg, _, _ = laplace_inner([(30, 20)], 40.0, inner="gauss")
    assert lg == pytest.approx(inner_exact([(30, 20)], 40.0), abs=0.05)
    with pytest.raises(ValueError):
        laplace_inner([(1, 1)], 1.0, inner="nope")


def test_inner_requires_pairs():
    with pytest.raises(ValueError):
        laplace_inner([], 1.0)


def test_convergence_failure_carries_iterate(monkeypatch):
    monkeypatch.setattr(_kernels, "MAX_ITER", 0)
    with pytest.raises(EvidenceError) as err:
        window_evidence([9, 1], [1, 9], [0, 1], GRID, backend="numpy")
    assert err.value.window == 0
    assert 0 < err.value.last_theta < 1


# --- window evidence ---------------------------------------------------------

def test_all_zero_degenerate():
    ev = ev_of([[(0, 0), (0, 0)], [(0, 0), (0, 0)]])
    assert ev.degenerate and ev.log_BF == 0


def test_single_group_present():
    ev = ev_of([[(5, 3), (2, 7)], [(0, 0), (0, 0)]])
    assert ev.degenerate and ev.log_BF == 0 and ev.log_M1 == ev.log_M0


EXAMPLE = [[(9, 1), (8, 2)], [(1, 9), (2, 8)]]


def test_example_bf_positive_and_matches_dense():
    ev = ev_of(EXAMPLE)
    assert ev.log_BF > 0
    assert ev.log_BF == pytest.approx(dense_log_bf(EXAMPLE), abs=0.02)
    assert ev.log_BF == pytest.approx(ev.log_M1 - ev.log_M0)


@pytest.mark.parametrize(
    "groups",
    [EXAMPLE, [[(30, 40), (22, 51)], [(60, 10), (45, 33)]], [[(3, 0)], [(0, 4)]]],
)
def test_riemann_doubling(groups):
    a = ev_of(groups, NuGrid.log_uniform(50))
    b = ev_of(groups, NuGrid.log_uniform(100))
    assert abs(a.log_BF - b.log_BF) <= 0.01


def test_backends_agree():
    rng = np.random.default_rng(5)
    x = [[rng.normal(0.5, 0.1, 80) for _ in range(3)] for _ in range(3)]
    d = Dataset.from_groups(x)
    t = build_ndp(-0.2, 1.2, 6)
    c = bin_counts(t, d)
    a = compute_evidence(c, backend="numba")
    b = compute_evidence(c, backend="numpy")
    np.testing.assert_allclose(a.log_BF, b.log_BF, atol=1e-9)
    np.testing.assert_allclose(a.log_L1, b.log_L1, atol=1e-9)
    np.testing.assert_allclose(a.theta0, b.theta0, atol=1e-9)
    with pytest.raises(ValueError):
        compute_evidence(c, backend="fortran")


def test_tree_window_view():
    d = Dataset.from_groups([[[0.1, 0.2, 0.7]], [[0.8, 0.9]]])
    t = build_ndp(0, 1, 2)
    ev = compute_evidence(bin_counts(t, d))
    assert ev.n_windows == 3 and ev.n_groups == 2
    w = ev.window(0)
    assert w.log_BF == ev.log_BF[0]
    p = ev.posterior_nu_weights(1)
    np.testing.assert_allclose(p.sum(axis=1), 1)


# --- effect sizes ------------------------------------------------------------

def test_effect_identical_groups_zero():
    ev = ev_of([[(6, 4), (5, 5)], [(6, 4), (5, 5)]])
    np.testing.assert_allclose(effect_size(ev, 0.7), 0, atol=1e-12)


def test_effect_zero_pmap():
    ev = ev_of(EXAMPLE)
    assert np.all(effect_size(ev, 0.0) == 0.0)


def test_effect_mirror_k2():
    ev = ev_of(EXAMPLE)
    e = effect_size(ev, 0.9)
    assert e[0] == pytest.approx(-e[1], abs=1e-12)
    assert e[0] > 0


def test_effect_degenerate_zero():
    ev = ev_of([[(5, 3)], [(0, 0)]])
    assert np.all(effect_size(ev, 1.0) == 0)


# --- properties --------------------------------------------------------------

pair = st.tuples(st.integers(0, 60), st.integers(0, 60))
groups_st = st.lists(st.lists(pair, min_size=1, max_size=3), min_size=2, max_size=3)


@settings(max_examples=1000, deadline=None)
@given(groups_st)
def test_mirror_symmetry(groups):
    ev = ev_of(groups)
    mir = ev_of([[(r, l) for l, r in g] for g in groups])
    assert mir.log_BF == pytest.approx(ev.log_BF, abs=1e-8)
    np.testing.assert_allclose(mir.theta0, 1 - ev.theta0, atol=1e-8)
    np.testing.assert_allclose(mir.theta1, 1 - ev.theta1, atol=1e-8)
    assert np.all(ev.curv0 < 0) and np.all(ev.curv1 < 0)


@settings(max_examples=1000, deadline=None)
@given(groups_st, st.randoms(use_true_random=False))
def test_group_relabelling(groups, rnd):
    perm = list(range(len(groups)))
    rnd.shuffle(perm)
    ev = ev_of(groups)
    pe = ev_of([groups[p] for p in perm])
    assert pe.log_M0 == pytest.approx(ev.log_M0, abs=1e-9)
    assert pe.log_M1 == pytest.approx(ev.log_M1, abs=1e-9)
    np.testing.assert_allclose(pe.log_L1, ev.log_L1[perm], atol=1e-9)
    np.testing.assert_allclose(effect_size(pe, 0.6), effect_size(ev, 0.6)[perm], atol=1e-9)


@settings(max_examples=1000, deadline=None)
@given(st.lists(pair, min_size=1, max_size=4), st.floats(-1, 4))
def test_laplace_accuracy_large_cells(cells, log_nu):
    if sum(l + r for l, r in cells) < 50:
        cells = cells + [(25, 25)]
    nu = 10**log_nu
    lg, _, curv = laplace_inner(cells, nu)
    assert curv < 0
    assert abs(lg - inner_exact(cells, nu)) <= 0.05


@settings(max_examples=1000, deadline=None)
@given(st.lists(pair, min_size=2, max_size=4))
def test_infinite_precision_conjugate_bf(pairs):
    # one replicate per group: closed-form conjugate Bayes factor
    groups = [[p] for p in pairs]
    ev = ev_of(groups, NuGrid.infinity())
    lb = special.betaln
    if sum(1 for l, r in pairs if l + r) <= 1:
        assert ev.log_BF == 0
        return
    m1 = sum(lb(0.5 + l, 0.5 + r) - lb(0.5, 0.5) for l, r in pairs)
    L = sum(l for l, _ in pairs)
    R = sum(r for _, r in pairs)
    m0 = lb(0.5 + L, 0.5 + R) - lb(0.5, 0.5)
    assert ev.log_BF == pytest.approx(m1 - m0, abs=1e-8)


def test_disable_flag_selects_numpy(monkeypatch):
    import subprocess
    import sys

    from andova import _accel

    monkeypatch.setenv("ANDOVA_DISABLE_NUMBA", "1")
    assert not _accel.numba_requested()
    monkeypatch.setenv("ANDOVA_DISABLE_NUMBA", "0")
    assert _accel.numba_requested()
    # the flag is read at import time
    code = "from andova import _accel; print(_accel.USE_NUMBA)"
    env = {"ANDOVA_DISABLE_NUMBA": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "False"
