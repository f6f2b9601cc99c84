import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andova.evidence import NuGrid
from andova.model import FitConfig, fit
from andova.msbb import fit_independent, level_rho, pmap_independent
from andova.partition import Dataset, bin_counts, build_ndp
from andova.simulation import OMEGA, ScenarioSpec, generate


def test_unit_bf_keeps_prior():
    assert pmap_independent(0.0, 0.5) == 0.5


def test_zero_prior():
    assert pmap_independent(50.0, 0.0) == 0.0
    assert pmap_independent(-50.0, 1.0) == 1.0


def test_direct_evaluation():
    assert pmap_independent(np.log(4), 0.2) == pytest.approx(0.5, abs=1e-15)


def test_rho_out_of_range():
    with pytest.raises(ValueError):
        pmap_independent(0.0, 1.2)


def test_level_rho():
    r = level_rho(0.07, 3)
    np.testing.assert_allclose(r, [0.035, 0.035, 0.035, 0.0175, 0.0175, 0.0175, 0.0175])


def test_identical_groups_stay_near_prior():
    rng = np.random.default_rng(0)
    reps = [rng.normal(0.5, 0.15, 300).clip(0, 1) for _ in range(3)]
    d = Dataset.from_groups([reps, reps])
    c = bin_counts(build_ndp(0, 1, 6), d)
    res = fit_independent(c, rho=0.3)
    assert np.all(np.abs(res.pmap - 0.3) < 0.3)
    assert np.all(res.evidence.log_BF < 1e-6)


def test_single_group_window_keeps_rho():
    d = Dataset.from_groups([[[0.1, 0.2]], [[0.8, 0.9]]])
    c = bin_counts(build_ndp(0, 1, 3), d)
    res = fit_independent(c, rho=0.25)
    deg = res.evidence.degenerate
    assert deg[1:].any()
    np.testing.assert_array_equal(res.pmap[deg], 0.25)
    assert res.effects.shape == (7, 2)


def test_restricted_variant_overstates_null_data():
    # replicate noise alone inflates the nu = inf PMAPs relative to the full model
    t = build_ndp(*OMEGA, 8)
    gaps = []
    for seed in range(8):
        c = bin_counts(t, generate(ScenarioSpec("null", seed=seed)))
        full = fit_independent(c)
        inf = fit_independent(c, restrict_nu_infinity=True)
        assert inf.evidence.grid.include_infinity
        gaps.append(inf.pmap.max() - full.pmap.max())
    assert min(gaps) >= 0
    assert gaps[0] > 0.5


def test_independent_model_through_fit():
    d = generate(ScenarioSpec("local_shift", seed=1, n=200))
    r = fit(d, FitConfig(K=6, omega=OMEGA, model="independent"))
    assert r.pjap is None and r.pmap.shape == (63,)


@settings(max_examples=1000, deadline=None)
@given(st.floats(-30, 30), st.floats(0.001, 20), st.floats(0.001, 0.999))
def test_monotone_in_bf(lbf, step, rho):
    a = pmap_independent(lbf, rho)
    b = pmap_independent(lbf + step, rho)
    assert 0 <= a <= 1 and 0 <= b <= 1
    # strict in exact arithmetic; allow for saturation near 0 and 1
    assert b > a or (b == a and (a > 1 - 1e-12 or b < 1e-12))


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.001, 30), st.floats(0.001, 0.998), st.floats(0.0005, 0.5))
def test_monotone_in_rho(lbf, rho, step):
    r2 = min(rho + step, 0.999)
    a = pmap_independent(lbf, rho)
    b = pmap_independent(lbf, r2)
    assert b > a or (b == a and a > 1 - 1e-12)
