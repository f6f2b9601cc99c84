import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andova.partition import (
    Dataset,
    PartitionError,
    bin_counts,
    build_ndp,
    default_omega,
    level_of,
    load_dataset,
)


def intervals(tree, level):
    sl = tree.level_slice(level)
    return list(zip(tree.lo[sl], tree.hi[sl]))


def test_depth_one_midpoint():
    t = build_ndp(0, 1, 1)
    assert t.n_windows == 3
    assert intervals(t, 0) == [(0, 1)]
    assert intervals(t, 1) == [(0, 0.5), (0.5, 1)]


def test_depth_zero_is_root_only():
    t = build_ndp(0, 1, 0)
    assert t.n_windows == 1
    assert t.n_internal == 0
    assert (t.lo[0], t.hi[0]) == (0, 1)


def test_quantile_split_beta21():
    # F(x) = x^2, so F(c) = 1/2 gives c = sqrt(1/2)
    t = build_ndp(0, 1, 2, "quantile", cdf=lambda x: x**2, ppf=np.sqrt)
    assert t.hi[1] == pytest.approx(np.sqrt(0.5), abs=1e-15)
    assert t.lo[2] == pytest.approx(np.sqrt(0.5), abs=1e-15)
    # level-2 splits of [0, c): F = 1/4 -> 0.5
    assert t.hi[3] == pytest.approx(0.5)


@pytest.mark.parametrize("lo,hi", [(1, 1), (2, 1), (0, np.inf), (np.nan, 1)])
def test_invalid_interval(lo, hi):
    with pytest.raises(PartitionError):
        build_ndp(lo, hi, 2)


def test_bad_depth():
    with pytest.raises(PartitionError):
        build_ndp(0, 1, -1)
    with pytest.raises(PartitionError):
        build_ndp(0, 1, 2.5)


def test_collapse_rejected():
    with pytest.raises(PartitionError, match="machine"):
        build_ndp(0, 1e-300, 60)


def test_window_links():
    t = build_ndp(0, 1, 2)
    w = t.window(1)
    assert (w.level, w.index) == (1, 0)
    assert w.parent == 0 and w.left_child == 3 and w.right_child == 4
    assert t.window(3).left_child is None
    assert level_of(np.arange(7)).tolist() == [0, 1, 1, 2, 2, 2, 2]


def one_group(x):
    return Dataset.from_groups([[x]])


def test_single_observation_path():
    t = build_ndp(0, 1, 2)
    c = bin_counts(t, one_group([0.25]))
    n = c.n[:, 0]
    assert n[0] == 1 and n[1] == 1 and n[2] == 0
    # level 2: [0,.25) [.25,.5) [.5,.75) [.75,1]; 0.25 belongs to the second by the half-open rule
    assert n[3:].tolist() == [0, 1, 0, 0]


def test_single_observation_at_quarter_nonleaf():
    # at level 1 the point sits in [0, 0.5)
    t = build_ndp(0, 1, 2)
    c = bin_counts(t, one_group([0.25]))
    assert c.n[1, 0] == 1


def test_empty_dataset_all_zero():
    t = build_ndp(0, 1, 3)
    c = bin_counts(t, Dataset.from_groups([[[]], [[]]]))
    assert not c.n.any()


def test_eight_equally_spaced():
    x = 0.0625 * (2 * np.arange(8) + 1)
    t = build_ndp(0, 1, 3)
    c = bin_counts(t, one_group(x))
    assert c.n[7:, 0].tolist() == [1] * 8
    assert c.n[3:7, 0].tolist() == [2] * 4


def test_right_endpoint_goes_to_last_leaf():
    t = build_ndp(0, 1, 3)
    c = bin_counts(t, one_group([1.0, 0.0]))
    assert c.n[-1, 0] == 1 and c.n[7, 0] == 1


def test_outside_omega_reports_index():
    t = build_ndp(0, 1, 2)
    with pytest.raises(PartitionError, match="observation 2"):
        bin_counts(t, one_group([0.1, 0.2, 1.5]))


def test_left_right_views():
    t = build_ndp(0, 1, 2)
    c = bin_counts(t, one_group([0.1, 0.3, 0.6, 0.9, 0.95]))
    assert np.array_equal(c.left + c.right, c.n[: t.n_internal])


samples = st.lists(st.floats(0, 1, allow_nan=False), min_size=0, max_size=40)


@settings(max_examples=1000, deadline=None)
@given(st.lists(samples, min_size=1, max_size=4), st.integers(0, 6))
def test_count_conservation(reps, K):
    t = build_ndp(0, 1, K)
    c = bin_counts(t, Dataset.from_groups([reps]))
    m = t.n_internal
    assert np.array_equal(c.n[1 : 2 * m : 2] + c.n[2 : 2 * m + 1 : 2], c.n[:m])
    for j in range(K + 1):
        assert np.array_equal(c.n[t.level_slice(j)].sum(axis=0), [len(r) for r in reps])
    assert (c.n >= 0).all()


@settings(max_examples=1000, deadline=None)
@given(samples, st.integers(0, 6), st.randoms(use_true_random=False))
def test_binning_permutation_invariant(x, K, rnd):
    t = build_ndp(0, 1, K)
    y = list(x)
    rnd.shuffle(y)
    assert np.array_equal(bin_counts(t, one_group(x)).n, bin_counts(t, one_group(y)).n)


@settings(max_examples=1000, deadline=None)
@given(
    st.floats(-100, 100), st.floats(0.01, 100), st.integers(0, 8)
)
def test_tree_structure(lo, width, K):
    hi = lo + width
    t = build_ndp(lo, hi, K)
    assert t.n_windows == 2 ** (K + 1) - 1
    for j in range(K + 1):
        assert t.level_slice(j).stop - t.level_slice(j).start == 2**j
    assert (t.lo[0], t.hi[0]) == (lo, hi)
    assert (t.lo < t.hi).all()
    m = t.n_internal
    idx = np.arange(m)
    assert np.array_equal(t.lo[2 * idx + 1], t.lo[idx])
    assert np.array_equal(t.hi[2 * idx + 2], t.hi[idx])
    assert np.array_equal(t.hi[2 * idx + 1], t.lo[2 * idx + 2])


@settings(max_examples=1000, deadline=None)
@given(st.floats(-10, 10), st.floats(0.1, 10), st.integers(0, 8))
def test_uniform_quantile_equals_midpoint(lo, width, K):
    hi = lo + width
    cdf = lambda x: (x - lo) / (hi - lo)
    ppf = lambda p: lo + p * (hi - lo)
    a = build_ndp(lo, hi, K)
    b = build_ndp(lo, hi, K, "quantile", cdf=cdf, ppf=ppf)
    np.testing.assert_allclose(a.lo, b.lo, rtol=0, atol=1e-12 * width)
    np.testing.assert_allclose(a.hi, b.hi, rtol=0, atol=1e-12 * width)


def test_load_csv_label_order(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("group,replicate,value\nB,r1,0.5\nA,r1,0.1\nB,r2,0.7\nB,r1,0.2\n")
    d = load_dataset(p)
    assert d.group_labels == ["B", "A"]
    assert d.replicate_labels == ["r1", "r1", "r2"]
    assert d.group.tolist() == [0, 1, 0]
    assert d.samples[0].tolist() == [0.5, 0.2]


def test_load_json(tmp_path):
    p = tmp_path / "d.json"
    recs = [{"group": "g1", "replicate": 1, "value": 0.3}, {"group": "g2", "replicate": 1, "value": 0.4}]
    p.write_text(json.dumps(recs))
    d = load_dataset(p)
    assert d.n_groups == 2 and d.sizes.tolist() == [1, 1]


@pytest.mark.parametrize(
    "text",
    ["a,b,c\n1,2,3\n", "group,replicate,value\ng,r,notanumber\n"],
)
def test_load_csv_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(PartitionError):
        load_dataset(p)


def test_validate_needs_two_groups():
    with pytest.raises(PartitionError, match="at least 2 groups"):
        Dataset.from_groups([[[0.1]]]).validate()


def test_default_omega_pads():
    d = Dataset.from_groups([[[0.0, 1.0]], [[0.5]]])
    assert default_omega(d) == pytest.approx((-0.005, 1.005))
