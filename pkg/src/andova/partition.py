"""Nested dyadic partition of an interval and per-window replicate counts.

Windows are stored flat in heap order: window ``t`` has children ``2t+1``
and ``2t+2``, parent ``(t-1)//2``, and level ``floor(log2(t+1))``.
Left children own ``[lo, split)``, right children ``[split, hi)``; the
rightmost window of every level is closed on the right.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PartitionError",
    "Window",
    "WindowTree",
    "Dataset",
    "CountTree",
    "build_ndp",
    "bin_counts",
    "default_omega",
    "load_dataset",
]


class PartitionError(ValueError):
    """Invalid partition request or data outside the sample space."""


@dataclass(frozen=True)
class Window:
    level: int
    index: int
    lo: float
    hi: float
    node: int
    parent: int | None
    left_child: int | None
    right_child: int | None


@dataclass
class WindowTree:
    """Flat heap-ordered nested dyadic partition of ``[omega_lo, omega_hi]``.

    ``lo``, ``hi`` and ``split`` are arrays of length ``2**(K+1) - 1``.
    ``split`` holds the cut point of every window, leaves included; leaf
    cut points are only used to report what a deeper tree would do.
    """

    omega_lo: float
    omega_hi: float
    max_depth: int
    lo: np.ndarray
    hi: np.ndarray
    split: np.ndarray
    split_rule: str = "midpoint"

    @property
    def n_windows(self) -> int:
        return self.lo.shape[0]

    @property
    def n_internal(self) -> int:
        """Windows with children, i.e. levels ``0..K-1``."""
        return 2**self.max_depth - 1

    @property
    def levels(self) -> np.ndarray:
        return level_of(np.arange(self.n_windows))

    def level_slice(self, j: int) -> slice:
        if not 0 <= j <= self.max_depth:
            raise IndexError(f"level {j} outside 0..{self.max_depth}")
        return slice(2**j - 1, 2 ** (j + 1) - 1)

    def leaf_edges(self) -> np.ndarray:
        """Sorted boundaries of the level-K windows (length ``2**K + 1``)."""
        sl = self.level_slice(self.max_depth)
        return np.concatenate([self.lo[sl], [self.hi[sl][-1]]])

    def window(self, t: int) -> Window:
        level = int(level_of(t))
        internal = t < self.n_internal
        return Window(
            level=level,
            index=t - (2**level - 1),
            lo=float(self.lo[t]),
            hi=float(self.hi[t]),
            node=t,
            parent=(t - 1) // 2 if t > 0 else None,
            left_child=2 * t + 1 if internal else None,
            right_child=2 * t + 2 if internal else None,
        )

    def __iter__(self):
        return (self.window(t) for t in range(self.n_windows))


def level_of(t):
    """Level of heap node(s) ``t``."""
    t = np.asarray(t)
    out = np.zeros(t.shape, dtype=np.int64)
    v = t + 1
    while np.any(v > 1):
        mask = v > 1
        out[mask] += 1
        v = np.where(mask, v >> 1, v)
    return out if out.ndim else int(out)


def build_ndp(
    omega_lo: float,
    omega_hi: float,
    K: int,
    split_rule: str = "midpoint",
    cdf: Callable | None = None,
    ppf: Callable | None = None,
) -> WindowTree:
    """Build the nested dyadic partition of ``[omega_lo, omega_hi]`` to depth ``K``.

    Parameters
    ----------
    split_rule : {"midpoint", "quantile"}
        ``"quantile"`` splits ``(a, b)`` at ``ppf((cdf(a) + cdf(b)) / 2)``;
        both ``cdf`` and ``ppf`` of the base measure must then be given.
    """
    omega_lo = float(omega_lo)
    omega_hi = float(omega_hi)
    if not (np.isfinite(omega_lo) and np.isfinite(omega_hi)) or omega_lo >= omega_hi:
        raise PartitionError(f"invalid interval [{omega_lo}, {omega_hi}]")
    if int(K) != K or K < 0:
        raise PartitionError(f"max depth must be a non-negative integer, got {K}")
    K = int(K)
    if split_rule not in ("midpoint", "quantile"):
        raise PartitionError(f"unknown split rule {split_rule!r}")
    if split_rule == "quantile" and (cdf is None or ppf is None):
        raise PartitionError("quantile split rule needs both cdf and ppf")
    # leaves narrower than the float spacing cannot exist; also caps memory
    finest = np.ldexp(omega_hi - omega_lo, -K)
    if K > 40 or finest <= 2 * np.spacing(max(abs(omega_lo), abs(omega_hi))):
        raise PartitionError(
            f"depth {K} too fine: windows would collapse below machine spacing"
        )

    n = 2 ** (K + 1) - 1
    lo = np.empty(n)
    hi = np.empty(n)
    split = np.empty(n)
    lo[0], hi[0] = omega_lo, omega_hi
    for j in range(K + 1):
        sl = slice(2**j - 1, 2 ** (j + 1) - 1)
        a, b = lo[sl], hi[sl]
        if split_rule == "midpoint":
            c = a + 0.5 * (b - a)
        else:
            c = np.asarray(ppf(0.5 * (np.asarray(cdf(a)) + np.asarray(cdf(b)))), dtype=float)
        split[sl] = c
        if j == K:
            break
        if np.any(~(a < c)) or np.any(~(c < b)):
            raise PartitionError(
                f"depth {K} too fine: level-{j + 1} windows collapse below machine spacing"
            )
        child = slice(2 ** (j + 1) - 1, 2 ** (j + 2) - 1)
        lo[child] = np.column_stack([a, c]).ravel()
        hi[child] = np.column_stack([c, b]).ravel()
    return WindowTree(omega_lo, omega_hi, K, lo, hi, split, split_rule)


@dataclass
class Dataset:
    """Replicated samples grouped by condition.

    ``samples`` is a flat list of 1-d arrays, one per replicate; ``group``
    maps each replicate to its group index.  Labels are kept as strings.
    """

    samples: list[np.ndarray]
    group: np.ndarray
    group_labels: list[str]
    replicate_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.samples = [np.asarray(s, dtype=float).ravel() for s in self.samples]
        self.group = np.asarray(self.group, dtype=np.int64)
        if not self.replicate_labels:
            self.replicate_labels = [str(j) for j in range(len(self.samples))]
        if self.group.shape[0] != len(self.samples):
            raise PartitionError("one group index per replicate is required")

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[Sequence[float]]], labels=None) -> "Dataset":
        samples, gidx, rlabels = [], [], []
        for i, reps in enumerate(groups):
            for j, x in enumerate(reps):
                samples.append(np.asarray(x, dtype=float))
                gidx.append(i)
                rlabels.append(str(j))
        labels = [str(g) for g in (labels or range(len(groups)))]
        return cls(samples, np.array(gidx, dtype=np.int64), labels, rlabels)

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    @property
    def n_replicates(self) -> int:
        return len(self.samples)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.samples], dtype=np.int64)

    def groups(self) -> list[list[np.ndarray]]:
        out: list[list[np.ndarray]] = [[] for _ in range(self.n_groups)]
        for s, g in zip(self.samples, self.group):
            out[g].append(s)
        return out

    def validate(self, min_groups: int = 2) -> None:
        if self.n_groups < min_groups:
            raise PartitionError(f"need at least {min_groups} groups, got {self.n_groups}")
        present = np.bincount(self.group, minlength=self.n_groups)
        if np.any(present == 0):
            missing = [self.group_labels[i] for i in np.flatnonzero(present == 0)]
            raise PartitionError(f"groups without replicates: {missing}")
        for s in self.samples:
            if not np.all(np.isfinite(s)):
                raise PartitionError("non-finite observation in dataset")


def default_omega(data: Dataset, pad: float = 0.005) -> tuple[float, float]:
    """Data range widened by ``pad`` of its width on each side."""
    allx = np.concatenate([s for s in data.samples if s.size] or [np.zeros(0)])
    if allx.size == 0:
        raise PartitionError("cannot infer sample space from an empty dataset")
    lo, hi = float(allx.min()), float(allx.max())
    width = hi - lo if hi > lo else max(abs(lo), 1.0)
    return lo - pad * width, hi + pad * width


@dataclass
class CountTree:
    """Per-window, per-replicate counts ``n_ij(A)``.

    ``n`` has shape ``(n_windows, n_replicates)``.  Left- and right-child
    counts exist for internal windows only.
    """

    n: np.ndarray
    group: np.ndarray
    n_groups: int
    max_depth: int

    @property
    def n_internal(self) -> int:
        return 2**self.max_depth - 1

    @property
    def left(self) -> np.ndarray:
        m = self.n_internal
        return self.n[1 : 2 * m : 2]

    @property
    def right(self) -> np.ndarray:
        m = self.n_internal
        return self.n[2 : 2 * m + 1 : 2]

    def group_totals(self) -> np.ndarray:
        """``sum_j n_ij(A)`` with shape ``(n_windows, n_groups)``."""
        out = np.zeros((self.n.shape[0], self.n_groups), dtype=self.n.dtype)
        for i in range(self.n_groups):
            out[:, i] = self.n[:, self.group == i].sum(axis=1)
        return out

    def degenerate(self) -> np.ndarray:
        """Windows whose data come from at most one group."""
        return (self.group_totals() > 0).sum(axis=1) <= 1


def bin_counts(tree: WindowTree, data: Dataset) -> CountTree:
    """Count every replicate's observations in every window."""
    edges = tree.leaf_edges()
    n_leaves = edges.size - 1
    R = data.n_replicates
    K = tree.max_depth
    counts = np.zeros((tree.n_windows, R), dtype=np.int64)
    leaf0 = 2**K - 1
    for r, x in enumerate(data.samples):
        bad = np.flatnonzero(~((x >= tree.omega_lo) & (x <= tree.omega_hi)))
        if bad.size:
            raise PartitionError(
                f"observation {int(bad[0])} of replicate {r} (value {x[bad[0]]!r}) "
                f"lies outside [{tree.omega_lo}, {tree.omega_hi}]"
            )
        leaf = np.searchsorted(edges, x, side="right") - 1
        np.clip(leaf, 0, n_leaves - 1, out=leaf)
        counts[leaf0:, r] = np.bincount(leaf, minlength=n_leaves)
    for j in range(K - 1, -1, -1):
        sl = tree.level_slice(j)
        child = tree.level_slice(j + 1)
        c = counts[child]
        counts[sl] = c[0::2] + c[1::2]
    return CountTree(counts, data.group.copy(), data.n_groups, K)


def _labels_to_dataset(rows) -> Dataset:
    gmap: dict[str, int] = {}
    rmap: dict[tuple[str, str], int] = {}
    values: list[list[float]] = []
    group_of: list[int] = []
    rlabels: list[str] = []
    for lineno, (g, r, v) in enumerate(rows, start=1):
        g, r = str(g), str(r)
        try:
            x = float(v)
        except (TypeError, ValueError):
            raise PartitionError(f"record {lineno}: value {v!r} is not a number") from None
        if g not in gmap:
            gmap[g] = len(gmap)
        key = (g, r)
        if key not in rmap:
            rmap[key] = len(rmap)
            values.append([])
            group_of.append(gmap[g])
            rlabels.append(r)
        values[rmap[key]].append(x)
    return Dataset(
        [np.array(v) for v in values],
        np.array(group_of, dtype=np.int64),
        list(gmap),
        rlabels,
    )


def load_dataset(path: str | Path) -> Dataset:
    """Read ``group,replicate,value`` records from CSV or a JSON array."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        try:
            recs = json.loads(text)
            rows = [(d["group"], d["replicate"], d["value"]) for d in recs]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise PartitionError(f"{path}: malformed JSON records ({exc})") from None
        return _labels_to_dataset(rows)
    reader = csv.DictReader(text.splitlines())
    need = {"group", "replicate", "value"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise PartitionError(f"{path}: CSV header must contain group,replicate,value")
    return _labels_to_dataset((d["group"], d["replicate"], d["value"]) for d in reader)
