"""Serializable fit reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .partition import level_of

__all__ = ["SCHEMA_VERSION", "WindowRecord", "PosteriorReport", "build_report"]

SCHEMA_VERSION = 1


@dataclass
class WindowRecord:
    level: int
    index: int
    lo: float
    hi: float
    pmap: float
    prmap: float
    log_bf: float
    degenerate: bool
    effects: list[float]
    significant: bool = False


@dataclass
class PosteriorReport:
    group_labels: list[str]
    windows: list[WindowRecord]
    pjap: float | None
    prjap: float | None
    threshold: float
    fdr: float | None
    target_fdr: float | None
    significant: list[int]
    config: dict = field(default_factory=dict)
    tool_version: str = ""
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorReport":
        d = dict(d)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        d["windows"] = [WindowRecord(**w) for w in d["windows"]]
        return cls(**d)

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PosteriorReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """One row per tested window."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["level", "index", "lo", "hi", "pmap", "prmap", "log_bf", "degenerate", "significant"]
            + [f"effect_{g}" for g in self.group_labels]
        )
        for r in self.windows:
            w.writerow(
                [r.level, r.index, repr(r.lo), repr(r.hi), repr(r.pmap), repr(r.prmap),
                 repr(r.log_bf), int(r.degenerate), int(r.significant)]
                + [repr(e) for e in r.effects]
            )
        return buf.getvalue()


def _num(x):
    return None if x is None else float(x)


def build_report(result, group_labels, config: dict | None = None, extra: dict | None = None):
    """Assemble a :class:`PosteriorReport` from a fit result."""
    from . import __version__

    tree = result.tree
    W = result.n_tested
    lev = level_of(np.arange(W))
    sig = set(result.decision.significant)
    windows = [
        WindowRecord(
            level=int(lev[t]),
            index=int(t - (2 ** lev[t] - 1)),
            lo=float(tree.lo[t]),
            hi=float(tree.hi[t]),
            pmap=float(result.pmap[t]),
            prmap=float(result.prmap[t]),
            log_bf=float(result.evidence.log_BF[t]),
            degenerate=bool(result.evidence.degenerate[t]),
            effects=[float(e) for e in result.effects[t]],
            significant=t in sig,
        )
        for t in range(W)
    ]
    return PosteriorReport(
        group_labels=[str(g) for g in group_labels],
        windows=windows,
        pjap=_num(result.pjap),
        prjap=_num(result.prjap),
        threshold=float(result.decision.threshold),
        fdr=_num(result.decision.fdr),
        target_fdr=_num(result.decision.target_fdr),
        significant=sorted(int(t) for t in sig),
        config=dict(config or {}),
        tool_version=__version__,
        extra=dict(extra or {}),
    )
