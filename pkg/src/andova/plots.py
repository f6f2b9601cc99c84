"""Minimal SVG renderings of a report: a triangular PMAP tree and effect-size panels."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .report import PosteriorReport

__all__ = ["pmap_tree_svg", "effects_svg"]

_W = 800
_ROW = 28
_PAD = 40


def _rgb(r, g, b):
    return f"rgb({int(r)},{int(g)},{int(b)})"


def _heat(v):
    # white -> red
    v = min(1.0, max(0.0, v))
    return _rgb(255, 255 * (1 - v), 255 * (1 - v))


def _diverging(v, vmax):
    # blue (negative) -> white -> red (positive)
    x = 0.0 if vmax <= 0 else max(-1.0, min(1.0, v / vmax))
    if x >= 0:
        return _rgb(255, 255 * (1 - x), 255 * (1 - x))
    return _rgb(255 * (1 + x), 255 * (1 + x), 255)


def _cells(report: PosteriorReport, y0: float):
    """Yield (x, y, w, h, record) with row j spanning (j+1)/L of the width."""
    n_levels = max((r.level for r in report.windows), default=-1) + 1
    for r in report.windows:
        span = _W * (r.level + 1) / n_levels
        w = span / 2**r.level
        x = _PAD + (_W - span) / 2 + r.index * w
        yield x, y0 + r.level * _ROW, w, _ROW - 2, r


def _doc(body, height, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W + 2 * _PAD}" height="{height}" '
        f'font-family="sans-serif" font-size="12">\n'
        f'<text x="{_PAD}" y="20">{escape(title)}</text>\n' + "".join(body) + "</svg>\n"
    )


def _rect(x, y, w, h, fill, tip):
    return (
        f'<rect x="{x:.3f}" y="{y:.1f}" width="{max(w, 0.2):.3f}" height="{h}" fill="{fill}" '
        f'stroke="#999" stroke-width="{0.3 if w > 2 else 0}"><title>{escape(tip)}</title></rect>\n'
    )


def pmap_tree_svg(report: PosteriorReport) -> str:
    n_levels = max((r.level for r in report.windows), default=-1) + 1
    body = []
    for x, y, w, h, r in _cells(report, 35):
        tip = f"level {r.level} [{r.lo:.4g}, {r.hi:.4g}) PMAP {r.pmap:.3f}"
        body.append(_rect(x, y, w, h, _heat(r.pmap), tip))
    title = "PMAP by window"
    if report.pjap is not None:
        title += f" (PJAP {report.pjap:.3f})"
    return _doc(body, 35 + n_levels * _ROW + _PAD, title)


def effects_svg(report: PosteriorReport) -> str:
    n_levels = max((r.level for r in report.windows), default=-1) + 1
    vmax = max((abs(e) for r in report.windows for e in r.effects), default=0.0)
    panel = n_levels * _ROW + 30
    body = []
    for g, label in enumerate(report.group_labels):
        y0 = 35 + g * panel
        body.append(f'<text x="{_PAD}" y="{y0 + 12}">{escape(label)}</text>\n')
        for x, y, w, h, r in _cells(report, y0 + 18):
            e = r.effects[g]
            tip = f"level {r.level} [{r.lo:.4g}, {r.hi:.4g}) effect {e:.3g}"
            body.append(_rect(x, y, w, h, _diverging(e, vmax), tip))
    title = f"Effect sizes (colour scale +/-{vmax:.3g})"
    return _doc(body, 35 + len(report.group_labels) * panel + _PAD, title)
