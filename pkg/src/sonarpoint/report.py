"""Output artifacts: CSV and JSON with provenance headers, and standalone SVG plots.

Every file carries the schema version, the seed and the SHA-256 of the
resolved configuration, so a result can be traced back to the run that made
it.  Nothing time- or host-dependent is written, which keeps reruns
byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


@dataclass(frozen=True)
class Provenance:
    command: str
    seed: int
    config: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.config)

    def header(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.command, "seed": self.seed,
                "config_sha256": self.sha256}


def fmt(v) -> str:
    """Stable text form for CSV cells."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".9g")
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], prov: Provenance):
    buf = io.StringIO()
    for k, v in prov.header().items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    n = len(columns)
    for row in rows:
        if len(row) != n:
            raise ValueError(f"row has {len(row)} cells, expected {n}")
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[dict, list[dict]]:
    """Parse a file written by :func:`write_csv`; returns (header, rows as dicts of strings)."""
    header, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            header[k] = v
        else:
            body.append(line)
    return header, list(csv.DictReader(body))


def _clean(obj):
    # JSON has no NaN; missing values become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, payload: dict, prov: Provenance):
    doc = dict(prov.header())
    doc["config"] = prov.config
    doc.update(payload)
    Path(path).write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


# -- SVG ------------------------------------------------------------------------

_W, _H = 640, 400
_PAD = (70, 20, 30, 60)  # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.parts = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlim, self.ylim = xlim, ylim

    def x(self, v):
        lo, hi = self.xlim
        return _PAD[0] + (v - lo) / (hi - lo) * (_W - _PAD[0] - _PAD[1])

    def y(self, v):
        lo, hi = self.ylim
        return _H - _PAD[3] - (v - lo) / (hi - lo) * (_H - _PAD[2] - _PAD[3])

    def add(self, s: str):
        self.parts.append(s)

    def render(self, data_columns: Sequence[str], data_rows: Sequence[Sequence], yticks=True, xticks=None) -> str:
        x0, x1 = _PAD[0], _W - _PAD[1]
        y0, y1 = _H - _PAD[3], _PAD[2]
        axes = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
                f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>']
        if yticks:
            for v in _ticks(*self.ylim):
                if self.ylim[0] - 1e-12 <= v <= self.ylim[1] + 1e-12:
                    yy = self.y(v)
                    axes.append(f'<line x1="{x0 - 4}" y1="{yy:.2f}" x2="{x0}" y2="{yy:.2f}" stroke="black"/>')
                    axes.append(f'<text x="{x0 - 6}" y="{yy + 4:.2f}" text-anchor="end">{v:g}</text>')
        for v, label in (xticks or []):
            xx = self.x(v)
            axes.append(f'<text x="{xx:.2f}" y="{y0 + 16}" text-anchor="middle">{escape(label)}</text>')
        axes.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{_H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        axes.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
                    f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(self.ylabel)}</text>')
        axes.append(f'<text x="{(x0 + x1) / 2:.1f}" y="16" text-anchor="middle" font-weight="bold">'
                    f'{escape(self.title)}</text>')
        table = "\n".join([",".join(data_columns)] + [",".join(fmt(v) for v in r) for r in data_rows])
        return "\n".join([
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
            f"<title>{escape(self.title)}</title>",
            f"<desc>{escape(table)}</desc>",
            '<rect width="100%" height="100%" fill="white"/>',
            *axes, *self.parts, "</svg>", ""])


def _finite(vals):
    return [v for v in vals if v is not None and math.isfinite(v)]


def bar_chart(path, title: str, ylabel: str, labels: Sequence[str], values: Sequence[float],
              errors: Sequence[float] | None = None):
    """One bar per label, optional symmetric error bars; missing values leave a gap."""
    errors = list(errors) if errors is not None else [0.0] * len(values)
    tops = _finite([v + (e if math.isfinite(e) else 0.0) for v, e in zip(values, errors) if math.isfinite(v)])
    ymax = max(tops + [1e-9]) * 1.1
    c = _Canvas(title, "", ylabel, (-0.5, len(labels) - 0.5), (0.0, ymax))
    slot = (_W - _PAD[0] - _PAD[1]) / max(len(labels), 1)
    for i, (v, e) in enumerate(zip(values, errors)):
        if not math.isfinite(v):
            continue
        xx = c.x(i)
        c.add(f'<rect x="{xx - 0.3 * slot:.2f}" y="{c.y(v):.2f}" width="{0.6 * slot:.2f}" '
              f'height="{c.y(0) - c.y(v):.2f}" fill="{_COLORS[i % len(_COLORS)]}"/>')
        if e and math.isfinite(e):
            c.add(f'<line x1="{xx:.2f}" y1="{c.y(max(v - e, 0)):.2f}" x2="{xx:.2f}" y2="{c.y(v + e):.2f}" '
                  f'stroke="black"/>')
    rows = [(lab, v, e) for lab, v, e in zip(labels, values, errors)]
    Path(path).write_text(c.render(("label", "value", "error"), rows,
                                   xticks=[(i, lab) for i, lab in enumerate(labels)]))


def line_chart(path, title: str, xlabel: str, ylabel: str, series: dict, lines: dict | None = None,
               xlim=None, ylim=None):
    """Scatter/line plot.

    ``series`` maps a name to ``(xs, ys, yerr or None)``, drawn as markers
    joined by lines; ``lines`` maps a name to ``(slope, intercept)`` drawn
    across the x range.
    """
    xs_all = _finite([x for xs, _, _ in series.values() for x in xs])
    ys_all = _finite([y + (e or 0.0) for _, ys, es in series.values()
                      for y, e in zip(ys, es or [0.0] * len(ys)) if math.isfinite(y)])
    if xlim is None:
        lo, hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
        span = hi - lo or 1.0
        xlim = (lo - 0.05 * span, hi + 0.05 * span)
    if ylim is None:
        ylim = (0.0, (max(ys_all) if ys_all else 1.0) * 1.15 or 1.0)
    c = _Canvas(title, xlabel, ylabel, xlim, ylim)
    rows = []
    for k, (name, (xs, ys, es)) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if len(pts) > 1:
            d = " ".join(f"{c.x(x):.2f},{c.y(y):.2f}" for x, y in pts)
            c.add(f'<polyline points="{d}" fill="none" stroke="{color}"/>')
        for i, (x, y) in enumerate(zip(xs, ys)):
            e = es[i] if es else None
            rows.append((name, x, y, e))
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            c.add(f'<circle cx="{c.x(x):.2f}" cy="{c.y(y):.2f}" r="3" fill="{color}"/>')
            if e and math.isfinite(e):
                c.add(f'<line x1="{c.x(x):.2f}" y1="{c.y(max(y - e, ylim[0])):.2f}" x2="{c.x(x):.2f}" '
                      f'y2="{c.y(min(y + e, ylim[1])):.2f}" stroke="{color}"/>')
        c.add(f'<text x="{_W - _PAD[1] - 4}" y="{_PAD[2] + 14 * (k + 1)}" text-anchor="end" '
              f'fill="{color}">{escape(name)}</text>')
    for k, (name, (slope, icpt)) in enumerate((lines or {}).items()):
        color = _COLORS[k % len(_COLORS)]
        xa, xb = xlim
        c.add(f'<line x1="{c.x(xa):.2f}" y1="{c.y(icpt + slope * xa):.2f}" x2="{c.x(xb):.2f}" '
              f'y2="{c.y(icpt + slope * xb):.2f}" stroke="{color}" stroke-dasharray="4 3"/>')
        rows.append((f"{name} fit", slope, icpt, None))
    xt = [(v, f"{v:g}") for v in _ticks(*xlim) if xlim[0] <= v <= xlim[1]]
    Path(path).write_text(c.render(("series", "x", "y", "err"), rows, xticks=xt))
