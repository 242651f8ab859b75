"""Hand-written SVG line charts of the per-epoch metric history."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import FormatError

COLUMNS = ("epoch", "train_loss", "train_acc", "train_iou", "val_loss", "val_acc", "val_iou")
CHARTS = {
    "accuracy": ("train_acc", "val_acc", "Accuracy"),
    "loss": ("train_loss", "val_loss", "Loss"),
    "iou": ("train_iou", "val_iou", "IoU"),
}
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
COLORS = ("#1f77b4", "#ff7f0e")


def read_metrics(path) -> dict[str, list[float]]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: line 1: empty file")
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise FormatError(f"{path}: line 1: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in COLUMNS}
        series: dict[str, list[float]] = {c: [] for c in COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = {c: float(row[i]) for c, i in pos.items()}
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            for c, v in values.items():
                series[c].append(v)
    if not series["epoch"]:
        raise FormatError(f"{path}: no data rows")
    return series


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def render_chart(epochs, train, val, title) -> str:
    ys = [v for v in train + val if math.isfinite(v)] or [0.0]
    y_lo, y_hi = min(ys), max(ys)
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_lo, x_hi = min(epochs), max(epochs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return TOP + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{LEFT - 6}" y="{sy(t) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{t:.3g}</text>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(t):.1f}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="11">{t:.0f}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="13">Epoch</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(title)}</text>')
    for (label, values), color in zip((("train", train), ("validation", val)), COLORS):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(epochs, values))
        out.append(f'<polyline class="{label}" fill="none" stroke="{color}" stroke-width="2" '
                   f'points="{pts}"/>')
        if len(values) == 1:
            out.append(f'<circle class="{label}" cx="{sx(epochs[0]):.2f}" cy="{sy(values[0]):.2f}" '
                       f'r="3" fill="{color}"/>')
    for i, (label, color) in enumerate(zip(("train", "validation"), COLORS)):
        y = TOP + 12 + 18 * i
        x = LEFT + pw - 110
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_curves(metrics_csv, out_dir) -> list[Path]:
    """Write accuracy.svg, loss.svg and iou.svg (train vs validation per epoch)."""
    series = read_metrics(metrics_csv)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, (train_col, val_col, title) in CHARTS.items():
        path = out_dir / f"{stem}.svg"
        path.write_text(render_chart(series["epoch"], series[train_col], series[val_col], title),
                        encoding="utf-8")
        written.append(path)
    return written
