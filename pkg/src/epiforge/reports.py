"""Atomic report writing and minimal SVG line charts."""

from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from pathlib import Path

from .errors import IoFailure

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temp path next to ``path``; it replaces ``path`` only on success."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        os.close(fd)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}") from None
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_text(path, text):
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def write_rows(path, header, rows):
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)


def fmt(value):
    return repr(float(value))


def line_chart(series, title, *, width=900, height=420, x_label="", y_label=""):
    """SVG polyline chart; ``series`` is a list of (label, xs, ys) with numeric xs."""
    pad_l, pad_r, pad_t, pad_b = 70, 160, 40, 40
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    if not xs:
        xs, ys = [0, 1], [0, 1]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<text x="{pad_l - 6}" y="{pad_t + 4}" text-anchor="end">{y1:.4g}</text>',
        f'<text x="{pad_l - 6}" y="{pad_t + ph}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad_l}" y="{height - 20}">{x0:.4g}</text>',
        f'<text x="{pad_l + pw}" y="{height - 20}" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">{x_label}</text>',
        f'<text x="14" y="{pad_t + ph / 2:.1f}" transform="rotate(-90 14 {pad_t + ph / 2:.1f})" '
        f'text-anchor="middle">{y_label}</text>',
    ]
    if y0 < 0 < y1:
        out.append(f'<line x1="{pad_l}" x2="{pad_l + pw}" y1="{py(0):.2f}" y2="{py(0):.2f}" '
                   'stroke="#bbb" stroke-dasharray="4 3"/>')
    legend = {}
    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[list(legend).index(label) % len(PALETTE)] if label in legend else \
            PALETTE[len(legend) % len(PALETTE)]
        legend.setdefault(label, color)
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.4"/>')
    for i, (label, color) in enumerate(legend.items()):
        y = pad_t + 14 + 16 * i
        out.append(f'<line x1="{pad_l + pw + 10}" x2="{pad_l + pw + 30}" y1="{y - 4}" y2="{y - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 34}" y="{y}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
