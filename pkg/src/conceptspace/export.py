"""Heatmap CSV/SVG emission and deterministic JSON/CSV writers."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

CELL = 56
LABEL_W = 110
LABEL_H = 90


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), indent=2, ensure_ascii=False, sort_keys=False) + "\n"


def _check_rect(matrix: Sequence[Sequence[float | None]], rows: Sequence[str], cols: Sequence[str]):
    if len(matrix) != len(rows):
        raise ValueError(f"{len(matrix)} matrix rows for {len(rows)} labels")
    for i, row in enumerate(matrix):
        if len(row) != len(cols):
            raise ValueError(f"ragged matrix: row {i} has {len(row)} cells, expected {len(cols)}")


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6g}"


def heatmap_csv(matrix, rows: Sequence[str], cols: Sequence[str] | None = None) -> str:
    cols = list(rows) if cols is None else list(cols)
    matrix = [list(r) for r in matrix]
    _check_rect(matrix, rows, cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + cols)
    for label, row in zip(rows, matrix):
        w.writerow([label] + [_fmt(x) for x in row])
    return buf.getvalue()


def read_heatmap_csv(path: str | Path) -> tuple[list[str], list[str], list[list[float | None]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = list(csv.reader(fh))
    cols = reader[0][1:]
    rows, matrix = [], []
    for r in reader[1:]:
        rows.append(r[0])
        matrix.append([float(x) if x != "" else None for x in r[1:]])
    return rows, cols, matrix


def _color(t: float, diverging: bool) -> str:
    if diverging:
        # blue (-) -> white -> red (+), t in [0, 1] with 0.5 white
        if t < 0.5:
            f = t / 0.5
            r, g, b = 59 + (255 - 59) * f, 76 + (255 - 76) * f, 192 + (255 - 192) * f
        else:
            f = (t - 0.5) / 0.5
            r, g, b = 255 - (255 - 180) * f, 255 - (255 - 4) * f, 255 - (255 - 38) * f
    else:
        # light yellow -> dark blue
        r, g, b = 255 - 222 * t, 255 - 160 * t, 217 - 92 * t
    return f"#{int(round(r)):02x}{int(round(g)):02x}{int(round(b)):02x}"


def heatmap_svg(matrix, rows: Sequence[str], cols: Sequence[str] | None = None,
                stars: Sequence[Sequence[int]] | None = None, title: str = "",
                diverging: bool = False) -> str:
    """Heat grid with per-cell value text and optional significance stars.

    The color scale bounds go into <metadata> as JSON; a constant matrix is
    drawn in a single color and flagged ``degenerate``.
    """
    cols = list(rows) if cols is None else list(cols)
    matrix = [list(r) for r in matrix]
    _check_rect(matrix, rows, cols)
    if stars is not None:
        _check_rect([list(s) for s in stars], rows, cols)
    vals = [float(x) for r in matrix for x in r if x is not None and not math.isnan(x)]
    vmin, vmax = (min(vals), max(vals)) if vals else (0.0, 0.0)
    if diverging and vals:
        bound = max(abs(vmin), abs(vmax))
        vmin, vmax = -bound, bound
    degenerate = bool(vmax == vmin)
    width = LABEL_W + CELL * len(cols) + 10
    height = LABEL_H + CELL * len(rows) + 10
    meta = json.dumps({"vmin": vmin, "vmax": vmax, "degenerate": degenerate, "diverging": diverging})
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f"<metadata>{escape(meta)}</metadata>",
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    for j, c in enumerate(cols):
        x = LABEL_W + CELL * j + CELL / 2
        out.append(f'<text x="{x:.1f}" y="{LABEL_H - 6}" transform="rotate(-45 {x:.1f} {LABEL_H - 6})">'
                   f"{escape(c)}</text>")
    for i, r in enumerate(rows):
        y = LABEL_H + CELL * i
        out.append(f'<text x="{LABEL_W - 6}" y="{y + CELL / 2 + 4:.1f}" text-anchor="end">{escape(r)}</text>')
        for j, x in enumerate(matrix[i]):
            missing = x is None or math.isnan(x)
            if missing:
                fill = "#dddddd"
            elif degenerate:
                fill = _color(0.5, diverging)
            else:
                fill = _color((x - vmin) / (vmax - vmin), diverging)
            cx = LABEL_W + CELL * j
            out.append(f'<rect x="{cx}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#ffffff"/>')
            text = "" if missing else f"{x:.2f}"
            if stars is not None and stars[i][j]:
                text += "*" * int(stars[i][j])
            if text:
                out.append(f'<text x="{cx + CELL / 2:.1f}" y="{y + CELL / 2 + 4:.1f}" '
                           f'text-anchor="middle">{escape(text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_heatmap(matrix, rows: Sequence[str], out_stem: str | Path, cols: Sequence[str] | None = None,
                   stars=None, title: str = "", diverging: bool = False) -> tuple[Path, Path]:
    stem = Path(out_stem)
    csv_path, svg_path = stem.with_suffix(".csv"), stem.with_suffix(".svg")
    csv_path.write_text(heatmap_csv(matrix, rows, cols), encoding="utf-8")
    svg_path.write_text(heatmap_svg(matrix, rows, cols, stars, title, diverging), encoding="utf-8")
    return csv_path, svg_path
