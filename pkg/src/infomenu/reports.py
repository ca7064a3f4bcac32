"""Files on disk: menu CSV, JSON reports and SVG figures.

All writes go to a temporary file in the target directory and are then
renamed into place. Numbers in CSV use 17 significant digits so a file
read back reproduces the floats exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .core import ORIENTATIONS
from .errors import SchemaError

MENU_COLUMNS = ("mu", "orientation", "noise", "posterior", "price", "surplus", "gross_utility")
SWEEP_COLUMNS = ("t",) + MENU_COLUMNS


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def table_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_menu_csv(path, menu):
    atomic_write(path, table_text(MENU_COLUMNS, menu.records()))


def read_table(path, columns):
    """Read a CSV with exactly ``columns``; numbers parsed as floats."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not rows or tuple(rows[0]) != tuple(columns):
        raise SchemaError(f"{path}: header must be {','.join(columns)}")
    out = {c: [] for c in columns}
    for n, r in enumerate(rows[1:], 2):
        if len(r) != len(columns):
            raise SchemaError(f"{path} line {n}: expected {len(columns)} fields, got {len(r)}")
        for c, v in zip(columns, r):
            if c == "orientation":
                if v not in ORIENTATIONS:
                    raise SchemaError(f"{path} line {n}: unknown orientation {v!r}")
                out[c].append(v)
            else:
                try:
                    x = float(v)
                except ValueError:
                    raise SchemaError(f"{path} line {n}: column {c} is not a number: {v!r}") from None
                if not math.isfinite(x):
                    raise SchemaError(f"{path} line {n}: column {c} is not finite")
                out[c].append(x)
    arrays = {c: (np.array(v, dtype=object) if c == "orientation" else np.array(v, dtype=float))
              for c, v in out.items()}
    return arrays


def read_menu_csv(path):
    m = read_table(path, MENU_COLUMNS)
    mu = m["mu"]
    if mu.size and (np.any(mu < 0) or np.any(mu > 1) or np.any(np.diff(mu) <= 0)):
        raise SchemaError(f"{path}: mu must be strictly increasing inside [0, 1]")
    if np.any(m["noise"] < 0) or np.any(m["noise"] > 1):
        raise SchemaError(f"{path}: noise must lie in [0, 1]")
    return m


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path, obj):
    atomic_write(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# SVG

WIDTH, HEIGHT, PAD = 640, 420, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _scale(xs, ys, x_range, y_range):
    (x0, x1), (y0, y1) = x_range, y_range
    sx = (WIDTH - 2 * PAD) / (x1 - x0 or 1.0)
    sy = (HEIGHT - 2 * PAD) / (y1 - y0 or 1.0)
    px = PAD + (np.asarray(xs) - x0) * sx
    py = HEIGHT - PAD - (np.asarray(ys) - y0) * sy
    return px, py


def svg_plot(series, title, x_label="belief", y_label=""):
    """Line chart; ``series`` is a list of ``(label, xs, ys, dashed)``."""
    allx = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.array([0.0, 1.0])
    ally = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.array([0.0, 1.0])
    xr = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    lo, hi = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    pad = 0.05 * (hi - lo or 1.0)
    yr = (lo - pad, hi + pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>']
    # axes
    out.append(f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>')
    out.append(f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>')
    for k in range(5):
        xv = xr[0] + (xr[1] - xr[0]) * k / 4
        yv = yr[0] + (yr[1] - yr[0]) * k / 4
        px, _ = _scale([xv], [yr[0]], xr, yr)
        _, py = _scale([xr[0]], [yv], xr, yr)
        out.append(f'<text x="{px[0]:.1f}" y="{HEIGHT - PAD + 16}" text-anchor="middle" font-size="11">{xv:.2f}</text>')
        out.append(f'<text x="{PAD - 6}" y="{py[0] + 4:.1f}" text-anchor="end" font-size="11">{yv:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{x_label}</text>')
    if y_label:
        out.append(f'<text x="14" y="{HEIGHT / 2:.1f}" font-size="12" '
                   f'transform="rotate(-90 14 {HEIGHT / 2:.1f})" text-anchor="middle">{y_label}</text>')
    for n, (label, xs, ys, dashed) in enumerate(series):
        px, py = _scale(xs, ys, xr, yr)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        color = COLORS[n % len(COLORS)]
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{pts}"/>')
        ly = PAD + 14 * n
        out.append(f'<line x1="{WIDTH - PAD - 130}" y1="{ly}" x2="{WIDTH - PAD - 110}" y2="{ly}" '
                   f'stroke="{color}"{dash}/>')
        out.append(f'<text x="{WIDTH - PAD - 105}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def menu_svg_from_csv(csv_path, svg_path):
    """Value, gross utility, price and surplus curves read back from the menu CSV."""
    m = read_menu_csv(csv_path)
    v = m["gross_utility"] - m["price"] - m["surplus"]
    series = [("V(mu)", m["mu"], v, False), ("gross utility", m["mu"], m["gross_utility"], True),
              ("price", m["mu"], m["price"], False), ("surplus", m["mu"], m["surplus"], False)]
    atomic_write(svg_path, svg_plot(series, "Optimal menu", y_label="utility"))


def sweep_svg_from_csv(csv_path, svg_path):
    """Gross utility and surplus across dispersion levels, read back from the sweep CSV."""
    s = read_table(csv_path, SWEEP_COLUMNS)
    series = []
    for t in sorted(set(s["t"].tolist())):
        sel = s["t"] == t
        series.append((f"gross t={t:g}", s["mu"][sel], s["gross_utility"][sel], True))
        series.append((f"surplus t={t:g}", s["mu"][sel], s["surplus"][sel], False))
    atomic_write(svg_path, svg_plot(series, "Dispersion sweep", y_label="utility"))
