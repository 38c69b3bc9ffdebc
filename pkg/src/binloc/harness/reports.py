"""CSV tables and SVG charts for experiment results and weight masks."""

import csv
import math
import os
from xml.sax.saxutils import escape

import numpy as np

from .experiment import ConditionResult, ResultTable

RESULT_HEADER = "# binloc result-table v1"
TRIAL_HEADER = "# binloc trial-records v1"
RESULT_COLUMNS = ["condition", "error_rate", "front_back_rate", "trials"]
TRIAL_COLUMNS = ["condition", "trial", "target", "target_azimuth", "masker_azimuth", "estimates", "hit", "front_back"]

# chart geometry, in SVG user units
CHART_HEIGHT = 200.0
BAR_WIDTH = 18.0
BAR_GAP = 4.0
GROUP_GAP = 24.0
MARGIN_LEFT = 50.0
MARGIN_TOP = 20.0
MARGIN_BOTTOM = 110.0
MODE_COLOURS = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"]


def format_rate(x):
    """Rate with at most 6 and at least 2 decimals: 0.25 -> "0.25", 0.1 -> "0.10"."""
    text = f"{round(float(x), 6):.6f}".rstrip("0")
    head, _, tail = text.partition(".")
    return f"{head}.{tail.ljust(2, '0')}"


def _fmt_az(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:g}"


def write_result_csv(path, table):
    with open(path, "w", newline="") as fh:
        fh.write(RESULT_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in table.rows:
            w.writerow([row.condition, format_rate(row.error_rate), format_rate(row.front_back_rate), row.trials])


def read_result_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != RESULT_HEADER:
            raise ValueError(f"{path}: not a result table (header {first!r})")
        rows = list(csv.DictReader(fh))
    table = ResultTable()
    for r in rows:
        n = int(r["trials"])
        table.rows.append(ConditionResult(r["condition"], round(float(r["error_rate"]) * n),
                                          round(float(r["front_back_rate"]) * n), n))
    return table


def write_trial_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(TRIAL_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([r.condition, r.trial, r.target, _fmt_az(r.target_azimuth), _fmt_az(r.masker_azimuth),
                        " ".join(_fmt_az(e) for e in r.estimates), int(r.hit), int(r.front_back)])


def _group_rows(table):
    """Rows grouped by scenario (masker and TMR), keeping first-seen order."""
    groups = {}
    for row in table.rows:
        key, _, mode = row.condition.rpartition("|")
        groups.setdefault(key or row.condition, []).append((mode, row))
    return groups


def bar_chart_svg(table, title="Target localisation error rate"):
    """Grouped bars per scenario, one bar per mode; a white sub-bar marks the front-back share."""
    groups = _group_rows(table)
    modes = []
    for rows in groups.values():
        for mode, _ in rows:
            if mode not in modes:
                modes.append(mode)
    n_bars = sum(len(v) for v in groups.values())
    width = MARGIN_LEFT + n_bars * (BAR_WIDTH + BAR_GAP) + len(groups) * GROUP_GAP + 140.0
    height = MARGIN_TOP + CHART_HEIGHT + MARGIN_BOTTOM
    base = MARGIN_TOP + CHART_HEIGHT
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.2f} {height:.2f}" font-family="sans-serif" font-size="10">',
        f'<text x="{MARGIN_LEFT:.2f}" y="12">{escape(title)}</text>',
        f'<line x1="{MARGIN_LEFT:.2f}" y1="{base:.2f}" x2="{width - 140:.2f}" y2="{base:.2f}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT:.2f}" y1="{MARGIN_TOP:.2f}" x2="{MARGIN_LEFT:.2f}" y2="{base:.2f}" stroke="black"/>',
    ]
    for tick in np.linspace(0.0, 1.0, 6):
        y = base - tick * CHART_HEIGHT
        out.append(f'<text x="{MARGIN_LEFT - 6:.2f}" y="{y + 3:.2f}" text-anchor="end">{tick:.1f}</text>')
    x = MARGIN_LEFT + GROUP_GAP / 2
    for key, rows in groups.items():
        start = x
        for mode, row in rows:
            colour = MODE_COLOURS[modes.index(mode) % len(MODE_COLOURS)]
            h = row.error_rate * CHART_HEIGHT
            fb = row.front_back_rate * CHART_HEIGHT
            out.append(f'<rect class="error" data-condition="{escape(row.condition)}" x="{x:.2f}" '
                       f'y="{base - h:.2f}" width="{BAR_WIDTH:.2f}" height="{h:.2f}" fill="{colour}"/>')
            out.append(f'<rect class="front-back" data-condition="{escape(row.condition)}" x="{x + 3:.2f}" '
                       f'y="{base - fb:.2f}" width="{BAR_WIDTH - 6:.2f}" height="{fb:.2f}" fill="white" '
                       f'stroke="{colour}"/>')
            x += BAR_WIDTH + BAR_GAP
        centre = (start + x - BAR_GAP) / 2
        out.append(f'<text x="{centre:.2f}" y="{base + 14:.2f}" text-anchor="end" '
                   f'transform="rotate(-40 {centre:.2f} {base + 14:.2f})">{escape(key)}</text>')
        x += GROUP_GAP
    for i, mode in enumerate(modes):
        y = MARGIN_TOP + 14 * i
        out.append(f'<rect x="{width - 130:.2f}" y="{y:.2f}" width="10" height="10" '
                   f'fill="{MODE_COLOURS[i % len(MODE_COLOURS)]}"/>')
        out.append(f'<text x="{width - 115:.2f}" y="{y + 9:.2f}">{escape(mode)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_reports(table, out_dir, records=None, prefix="results"):
    """Write ``<prefix>.csv`` (+ trial records) and, unless the table is empty, ``<prefix>.svg``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f"{prefix}.csv")]
    write_result_csv(paths[0], table)
    if records is not None:
        paths.append(os.path.join(out_dir, f"{prefix}_trials.csv"))
        write_trial_csv(paths[-1], records)
    if table.rows:
        paths.append(os.path.join(out_dir, f"{prefix}.svg"))
        with open(paths[-1], "w") as fh:
            fh.write(bar_chart_svg(table))
    return paths


def weight_mask_svg(weights, cell=3.0):
    """Heat map of a (frames, bands) weight mask; low bands at the bottom, white = 0, black = 1."""
    w = np.clip(np.asarray(weights, dtype=np.float64), 0.0, 1.0)
    n_frames, n_bands = w.shape
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{n_frames * cell:.0f}" height="{n_bands * cell:.0f}">']
    for t in range(n_frames):
        for b in range(n_bands):
            g = int(round(255 * (1.0 - w[t, b])))
            out.append(f'<rect x="{t * cell:.2f}" y="{(n_bands - 1 - b) * cell:.2f}" width="{cell:.2f}" '
                       f'height="{cell:.2f}" fill="rgb({g},{g},{g})"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_weight_mask_svg(path, weights):
    with open(path, "w") as fh:
        fh.write(weight_mask_svg(weights))
