"""CSV and SVG emission for sweep results.

The CSV is the canonical record: one row per (config, SNR point) with a
fixed 16-column header.  Floats are written with ``repr`` so re-parsing
reproduces them bit for bit.  Points where more than 1% of trials failed
get a trailing ``# flagged:`` comment line.  The plot is a self-contained
SVG (log-scale BER against SNR, one series per config) so no rendering
backend is needed.
"""

import csv
import math
from xml.sax.saxutils import escape

from .harness import FAILURE_FLAG_FRACTION, SweepResult, _ITERATIVE

CSV_HEADER = ("experiment", "algorithm", "N", "K", "T_t", "T_d", "rho_c",
              "rho", "layers_or_iters", "snr_db", "ber", "stderr",
              "bits_total", "trials_failed", "flops_total", "seed")


def _as_results(results):
    if isinstance(results, SweepResult):
        results = [results]
    results = list(results)
    if not results or not any(r.points for r in results):
        raise ValueError("results are empty, nothing to emit")
    return results


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_from_results(results):
    """Flatten sweeps into per-point dicts keyed by CSV_HEADER."""
    rows = []
    for sweep in _as_results(results):
        cfg = sweep.config
        iterative = cfg.algorithm in _ITERATIVE
        for point in sweep.points:
            rows.append({
                "experiment": cfg.name,
                "algorithm": cfg.algorithm,
                "N": cfg.n_rx,
                "K": cfg.n_tx,
                "T_t": cfg.t_pilot,
                "T_d": cfg.t_data,
                "rho_c": float(cfg.rho_c),
                "rho": point.rho,
                "layers_or_iters": cfg.iterations if iterative else None,
                "snr_db": float(point.snr_db),
                "ber": float(point.ber),
                "stderr": float(point.stderr),
                "bits_total": point.bits_total,
                "trials_failed": point.trials_failed,
                "flops_total": point.flops.total_flops if point.flops else None,
                "seed": cfg.seed,
            })
    return rows


def emit_csv(results, path):
    """Write one or more sweeps to ``path``; errors before creating a file."""
    results = _as_results(results)
    rows = rows_from_results(results)
    flags = []
    for sweep in results:
        for point in sweep.points:
            if point.trials_failed > FAILURE_FLAG_FRACTION * sweep.config.trials:
                flags.append(f"# flagged: experiment={sweep.config.name} "
                             f"snr_db={_fmt(float(point.snr_db))} "
                             f"trials_failed={point.trials_failed} "
                             f"of {sweep.config.trials} exceeds 1%")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
        for line in flags:
            fh.write(line + "\n")


_COLUMN_TYPES = {"experiment": str, "algorithm": str, "N": int, "K": int,
                 "T_t": int, "T_d": int, "rho_c": float, "rho": float,
                 "layers_or_iters": int, "snr_db": float, "ber": float,
                 "stderr": float, "bits_total": int, "trials_failed": int,
                 "flops_total": int, "seed": int}


def read_csv(path):
    """Parse an emitted CSV back into typed row dicts ('' becomes None)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    for record in reader:
        row = {}
        for key, raw in zip(CSV_HEADER, record):
            row[key] = None if raw == "" else _COLUMN_TYPES[key](raw)
        rows.append(row)
    return rows


# ===== SVG PLOT =====

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 72, 24, 40, 56  # margins around the plot area
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")
_MARKERS = ("circle", "square", "diamond", "triangle")


def _marker_svg(kind, x, y, color):
    r = 3.5
    if kind == "circle":
        return f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{r}" fill="{color}"/>'
    if kind == "square":
        return (f'<rect x="{x - r:.1f}" y="{y - r:.1f}" width="{2 * r}" '
                f'height="{2 * r}" fill="{color}"/>')
    if kind == "diamond":
        pts = f"{x:.1f},{y - r - 1:.1f} {x + r + 1:.1f},{y:.1f} " \
              f"{x:.1f},{y + r + 1:.1f} {x - r - 1:.1f},{y:.1f}"
    else:  # triangle
        pts = f"{x:.1f},{y - r - 1:.1f} {x + r + 1:.1f},{y + r:.1f} " \
              f"{x - r - 1:.1f},{y + r:.1f}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def _text(x, y, s, size=11, anchor="middle", rotate=None):
    extra = f' transform="rotate(-90 {x} {y})"' if rotate else ""
    return (f'<text x="{x}" y="{y}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{escape(s)}</text>')


def emit_plot(results, path, title=None):
    """Write a log-scale BER-vs-SNR SVG with one series per sweep.

    Points with zero or undefined BER are left out of their polyline (a
    zero does not fit on a log axis); a series needs at least one positive
    point to appear.
    """
    results = _as_results(results)
    series = []
    for sweep in results:
        pts = [(p.snr_db, p.ber) for p in sweep.points
               if p.bits_total > 0 and p.ber > 0]
        if pts:
            series.append((sweep.config.name, pts))
    if not series:
        raise ValueError("no positive BER points to plot")

    snrs = sorted({s for _, pts in series for s, _ in pts})
    bers = [b for _, pts in series for _, b in pts]
    x_lo, x_hi = min(snrs), max(snrs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    dec_lo = math.floor(math.log10(min(bers)))
    dec_hi = math.ceil(math.log10(max(bers)))
    if dec_hi == dec_lo:
        dec_hi += 1

    def px(snr):
        return _ML + (snr - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(ber):
        frac = (math.log10(ber) - dec_lo) / (dec_hi - dec_lo)
        return _H - _MB - frac * (_H - _MT - _MB)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    if title:
        parts.append(_text(_W / 2, _MT - 16, title, size=14))

    # frame and decade gridlines
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    for d in range(dec_lo, dec_hi + 1):
        y = py(10.0 ** d)
        if d not in (dec_lo, dec_hi):
            parts.append(f'<line x1="{_ML}" y1="{y:.1f}" x2="{_W - _MR}" '
                         f'y2="{y:.1f}" stroke="#dddddd"/>')
        parts.append(_text(_ML - 8, y + 4, f"1e{d}", anchor="end"))
    for snr in snrs:
        x = px(snr)
        parts.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(_text(x, _H - _MB + 18, f"{snr:g}"))
    parts.append(_text((_ML + _W - _MR) / 2, _H - 16, "SNR (dB)", size=13))
    parts.append(_text(20, (_MT + _H - _MB) / 2, "BER", size=13, rotate=True))

    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        marker = _MARKERS[i % len(_MARKERS)]
        coords = " ".join(f"{px(s):.1f},{py(b):.1f}" for s, b in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        for s, b in pts:
            parts.append(_marker_svg(marker, px(s), py(b), color))

    # legend, top right inside the frame
    lx, ly = _W - _MR - 220, _MT + 12
    for i, (label, _) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        y = ly + 16 * i
        parts.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 24}" y2="{y}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(_marker_svg(_MARKERS[i % len(_MARKERS)], lx + 12, y, color))
        parts.append(_text(lx + 30, y + 4, label, anchor="start"))

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
