"""Static SVG plots with deterministic output."""

import json
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

WIDTH, HEIGHT = 800, 600
PAD_LEFT, PAD_RIGHT, PAD_TOP, PAD_BOTTOM = 80, 30, 50, 60
MAX_POINTS = 4000
KINDS = ("time_series", "phase_portrait", "histogram_heatmap", "convergence_curve")
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class PlotSpec:
    """What to draw.

    ``series`` names the CSV files the data came from; the CLI checks that
    each of them was written before plotting.
    """

    kind: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    echo: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"plot kind must be one of {KINDS}, got {self.kind!r}")


def _decimate(x, y):
    if len(x) <= MAX_POINTS:
        return x, y
    k = int(np.ceil(len(x) / MAX_POINTS))
    idx = np.arange(0, len(x), k)
    if idx[-1] != len(x) - 1:
        idx = np.append(idx, len(x) - 1)
    return x[idx], y[idx]


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo
    if span == 0:
        span = abs(lo) if lo != 0 else 1.0
        lo, hi = lo - 0.5 * span, hi + 0.5 * span
        span = hi - lo
    return lo - 0.05 * span, hi + 0.05 * span


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def emit_svg(plot, data, path=None):
    """Render ``data`` as an 800x600 SVG.

    Parameters
    ----------
    plot : PlotSpec
    data : dict
        ``name -> (x, y)`` for line kinds; for ``histogram_heatmap`` a dict
        with ``masses`` (2-D) and ``box`` ((xlo, xhi), (ylo, yhi)).
    path : str, optional
        Where to write the file.

    Returns
    -------
    str
        The SVG document.  Identical input gives identical bytes.
    """
    if not data:
        raise ValidationError("nothing to plot: empty data")
    if plot.kind == "histogram_heatmap":
        masses = np.asarray(data["masses"], dtype=float)
        if masses.size == 0:
            raise ValidationError("empty histogram")
        (x0, x1), (y0, y1) = data["box"]
        xr, yr = (x0, x1), (y0, y1)
    else:
        series = {}
        for name, (x, y) in data.items():
            x, y = np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
            if len(x) == 0 or len(x) != len(y):
                raise ValidationError(f"series {name!r} is empty or ragged")
            series[name] = _decimate(x, y)
        xr = _range(np.concatenate([s[0] for s in series.values()]))
        yr = _range(np.concatenate([s[1] for s in series.values()]))
    pw, ph = WIDTH - PAD_LEFT - PAD_RIGHT, HEIGHT - PAD_TOP - PAD_BOTTOM

    def sx(v):
        return PAD_LEFT + (v - xr[0]) / (xr[1] - xr[0]) * pw

    def sy(v):
        return PAD_TOP + ph - (v - yr[0]) / (yr[1] - yr[0]) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           "<metadata>" + escape(json.dumps(plot.echo, sort_keys=True, default=str)) + "</metadata>",
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if plot.kind == "histogram_heatmap":
        nx, ny = masses.shape
        top = masses.max() if masses.max() > 0 else 1.0
        dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
        for i in range(nx):
            for j in range(ny):
                if masses[i, j] <= 0:
                    continue
                shade = int(round(255 * (1 - masses[i, j] / top)))
                xa, ya = sx(x0 + i * dx), sy(y0 + (j + 1) * dy)
                out.append(f'<rect x="{xa:.2f}" y="{ya:.2f}" width="{sx(x0 + (i + 1) * dx) - xa:.2f}" '
                           f'height="{sy(y0 + j * dy) - ya:.2f}" fill="rgb({shade},{shade},255)"/>')
    else:
        for n, (name, (x, y)) in enumerate(series.items()):
            c = COLORS[n % len(COLORS)]
            if len(x) == 1:
                out.append(f'<circle cx="{sx(x[0]):.2f}" cy="{sy(y[0]):.2f}" r="4" fill="{c}"/>')
            else:
                pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
                out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1" points="{pts}"/>')
            out.append(f'<text x="{WIDTH - PAD_RIGHT - 10}" y="{PAD_TOP + 15 * (n + 1)}" '
                       f'text-anchor="end" font-size="12" fill="{c}">{escape(str(name))}</text>')
    out.append(f'<rect x="{PAD_LEFT}" y="{PAD_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for v in _ticks(*xr):
        out.append(f'<text x="{sx(v):.2f}" y="{HEIGHT - PAD_BOTTOM + 18}" text-anchor="middle" '
                   f'font-size="11">{v:.3g}</text>')
    for v in _ticks(*yr):
        out.append(f'<text x="{PAD_LEFT - 6}" y="{sy(v) + 4:.2f}" text-anchor="end" font-size="11">{v:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">'
               f'{escape(plot.xlabel)}</text>')
    out.append(f'<text x="18" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 18 {HEIGHT / 2:.0f})">{escape(plot.ylabel)}</text>')
    out.append(f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" font-size="15">{escape(plot.title)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
