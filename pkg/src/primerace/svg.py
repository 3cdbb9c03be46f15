"""Minimal SVG line and histogram plots (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
W, H = 640, 360
MAX_POINTS = 4000
ML, MR, MT, MB = 60, 20, 30, 40


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _thin(xs, ys, max_points=MAX_POINTS):
    """Keep the min and max of each of max_points/2 index buckets, so spikes stay visible."""
    n = len(xs)
    if n <= max_points:
        return xs, ys
    edges = np.linspace(0, n, max_points // 2 + 1).astype(np.int64)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            seg = ys[a:b]
            keep += [a + int(np.argmin(seg)), a + int(np.argmax(seg))]
    keep = np.unique(np.array(keep + [0, n - 1]))
    return xs[keep], ys[keep]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


class _Frame:
    def __init__(self, title, xlim, ylim, xlabel, ylabel):
        self.xlim = xlim
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 1, ylim[1] + 1)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
            f'<text x="{W / 2}" y="{H - 6}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        ]
        for t in _ticks(*self.xlim):
            x = self.px(t)
            self.parts.append(f'<text x="{_fmt(x)}" y="{H - MB + 14}" text-anchor="middle" font-size="10">{t:.3g}</text>')
        for t in _ticks(*self.ylim):
            y = self.py(t)
            self.parts.append(f'<text x="{ML - 4}" y="{_fmt(y + 3)}" text-anchor="end" font-size="10">{t:.3g}</text>')

    def px(self, x):
        a, b = self.xlim
        return ML + (np.asarray(x) - a) / (b - a) * (W - ML - MR)

    def py(self, y):
        a, b = self.ylim
        return H - MB - (np.asarray(y) - a) / (b - a) * (H - MT - MB)

    def polyline(self, xs, ys, color, label=None, idx=0):
        xs, ys = _thin(np.asarray(xs), np.asarray(ys))
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(xs), self.py(ys)))
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        if label is not None:
            y = MT + 14 + 14 * idx
            self.parts.append(f'<line x1="{W - MR - 110}" y1="{y - 4}" x2="{W - MR - 90}" y2="{y - 4}" stroke="{color}"/>')
            self.parts.append(f'<text x="{W - MR - 86}" y="{y}" font-size="11">{escape(label)}</text>')

    def hline(self, y, color="#999999"):
        yy = self.py(y)
        self.parts.append(f'<line x1="{ML}" y1="{_fmt(yy)}" x2="{W - MR}" y2="{_fmt(yy)}" stroke="{color}" stroke-dasharray="4 3"/>')

    def rect(self, x0, x1, y, color):
        a, b = self.px([x0, x1])
        top = self.py(y)
        base = self.py(self.ylim[0])
        self.parts.append(f'<rect x="{_fmt(a)}" y="{_fmt(top)}" width="{_fmt(b - a)}" height="{_fmt(base - top)}" '
                          f'fill="{color}" fill-opacity="0.45" stroke="none"/>')

    def comment(self, text):
        self.parts.insert(1, f"<!-- {escape(text).replace('--', '- -')} -->")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(series: dict, title="", xlabel="", ylabel="", logx=False, hlines=(), meta="") -> str:
    """``series`` maps a label to (x, y) arrays."""
    xs_all = [np.log10(np.asarray(x, float)) if logx else np.asarray(x, float) for x, _ in series.values()]
    ys_all = [np.asarray(y, float) for _, y in series.values()]
    xlo = min(float(x.min()) for x in xs_all)
    xhi = max(float(x.max()) for x in xs_all)
    ylo = min([float(y.min()) for y in ys_all] + list(hlines))
    yhi = max([float(y.max()) for y in ys_all] + list(hlines))
    pad = 0.05 * (yhi - ylo or 1.0)
    f = _Frame(title, (xlo, xhi), (ylo - pad, yhi + pad), ("log10 " if logx else "") + xlabel, ylabel)
    for h in hlines:
        f.hline(h)
    for k, (label, x, y) in enumerate(zip(series, xs_all, ys_all)):
        f.polyline(x, y, PALETTE[k % len(PALETTE)], label, k)
    if meta:
        f.comment(meta)
    return f.render()


def histogram(samples: np.ndarray, labels, bins=60, title="", meta="") -> str:
    """Overlaid histograms of the columns of ``samples`` (normalized to densities)."""
    samples = np.atleast_2d(samples)
    lo = float(samples.min())
    hi = float(samples.max())
    edges = np.linspace(lo, hi if hi > lo else lo + 1, bins + 1)
    dens = [np.histogram(samples[:, j], bins=edges, density=True)[0] for j in range(samples.shape[1])]
    top = max(float(d.max()) for d in dens)
    f = _Frame(title, (edges[0], edges[-1]), (0.0, top * 1.05 or 1.0), "x", "density")
    for j, d in enumerate(dens):
        color = PALETTE[j % len(PALETTE)]
        for k in range(bins):
            if d[k] > 0:
                f.rect(edges[k], edges[k + 1], d[k], color)
        y = MT + 14 + 14 * j
        f.parts.append(f'<rect x="{W - MR - 110}" y="{y - 9}" width="20" height="8" fill="{color}" fill-opacity="0.45"/>')
        f.parts.append(f'<text x="{W - MR - 86}" y="{y}" font-size="11">{escape(str(labels[j]))}</text>')
    if meta:
        f.comment(meta)
    return f.render()
