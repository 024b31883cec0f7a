"""Minimal SVG line plots and heat maps (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

N_COLOURS = {1: "#7b3fa0", 2: "#2a9d3a", 3: "#2b5fd9", 4: "#d62728"}
_W, _H = 640, 420
_L, _R, _T, _B = 70, 20, 30, 50


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


class _Axes:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="16" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 16 {_H / 2})">{escape(ylabel)}</text>',
        ]
        self._frame()

    def px(self, x):
        return _L + (x - self.x0) / (self.x1 - self.x0) * (_W - _L - _R)

    def py(self, y):
        return _H - _B - (y - self.y0) / (self.y1 - self.y0) * (_H - _T - _B)

    def _frame(self):
        p = self.parts
        p.append(f'<rect x="{_L}" y="{_T}" width="{_W - _L - _R}" height="{_H - _T - _B}" fill="none" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            p.append(f'<line x1="{x:.1f}" y1="{_H - _B}" x2="{x:.1f}" y2="{_H - _B + 5}" stroke="black"/>')
            p.append(f'<text x="{x:.1f}" y="{_H - _B + 18}" text-anchor="middle">{t:g}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            p.append(f'<line x1="{_L - 5}" y1="{y:.1f}" x2="{_L}" y2="{y:.1f}" stroke="black"/>')
            p.append(f'<text x="{_L - 8}" y="{y + 4:.1f}" text-anchor="end">{t:.3g}</text>')

    def line(self, x, y, colour="black", dashed=False, width=1.5):
        pts = [f"{self.px(a):.2f},{self.py(b):.2f}" for a, b in zip(x, y) if np.isfinite(a) and np.isfinite(b)]
        if len(pts) < 2:
            return
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        self.parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" stroke="{colour}" stroke-width="{width}"{dash}/>'
        )

    def vline(self, x, colour="grey"):
        self.parts.append(
            f'<line x1="{self.px(x):.2f}" y1="{_T}" x2="{self.px(x):.2f}" y2="{_H - _B}" stroke="{colour}" stroke-dasharray="2,3"/>'
        )

    def rect(self, x, y, w, h, colour):
        X0, X1 = self.px(x), self.px(x + w)
        Y0, Y1 = self.py(y + h), self.py(y)
        self.parts.append(
            f'<rect x="{X0:.2f}" y="{Y0:.2f}" width="{X1 - X0 + 0.3:.2f}" height="{Y1 - Y0 + 0.3:.2f}" fill="{colour}"/>'
        )

    def legend(self, items):
        x0 = _W - _R - 96
        self.parts.append(
            f'<rect x="{x0}" y="{_T + 2}" width="90" height="{16 * len(items) + 6}" fill="white" stroke="grey"/>'
        )
        for k, (label, colour) in enumerate(items):
            y = _T + 14 + 16 * k
            x = _W - _R - 90
            self.parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 18}" y2="{y - 4}" stroke="{colour}" stroke-width="3"/>')
            self.parts.append(f'<text x="{x + 24}" y="{y}">{escape(label)}</text>')

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _segments_by_n(beta, values, nstar, join=True):
    """Split a curve into runs of constant N*; with ``join`` each run also
    takes the first point of the next so the curve stays connected."""
    start = 0
    for i in range(1, len(beta) + 1):
        if i == len(beta) or nstar[i] != nstar[start]:
            stop = min(i + 1, len(beta)) if join else i
            yield int(nstar[start]), beta[start:stop], values[start:stop]
            start = i


def _limits(*arrays):
    finite = np.concatenate([np.asarray(a, float)[np.isfinite(a)] for a in arrays])
    lo, hi = float(finite.min()), float(finite.max())
    pad = 0.05 * (hi - lo or 1.0)
    return lo - pad, hi + pad


def figure1_svg(beta, log_overall, nstar, log_per_n: dict, transitions) -> str:
    ax = _Axes(
        (beta[0], beta[-1]),
        _limits(log_overall, *log_per_n.values()),
        "Optimal kernel sum vs beta (solid: overall, dashed: best per N)",
        "beta",
        "ln(kernel sum)",
    )
    for n, curve in log_per_n.items():
        ax.line(beta, curve, N_COLOURS.get(n, "black"), dashed=True, width=1)
    for n, xs, ys in _segments_by_n(beta, log_overall, nstar):
        ax.line(xs, ys, N_COLOURS.get(n, "black"), width=2.5)
    for t in transitions:
        ax.vline(t)
    ax.legend([(f"N = {n}", N_COLOURS[n]) for n in sorted(log_per_n)])
    return ax.svg()


def figure2_svg(beta, radii, nstar) -> str:
    """``radii`` is (n_beta, 4) with NaN for unused slots."""
    ax = _Axes((beta[0], beta[-1]), _limits(radii), "Radii of the optimal shapes", "beta", "scaled radius")
    for k in range(radii.shape[1]):
        for n, xs, ys in _segments_by_n(beta, radii[:, k], nstar, join=False):
            ax.line(xs, ys, N_COLOURS.get(n, "black"), width=2)
    return ax.svg()


def figure3_svg(beta, energy, nstar) -> str:
    ax = _Axes((beta[0], beta[-1]), _limits(energy), "Bleached area of the optimal shapes", "beta", "energy (area / R^2)")
    for n, xs, ys in _segments_by_n(beta, energy, nstar):
        ax.line(xs, ys, N_COLOURS.get(n, "black"), width=2)
    return ax.svg()


def problem2_svg(beta, energy, nstar) -> str:
    db = beta[1] - beta[0] if len(beta) > 1 else 1.0
    de = energy[1] - energy[0] if len(energy) > 1 else 1.0
    ax = _Axes(
        (beta[0] - db / 2, beta[-1] + db / 2),
        (energy[0] - de / 2, energy[-1] + de / 2),
        "Optimal N at fixed bleached area",
        "beta",
        "energy (area / R^2)",
    )
    for i, b in enumerate(beta):
        for j, e in enumerate(energy):
            n = int(nstar[i, j])
            ax.rect(b - db / 2, e - de / 2, db, de, N_COLOURS.get(n, "#dddddd"))
    ax.legend([(f"N = {n}", c) for n, c in N_COLOURS.items()])
    return ax.svg()
