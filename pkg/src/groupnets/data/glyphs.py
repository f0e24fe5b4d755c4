"""Two built-in stroke-skeleton alphabets (A-Z) with uniform stroke width.

Letters are polylines in a unit design box (x in [0, 0.7], y in [0, 1],
y growing downward). The ``block`` style is rectilinear; the ``round``
style replaces bowls and hooks with elliptical arcs and uses narrower
proportions, so the two styles read as different typefaces while keeping
plain, decoration-free strokes.
"""

from __future__ import annotations

import numpy as np

from .raster import stroke_bitmap

STYLES = ("block", "round")
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _arc(cx, cy, rx, ry, a0_deg, a1_deg, n=14):
    """Polyline approximation of an elliptical arc (angles in degrees,
    y-down screen convention)."""
    a = np.deg2rad(np.linspace(a0_deg, a1_deg, n))
    return [(cx + rx * np.cos(t), cy + ry * np.sin(t)) for t in a]


_BLOCK = {
    "A": [[(0.0, 1.0), (0.35, 0.0), (0.7, 1.0)], [(0.14, 0.62), (0.56, 0.62)]],
    "B": [[(0.0, 0.0), (0.0, 1.0)],
          [(0.0, 0.0), (0.6, 0.0), (0.6, 0.5), (0.0, 0.5)],
          [(0.0, 0.5), (0.7, 0.5), (0.7, 1.0), (0.0, 1.0)]],
    "C": [[(0.7, 0.0), (0.0, 0.0), (0.0, 1.0), (0.7, 1.0)]],
    "D": [[(0.0, 0.0), (0.45, 0.0), (0.7, 0.22), (0.7, 0.78), (0.45, 1.0), (0.0, 1.0), (0.0, 0.0)]],
    "E": [[(0.7, 0.0), (0.0, 0.0), (0.0, 1.0), (0.7, 1.0)], [(0.0, 0.5), (0.52, 0.5)]],
    "F": [[(0.7, 0.0), (0.0, 0.0), (0.0, 1.0)], [(0.0, 0.5), (0.52, 0.5)]],
    "G": [[(0.7, 0.0), (0.0, 0.0), (0.0, 1.0), (0.7, 1.0), (0.7, 0.55), (0.42, 0.55)]],
    "H": [[(0.0, 0.0), (0.0, 1.0)], [(0.7, 0.0), (0.7, 1.0)], [(0.0, 0.5), (0.7, 0.5)]],
    "I": [[(0.35, 0.0), (0.35, 1.0)], [(0.1, 0.0), (0.6, 0.0)], [(0.1, 1.0), (0.6, 1.0)]],
    "J": [[(0.7, 0.0), (0.7, 0.82), (0.52, 1.0), (0.16, 1.0), (0.0, 0.84)]],
    "K": [[(0.0, 0.0), (0.0, 1.0)], [(0.7, 0.0), (0.02, 0.52), (0.7, 1.0)]],
    "L": [[(0.0, 0.0), (0.0, 1.0), (0.7, 1.0)]],
    "M": [[(0.0, 1.0), (0.0, 0.0), (0.35, 0.5), (0.7, 0.0), (0.7, 1.0)]],
    "N": [[(0.0, 1.0), (0.0, 0.0), (0.7, 1.0), (0.7, 0.0)]],
    "O": [[(0.0, 0.0), (0.7, 0.0), (0.7, 1.0), (0.0, 1.0), (0.0, 0.0)]],
    "P": [[(0.0, 1.0), (0.0, 0.0), (0.7, 0.0), (0.7, 0.52), (0.0, 0.52)]],
    "Q": [[(0.0, 0.0), (0.7, 0.0), (0.7, 1.0), (0.0, 1.0), (0.0, 0.0)],
          [(0.42, 0.62), (0.7, 1.0)]],
    "R": [[(0.0, 1.0), (0.0, 0.0), (0.7, 0.0), (0.7, 0.52), (0.0, 0.52)],
          [(0.3, 0.52), (0.7, 1.0)]],
    "S": [[(0.7, 0.0), (0.0, 0.0), (0.0, 0.5), (0.7, 0.5), (0.7, 1.0), (0.0, 1.0)]],
    "T": [[(0.0, 0.0), (0.7, 0.0)], [(0.35, 0.0), (0.35, 1.0)]],
    "U": [[(0.0, 0.0), (0.0, 1.0), (0.7, 1.0), (0.7, 0.0)]],
    "V": [[(0.0, 0.0), (0.35, 1.0), (0.7, 0.0)]],
    "W": [[(0.0, 0.0), (0.14, 1.0), (0.35, 0.45), (0.56, 1.0), (0.7, 0.0)]],
    "X": [[(0.0, 0.0), (0.7, 1.0)], [(0.7, 0.0), (0.0, 1.0)]],
    "Y": [[(0.0, 0.0), (0.35, 0.45), (0.7, 0.0)], [(0.35, 0.45), (0.35, 1.0)]],
    "Z": [[(0.0, 0.0), (0.7, 0.0), (0.0, 1.0), (0.7, 1.0)]],
}


def _round_style():
    g = {}
    g["A"] = [[(0.0, 1.0), (0.3, 0.0), (0.35, 0.0), (0.65, 1.0)], [(0.13, 0.68), (0.52, 0.68)]]
    g["B"] = [[(0.0, 0.0), (0.0, 1.0)],
              [(0.0, 0.02), (0.33, 0.02)] + _arc(0.33, 0.26, 0.26, 0.24, -90, 90) + [(0.33, 0.5), (0.0, 0.5)],
              [(0.0, 0.5), (0.35, 0.5)] + _arc(0.35, 0.75, 0.29, 0.25, -90, 90) + [(0.35, 1.0), (0.0, 1.0)]]
    g["C"] = [_arc(0.38, 0.5, 0.36, 0.48, -52, -308)]
    g["D"] = [[(0.0, 0.0), (0.0, 1.0)],
              [(0.0, 0.02), (0.3, 0.02)] + _arc(0.3, 0.5, 0.37, 0.48, -90, 90) + [(0.3, 0.98), (0.0, 0.98)]]
    g["E"] = [[(0.62, 0.0), (0.0, 0.0), (0.0, 1.0), (0.62, 1.0)], [(0.0, 0.47), (0.45, 0.47)]]
    g["F"] = [[(0.62, 0.0), (0.0, 0.0), (0.0, 1.0)], [(0.0, 0.47), (0.45, 0.47)]]
    g["G"] = [_arc(0.38, 0.5, 0.36, 0.48, -52, -300) + [(0.66, 0.62), (0.44, 0.62)]]
    g["H"] = [[(0.0, 0.0), (0.0, 1.0)], [(0.62, 0.0), (0.62, 1.0)], [(0.0, 0.47), (0.62, 0.47)]]
    g["I"] = [[(0.31, 0.0), (0.31, 1.0)]]
    g["J"] = [[(0.58, 0.0), (0.58, 0.72)] + _arc(0.3, 0.72, 0.28, 0.26, 0, 180)]
    g["K"] = [[(0.0, 0.0), (0.0, 1.0)], [(0.6, 0.0), (0.02, 0.47)], [(0.18, 0.34), (0.64, 1.0)]]
    g["L"] = [[(0.0, 0.0), (0.0, 1.0), (0.6, 1.0)]]
    g["M"] = [[(0.0, 1.0), (0.0, 0.0), (0.33, 0.62), (0.66, 0.0), (0.66, 1.0)]]
    g["N"] = [[(0.0, 1.0), (0.0, 0.0), (0.64, 1.0), (0.64, 0.0)]]
    g["O"] = [_arc(0.34, 0.5, 0.33, 0.48, 0, 360, n=22)]
    g["P"] = [[(0.0, 0.0), (0.0, 1.0)],
              [(0.0, 0.02), (0.33, 0.02)] + _arc(0.33, 0.27, 0.27, 0.25, -90, 90) + [(0.33, 0.52), (0.0, 0.52)]]
    g["Q"] = [_arc(0.34, 0.5, 0.33, 0.48, 0, 360, n=22), [(0.42, 0.66), (0.66, 1.0)]]
    g["R"] = [[(0.0, 0.0), (0.0, 1.0)],
              [(0.0, 0.02), (0.33, 0.02)] + _arc(0.33, 0.27, 0.27, 0.25, -90, 90) + [(0.33, 0.52), (0.0, 0.52)],
              [(0.3, 0.52), (0.64, 1.0)]]
    g["S"] = [_arc(0.34, 0.25, 0.3, 0.235, -70, 145) + _arc(0.33, 0.745, 0.3, 0.235, -35, 110)[::-1]]
    g["T"] = [[(0.0, 0.0), (0.64, 0.0)], [(0.32, 0.0), (0.32, 1.0)]]
    g["U"] = [[(0.0, 0.0), (0.0, 0.72)] + _arc(0.31, 0.72, 0.31, 0.27, 180, 0)[::-1] + [(0.62, 0.72), (0.62, 0.0)]]
    g["V"] = [[(0.0, 0.0), (0.32, 1.0), (0.64, 0.0)]]
    g["W"] = [[(0.0, 0.0), (0.12, 1.0), (0.33, 0.5), (0.54, 1.0), (0.66, 0.0)]]
    g["X"] = [[(0.0, 0.0), (0.64, 1.0)], [(0.64, 0.0), (0.0, 1.0)]]
    g["Y"] = [[(0.0, 0.0), (0.32, 0.5), (0.64, 0.0)], [(0.32, 0.5), (0.32, 1.0)]]
    g["Z"] = [[(0.0, 0.0), (0.64, 0.0), (0.0, 1.0), (0.64, 1.0)]]
    return g


_ROUND = _round_style()
_SETS = {"block": _BLOCK, "round": _ROUND}

_cache: dict = {}


def glyph_segments(style: str, letter: str) -> np.ndarray:
    """Design-space segments (x1,y1,x2,y2) for one letter."""
    strokes = _SETS[style][letter]
    segs = []
    for line in strokes:
        for (x1, y1), (x2, y2) in zip(line[:-1], line[1:]):
            segs.append((x1, y1, x2, y2))
    return np.asarray(segs, dtype=np.float64)


def render_glyph(style: str, letter: str, height: int,
                 stroke_frac: float = 0.11) -> np.ndarray:
    """Rasterize a letter at the given pixel height, cached.

    The canvas leaves a stroke-width margin on every side so transforms
    sampled later have exact pixel data to interpolate.
    """
    key = (style, letter, height, stroke_frac)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    width = stroke_frac * height
    margin = int(np.ceil(width)) + 1
    segs = glyph_segments(style, letter) * height
    canvas = (height + 2 * margin, int(np.ceil(0.7 * height)) + 2 * margin)
    segs = segs + margin
    bmp = stroke_bitmap(segs[:, [0, 1, 2, 3]], canvas, width)
    _cache[key] = bmp
    return bmp
