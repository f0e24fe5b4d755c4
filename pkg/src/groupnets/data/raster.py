"""Shared rasterization helpers for the stimulus generators.

Everything works on float or boolean numpy images in (row, col) = (y, x)
order with y growing downward. Strokes are rendered as distance fields
around line segments, which gives uniform width and round caps/joints
without any font machinery.
"""

from __future__ import annotations

import numpy as np


def stroke_bitmap(segments, shape, width: float) -> np.ndarray:
    """Rasterize line segments ((x1,y1,x2,y2) rows) as a boolean image.

    A pixel is on iff its center lies within width/2 of any segment.
    """
    h, w = shape
    out = np.zeros((h, w), dtype=bool)
    r = width / 2.0
    pad = int(np.ceil(r)) + 1
    segs = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    for x1, y1, x2, y2 in segs:
        x_lo = max(int(np.floor(min(x1, x2) - pad)), 0)
        x_hi = min(int(np.ceil(max(x1, x2) + pad)) + 1, w)
        y_lo = max(int(np.floor(min(y1, y2) - pad)), 0)
        y_hi = min(int(np.ceil(max(y1, y2) + pad)) + 1, h)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue
        ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi]
        dx, dy = x2 - x1, y2 - y1
        den = dx * dx + dy * dy
        if den < 1e-12:
            t = np.zeros_like(xs, dtype=np.float64)
        else:
            t = ((xs - x1) * dx + (ys - y1) * dy) / den
            t = np.clip(t, 0.0, 1.0)
        px, py = x1 + t * dx, y1 + t * dy
        d2 = (xs - px) ** 2 + (ys - py) ** 2
        out[y_lo:y_hi, x_lo:x_hi] |= d2 <= r * r
    return out


def disc_mask(shape, cx: float, cy: float, r: float) -> np.ndarray:
    h, w = shape
    y_lo = max(int(np.floor(cy - r)) - 1, 0)
    y_hi = min(int(np.ceil(cy + r)) + 2, h)
    x_lo = max(int(np.floor(cx - r)) - 1, 0)
    x_hi = min(int(np.ceil(cx + r)) + 2, w)
    out = np.zeros((h, w), dtype=bool)
    if y_lo >= y_hi or x_lo >= x_hi:
        return out
    ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    out[y_lo:y_hi, x_lo:x_hi] = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    return out


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img (float) at fractional coordinates; outside reads 0."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy, fx = ys - y0, xs - x0

    def at(yy, xx):
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        v = np.zeros(yy.shape, dtype=np.float64)
        v[valid] = img[yy[valid], xx[valid]]
        return v

    v00 = at(y0, x0)
    v01 = at(y0, x0 + 1)
    v10 = at(y0 + 1, x0)
    v11 = at(y0 + 1, x0 + 1)
    return (v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx
            + v10 * fy * (1 - fx) + v11 * fy * fx)


def affine_bitmap(bitmap: np.ndarray, matrix: np.ndarray, out_shape,
                  threshold: float = 0.5) -> np.ndarray:
    """Apply a 2x2 linear map about the image centers with bilinear sampling.

    matrix maps source offsets to destination offsets; the output pixel at
    destination p samples the source at matrix^-1 (p - c_out) + c_in.
    """
    inv = np.linalg.inv(matrix)
    oh, ow = out_shape
    cy_in = (bitmap.shape[0] - 1) / 2.0
    cx_in = (bitmap.shape[1] - 1) / 2.0
    cy_out = (oh - 1) / 2.0
    cx_out = (ow - 1) / 2.0
    ys, xs = np.mgrid[0:oh, 0:ow]
    dx = xs - cx_out
    dy = ys - cy_out
    sx = inv[0, 0] * dx + inv[0, 1] * dy + cx_in
    sy = inv[1, 0] * dx + inv[1, 1] * dy + cy_in
    vals = bilinear_sample(bitmap.astype(np.float64), sy, sx)
    return vals >= threshold


def center_of_mass(bitmap: np.ndarray) -> tuple[float, float]:
    """(x, y) mean coordinate of the on pixels."""
    ys, xs = np.nonzero(bitmap)
    if ys.size == 0:
        raise ValueError("empty bitmap has no center of mass")
    return float(xs.mean()), float(ys.mean())


def shift_bitmap(bitmap: np.ndarray, dx: int, dy: int, out_shape) -> np.ndarray:
    """Integer-shift a bitmap onto a canvas; pixels shifted out are lost."""
    oh, ow = out_shape
    out = np.zeros((oh, ow), dtype=bool)
    ys, xs = np.nonzero(bitmap)
    ys = ys + dy
    xs = xs + dx
    keep = (ys >= 0) & (ys < oh) & (xs >= 0) & (xs < ow)
    out[ys[keep], xs[keep]] = True
    return out


def would_clip(bitmap: np.ndarray, dx: int, dy: int, shape) -> bool:
    """True if any on pixel would land outside the canvas after the shift."""
    ys, xs = np.nonzero(bitmap)
    if ys.size == 0:
        return True
    ys = ys + dy
    xs = xs + dx
    return bool((ys < 0).any() or (ys >= shape[0]).any()
                or (xs < 0).any() or (xs >= shape[1]).any())


def rotation_deg(phi: float) -> np.ndarray:
    a = np.deg2rad(phi)
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def shear_matrix(e: float, axis: str) -> np.ndarray:
    if axis == "horizontal":
        return np.array([[1.0, e], [0.0, 1.0]])
    if axis == "vertical":
        return np.array([[1.0, 0.0], [e, 1.0]])
    raise ValueError(f"shear axis must be horizontal or vertical, got {axis!r}")
