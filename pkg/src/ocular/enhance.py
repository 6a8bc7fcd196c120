"""Illumination compensation: equalization, bi-histogram equalization, CLAHE, Otsu."""

from __future__ import annotations

import math

import numpy as np

from .imgcore import ImageSizeError, as_gray


def histogram(img) -> np.ndarray:
    return np.bincount(as_gray(img).ravel(), minlength=256).astype(np.int64)


def _equalize_lut(counts: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Map levels onto ``[lo, hi]`` through the CDF of ``counts``.

    A single occupied level maps to ``lo``.
    """
    total = counts.sum()
    lut = np.full(256, lo, dtype=np.int64)
    if total == 0 or np.count_nonzero(counts) <= 1:
        return lut
    cum = np.cumsum(counts)
    if np.issubdtype(cum.dtype, np.integer):
        return lo + ((hi - lo) * cum) // total
    return lo + np.floor((hi - lo) * cum / total + 1e-9).astype(np.int64)


def hist_equalize(img, range_lo: int = 0, range_hi: int = 255) -> np.ndarray:
    img = as_gray(img)
    if img.size == 0:
        raise ImageSizeError("empty image")
    if not 0 <= range_lo < range_hi <= 255:
        raise ValueError("need 0 <= range_lo < range_hi <= 255")
    lut = _equalize_lut(histogram(img), range_lo, range_hi)
    return lut.astype(np.uint8)[img]


def _mid_cdf_lut(counts: np.ndarray, lo: int, hi: int) -> np.ndarray:
    # each level maps through the midpoint of its CDF step, so the mapped
    # subset is centred on its target range rather than pushed upward
    total = counts.sum()
    mid = (np.cumsum(counts) - counts / 2.0) / total
    return np.floor(lo + (hi - lo) * mid + 0.5).astype(np.int64)


def bhe(img) -> np.ndarray:
    """Bi-histogram equalization split at the mean intensity.

    Pixels at or below the mean are equalized onto ``[min, floor(mean)]``,
    the rest onto ``[floor(mean) + 1, max]``.
    """
    img = as_gray(img)
    counts = histogram(img)
    lo, hi = int(img.min()), int(img.max())
    if lo == hi:
        return img.copy()
    m = int(math.floor(img.mean()))
    lower = counts.astype(np.float64)
    lower[m + 1:] = 0
    upper = counts.astype(np.float64)
    upper[:m + 1] = 0
    lut = np.empty(256, dtype=np.int64)
    lut[:m + 1] = _mid_cdf_lut(lower, lo, m)[:m + 1]
    lut[m + 1:] = _mid_cdf_lut(upper, m + 1, hi)[m + 1:]
    return lut.astype(np.uint8)[img]


def _clipped_lut(tile: np.ndarray, clip: float) -> np.ndarray:
    counts = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    if math.isfinite(clip):
        limit = clip * tile.size / 256.0
        # redistribute until the clipped mass settles
        for _ in range(16):
            excess = np.maximum(counts - limit, 0).sum()
            if excess <= 1e-9:
                break
            counts = np.minimum(counts, limit) + excess / 256.0
    return _equalize_lut(counts, 0, 255).astype(np.float64)


def clahe(img, tile: int = 64, clip: float = 3.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization with bilinear blending."""
    img = as_gray(img)
    if tile < 8:
        raise ValueError("tile must be at least 8 pixels")
    if not clip >= 1:
        raise ValueError("clip must be >= 1")
    h, w = img.shape
    ny, nx = max(1, math.ceil(h / tile)), max(1, math.ceil(w / tile))
    padded = np.pad(img, ((0, ny * tile - h), (0, nx * tile - w)), mode="symmetric")
    luts = np.empty((ny, nx, 256))
    for j in range(ny):
        for i in range(nx):
            luts[j, i] = _clipped_lut(padded[j * tile:(j + 1) * tile, i * tile:(i + 1) * tile], clip)
    # tile centres in pixel coordinates
    gy = (np.arange(h) + 0.5) / tile - 0.5
    gx = (np.arange(w) + 0.5) / tile - 0.5
    y0 = np.clip(np.floor(gy).astype(int), 0, ny - 1)
    x0 = np.clip(np.floor(gx).astype(int), 0, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    x1 = np.minimum(x0 + 1, nx - 1)
    fy = np.clip(gy - y0, 0, 1)[:, None]
    fx = np.clip(gx - x0, 0, 1)[None, :]
    v = img.astype(np.int64)
    Y0, X0 = y0[:, None], x0[None, :]
    Y1, X1 = y1[:, None], x1[None, :]
    out = ((1 - fy) * ((1 - fx) * luts[Y0, X0, v] + fx * luts[Y0, X1, v])
           + fy * ((1 - fx) * luts[Y1, X0, v] + fx * luts[Y1, X1, v]))
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(counts: np.ndarray) -> int:
    """Threshold ``T`` maximizing between-class variance of ``{< T}`` vs ``{>= T}``."""
    counts = np.asarray(counts, dtype=np.float64)
    occupied = np.nonzero(counts)[0]
    if len(occupied) == 0:
        raise ValueError("empty histogram")
    lo, hi = int(occupied[0]), int(occupied[-1])
    if lo == hi:
        return lo
    levels = np.arange(256, dtype=np.float64)
    total = counts.sum()
    best_t, best = lo + 1, -1.0
    # class 0 holds levels < t
    c0 = np.cumsum(counts)
    m0 = np.cumsum(levels * counts)
    for t in range(lo + 1, hi + 1):
        n0 = c0[t - 1]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        w0, w1 = n0 / total, n1 / total
        mu0 = m0[t - 1] / n0
        mu1 = (m0[-1] - m0[t - 1]) / n1
        between = w0 * w1 * (mu0 - mu1) ** 2
        if between > best:
            best, best_t = between, t
    return best_t


def otsu(img) -> tuple[int, np.ndarray]:
    img = as_gray(img)
    t = otsu_threshold(histogram(img))
    return t, img >= t
