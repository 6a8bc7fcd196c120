"""Raster primitives shared by every pipeline.

Images are plain numpy arrays indexed ``[y, x]`` with the origin at the
top-left pixel, x to the right and y downward. Gray images are ``uint8``,
binary images are ``bool``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

METRICS = ("chessboard", "cityblock", "euclidean", "quasi_euclidean")


class ImageSizeError(ValueError):
    pass


class BoundsError(IndexError):
    pass


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate rect {self}")

    @property
    def x2(self) -> int:
        """Exclusive right edge."""
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def inside(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x2 <= width and self.y2 <= height

    def iou(self, other: "Rect") -> float:
        ix = max(0, min(self.x2, other.x2) - max(self.x, other.x))
        iy = max(0, min(self.y2, other.y2) - max(self.y, other.y))
        inter = ix * iy
        return inter / float(self.area + other.area - inter)

    def scaled(self, k: float) -> "Rect":
        return Rect(int(round(self.x * k)), int(round(self.y * k)),
                    max(1, int(round(self.w * k))), max(1, int(round(self.h * k))))

    def clamp(self, width: int, height: int) -> "Rect":
        x = min(max(self.x, 0), width - 1)
        y = min(max(self.y, 0), height - 1)
        x2 = min(max(self.x2, x + 1), width)
        y2 = min(max(self.y2, y + 1), height)
        return Rect(x, y, x2 - x, y2 - y)

    def crop(self, img: np.ndarray) -> np.ndarray:
        return img[self.y:self.y2, self.x:self.x2]


def as_gray(img) -> np.ndarray:
    """Validate and coerce to a 2-D uint8 image."""
    a = np.asarray(img)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ImageSizeError(f"expected a non-empty 2-D image, got shape {a.shape}")
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255):
            raise ValueError("intensities outside [0, 255]")
        a = a.astype(np.uint8)
    return a


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half-up and clamp real values into [0, 255]."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# integral images

def integral_image(img) -> np.ndarray:
    """Summed-area table, ``I[y, x] = sum(img[:y+1, :x+1])``, as int64."""
    img = as_gray(img)
    return img.astype(np.int64).cumsum(axis=0).cumsum(axis=1)


def squared_integral_image(img) -> np.ndarray:
    img = as_gray(img)
    v = img.astype(np.int64)
    return (v * v).cumsum(axis=0).cumsum(axis=1)


def padded_integral(img) -> np.ndarray:
    """Integral image with a leading zero row and column: ``P[y, x] = sum(img[:y, :x])``.

    Lets rectangle sums skip the missing-term special cases.
    """
    ii = integral_image(img)
    return np.pad(ii, ((1, 0), (1, 0)))


def rect_sum(ii: np.ndarray, r: Rect) -> int:
    h, w = ii.shape
    if not r.inside(w, h):
        raise BoundsError(f"{r} outside {w}x{h} integral image")
    x0, y0, x1, y1 = r.x - 1, r.y - 1, r.x2 - 1, r.y2 - 1
    total = int(ii[y1, x1])
    if x0 >= 0:
        total -= int(ii[y1, x0])
    if y0 >= 0:
        total -= int(ii[y0, x1])
    if x0 >= 0 and y0 >= 0:
        total += int(ii[y0, x0])
    return total


# ---------------------------------------------------------------------------
# resampling and rotation

def _cubic_weights(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Catmull-Rom weights for the 4 taps at offsets -1, 0, 1, 2 from floor(src)."""
    t = t[:, None]
    d = np.abs(np.array([-1.0, 0.0, 1.0, 2.0])[None, :] - t)
    w = np.where(
        d <= 1,
        (a + 2) * d ** 3 - (a + 3) * d ** 2 + 1,
        np.where(d < 2, a * d ** 3 - 5 * a * d ** 2 + 8 * a * d - 4 * a, 0.0),
    )
    return w


def _resample_axis(data: np.ndarray, n_out: int, scale: float, axis: int) -> np.ndarray:
    n_in = data.shape[axis]
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    w = _cubic_weights(src - base)
    idx = np.clip(base[:, None] + np.arange(-1, 3)[None, :], 0, n_in - 1)
    moved = np.moveaxis(data, axis, 0)
    out = np.einsum("ok,ok...->o...", w, moved[idx])
    return np.moveaxis(out, 0, axis)


def resize_bicubic(img, width: int, height: int) -> np.ndarray:
    """Catmull-Rom resize to an explicit size with edge-clamped borders."""
    img = as_gray(img)
    h, w = img.shape
    if width < 1 or height < 1:
        raise ImageSizeError("target size must be positive")
    if (width, height) == (w, h):
        return img.copy()
    tmp = _resample_axis(img.astype(np.float64), width, w / width, axis=1)
    return to_uint8(_resample_axis(tmp, height, h / height, axis=0))


def resample_bicubic(img, sf: float) -> np.ndarray:
    """Downsample by scale factor ``sf`` to ``floor(w/sf) x floor(h/sf)``."""
    img = as_gray(img)
    if sf < 1:
        raise ValueError("scale factor must be >= 1")
    h, w = img.shape
    ow, oh = int(math.floor(w / sf)), int(math.floor(h / sf))
    if ow < 8 or oh < 8:
        raise ImageSizeError(f"sf={sf} would give a {ow}x{oh} image (< 8x8)")
    if sf == 1:
        return img.copy()
    tmp = _resample_axis(img.astype(np.float64), ow, sf, axis=1)
    return to_uint8(_resample_axis(tmp, oh, sf, axis=0))


def rotation_matrix(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def rotate_points(points: np.ndarray, theta: float, center: tuple[float, float]) -> np.ndarray:
    """Forward-rotate ``(x, y)`` points about ``center`` (y-down frame)."""
    c = np.asarray(center, dtype=np.float64)
    p = np.atleast_2d(np.asarray(points, dtype=np.float64)) - c
    return p @ rotation_matrix(theta).T + c


def image_center(shape) -> tuple[float, float]:
    h, w = shape
    return ((w - 1) / 2.0, (h - 1) / 2.0)


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float = 0.0) -> np.ndarray:
    h, w = img.shape
    eps = 1e-9
    valid = (xs >= -eps) & (xs <= w - 1 + eps) & (ys >= -eps) & (ys <= h - 1 + eps)
    xc = np.clip(xs, 0, w - 1)
    yc = np.clip(ys, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    f = img.astype(np.float64)
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(valid, out, fill)


def affine_rotate(img, theta: float) -> np.ndarray:
    """Rotate by ``theta`` degrees about the image center.

    Each destination pixel is pulled back through the inverse rotation and
    sampled bilinearly; pixels that fall outside the source become 0.
    """
    img = as_gray(img)
    if abs(theta) > 90:
        raise ValueError("|theta| must be <= 90 degrees")
    if theta == 0:
        return img.copy()
    h, w = img.shape
    cx, cy = image_center(img.shape)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    r = rotation_matrix(-theta)
    dx, dy = xs - cx, ys - cy
    sx = r[0, 0] * dx + r[0, 1] * dy + cx
    sy = r[1, 0] * dx + r[1, 1] * dy + cy
    return to_uint8(bilinear_sample(img, sx, sy))


# ---------------------------------------------------------------------------
# filtering

def kernel(weights, scale: float = 1.0) -> np.ndarray:
    k = np.asarray(weights, dtype=np.float64) * scale
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise ValueError("kernel must be square with odd side length")
    return k


GAUSSIAN_5x5 = kernel([[2, 4, 5, 4, 2],
                       [4, 9, 12, 9, 4],
                       [5, 12, 15, 12, 5],
                       [4, 9, 12, 9, 4],
                       [2, 4, 5, 4, 2]], 1.0 / 159)

LAPLACIAN_5x5 = kernel(np.pad([[25]], 2) - 1)

SOBEL_X = kernel([[1, 0, -1], [2, 0, -2], [1, 0, -1]])
SOBEL_Y = kernel([[1, 2, 1], [0, 0, 0], [-1, -2, -1]])


def filter2d(img, k: np.ndarray) -> np.ndarray:
    """True convolution ``sum k(u, v) * i(x - u, y - v)`` in float64, edge-clamped."""
    a = np.asarray(img, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    n = k.shape[0]
    r = n // 2
    h, w = a.shape
    if n > h or n > w:
        raise ImageSizeError(f"{n}x{n} kernel larger than {w}x{h} image")
    pad = np.pad(a, r, mode="edge")
    out = np.zeros_like(a)
    for v in range(-r, r + 1):
        for u in range(-r, r + 1):
            c = k[v + r, u + r]
            if c != 0:
                out += c * pad[r - v:r - v + h, r - u:r - u + w]
    return out


def convolve(img, k: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Convolution rounded to int16, or linearly stretched to uint8 when ``normalize``."""
    resp = filter2d(as_gray(img), k)
    if normalize:
        lo, hi = resp.min(), resp.max()
        if hi == lo:
            return np.zeros(resp.shape, dtype=np.uint8)
        return to_uint8((resp - lo) * (255.0 / (hi - lo)))
    return np.clip(np.floor(resp + 0.5), -32768, 32767).astype(np.int16)


def disk_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    if r < 1:
        raise ValueError("radius must be >= 1")
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    keep = dx * dx + dy * dy <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def _flat_rank(img: np.ndarray, offsets: np.ndarray, reducer) -> np.ndarray:
    r = int(np.abs(offsets).max())
    h, w = img.shape
    pad = np.pad(img, r, mode="edge")
    out = None
    for dy, dx in offsets:
        view = pad[r + dy:r + dy + h, r + dx:r + dx + w]
        out = view.copy() if out is None else reducer(out, view)
    return out


def erode(img, radius: int) -> np.ndarray:
    return _flat_rank(as_gray(img), disk_offsets(radius), np.minimum)


def dilate(img, radius: int) -> np.ndarray:
    return _flat_rank(as_gray(img), disk_offsets(radius), np.maximum)


def morph(img, op: str, radius: int) -> np.ndarray:
    """Flat grayscale morphology with a disk ``dx^2 + dy^2 <= r^2``."""
    if op == "erode":
        return erode(img, radius)
    if op == "dilate":
        return dilate(img, radius)
    if op == "open":
        return dilate(erode(img, radius), radius)
    raise ValueError(f"unknown morphological op {op!r}")


def dilate_binary_square(mask: np.ndarray, size: int = 3) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    return ndimage.binary_dilation(mask, structure=np.ones((size, size), dtype=bool))


# ---------------------------------------------------------------------------
# connected components

@dataclass(frozen=True)
class Component:
    label: int
    pixel_count: int
    rect: Rect
    pixels: np.ndarray  # (n, 2) array of (y, x), raster order

    def mask(self, shape) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[self.pixels[:, 0], self.pixels[:, 1]] = True
        return m


def connected_components(mask, min_size: int = 1) -> list[Component]:
    """8-connected components, largest first; ties go to the earlier raster start."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)  # raster order
    lab = labels[ys, xs]
    order = np.argsort(lab, kind="stable")
    ys, xs, lab = ys[order], xs[order], lab[order]
    starts = np.searchsorted(lab, np.arange(1, n + 1))
    ends = np.append(starts[1:], len(lab))
    comps = []
    for s, e in zip(starts, ends):
        cy, cx = ys[s:e], xs[s:e]
        count = e - s
        if count < min_size:
            continue
        rect = Rect(int(cx.min()), int(cy.min()), int(cx.max() - cx.min() + 1), int(cy.max() - cy.min() + 1))
        comps.append((count, (int(cy[0]), int(cx[0])), rect, np.stack([cy, cx], axis=1)))
    comps.sort(key=lambda c: (-c[0], c[1]))
    return [Component(i + 1, int(c[0]), c[2], c[3]) for i, c in enumerate(comps)]


# ---------------------------------------------------------------------------
# distance transforms

def point_distance(dx, dy, metric: str):
    """Distance between pixels given coordinate differences."""
    ax, ay = np.abs(dx), np.abs(dy)
    if metric == "chessboard":
        return np.maximum(ax, ay)
    if metric == "cityblock":
        return ax + ay
    if metric == "euclidean":
        return np.sqrt(np.asarray(ax, dtype=np.float64) ** 2 + np.asarray(ay, dtype=np.float64) ** 2)
    if metric == "quasi_euclidean":
        k = math.sqrt(2.0) - 1.0
        return np.where(ax > ay, ax + k * ay, k * ax + ay)
    raise ValueError(f"unknown metric {metric!r}")


def _chamfer(mask: np.ndarray, diagonal: int) -> np.ndarray:
    # two-pass propagation; exact for chessboard (diag 1) and cityblock (diag 2)
    h, w = mask.shape
    big = h + w + 10
    d = np.where(mask, 0, big).astype(np.int64)
    for y in range(h):
        row = d[y]
        if y > 0:
            prev = d[y - 1]
            row = np.minimum(row, prev + 1)
            row[1:] = np.minimum(row[1:], prev[:-1] + diagonal)
            row[:-1] = np.minimum(row[:-1], prev[1:] + diagonal)
        for x in range(1, w):
            if row[x - 1] + 1 < row[x]:
                row[x] = row[x - 1] + 1
        d[y] = row
    for y in range(h - 1, -1, -1):
        row = d[y]
        if y < h - 1:
            nxt = d[y + 1]
            row = np.minimum(row, nxt + 1)
            row[1:] = np.minimum(row[1:], nxt[:-1] + diagonal)
            row[:-1] = np.minimum(row[:-1], nxt[1:] + diagonal)
        for x in range(w - 2, -1, -1):
            if row[x + 1] + 1 < row[x]:
                row[x] = row[x + 1] + 1
        d[y] = row
    return d.astype(np.float64)


def distance_transform(mask, metric: str = "euclidean") -> np.ndarray:
    """Distance from every pixel to the nearest nonzero pixel of ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not mask.any():
        raise ValueError("distance transform of an all-zero image is undefined")
    if metric == "chessboard":
        return _chamfer(mask, 1)
    if metric == "cityblock":
        return _chamfer(mask, 2)
    # exact minimisation over the foreground, chunked to bound memory
    h, w = mask.shape
    fy, fx = np.nonzero(mask)
    ys, xs = np.mgrid[0:h, 0:w]
    ys, xs = ys.ravel(), xs.ravel()
    out = np.empty(h * w)
    chunk = max(1, 4_000_000 // max(len(fy), 1))
    for s in range(0, h * w, chunk):
        dy = ys[s:s + chunk, None] - fy[None, :]
        dx = xs[s:s + chunk, None] - fx[None, :]
        out[s:s + chunk] = point_distance(dx, dy, metric).min(axis=1)
    out = out.reshape(h, w)
    out[mask] = 0.0
    return out


# ---------------------------------------------------------------------------
# point operators

def _box3(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    p = np.pad(a, 1, mode="edge")
    return sum(p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)) / 9.0


def local_stddev_raw(img) -> np.ndarray:
    """Population standard deviation of each edge-clamped 3x3 neighbourhood."""
    a = as_gray(img).astype(np.float64)
    mean = _box3(a)
    var = _box3(a * a) - mean * mean
    return np.sqrt(np.maximum(var, 0.0))


def local_stddev(img) -> np.ndarray:
    s = local_stddev_raw(img)
    peak = s.max()
    if peak <= 1e-12:
        return np.zeros(s.shape, dtype=np.uint8)
    return to_uint8(s * (255.0 / peak))


def gamma_correct(img, gamma: float = 0.5) -> np.ndarray:
    if not 0.1 <= gamma <= 10:
        raise ValueError("gamma must lie in [0.1, 10]")
    lut = to_uint8(255.0 * (np.arange(256) / 255.0) ** gamma)
    return lut[as_gray(img)]


def sliding_positions(length: int, window: int, step: int) -> Iterator[int]:
    """Window origins covering ``[0, length)``; the last window is flush with the end."""
    if window > length:
        return
    step = max(1, step)
    last = length - window
    pos = 0
    while pos < last:
        yield pos
        pos += step
    yield last
