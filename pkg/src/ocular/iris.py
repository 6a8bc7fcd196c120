"""Iris localization (projection functions, form factor, opening + Canny + circular Hough),
eye corners, and saccade parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .imgcore import (GAUSSIAN_5x5, SOBEL_X, SOBEL_Y, ImageSizeError, as_gray, filter2d, gamma_correct, morph)


class LocalizationError(RuntimeError):
    """No trustworthy iris / corner estimate in this crop."""


# ---------------------------------------------------------------------------
# projection functions

@dataclass(frozen=True)
class ProjectionCurves:
    ipf_v: np.ndarray
    ipf_h: np.ndarray
    vpf_v: np.ndarray
    vpf_h: np.ndarray
    alpha: float

    @property
    def gpf_v(self) -> np.ndarray:
        return (1 - self.alpha) * self.ipf_v + self.alpha * self.vpf_v

    @property
    def gpf_h(self) -> np.ndarray:
        return (1 - self.alpha) * self.ipf_h + self.alpha * self.vpf_h


def projection_curves(eye, alpha: float = 0.6) -> ProjectionCurves:
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    I = as_gray(eye).astype(np.float64)
    ipf_v = I.mean(axis=0)
    ipf_h = I.mean(axis=1)
    vpf_v = ((I - ipf_v[None, :]) ** 2).mean(axis=0)
    vpf_h = ((I - ipf_h[:, None]) ** 2).mean(axis=1)
    return ProjectionCurves(ipf_v, ipf_h, vpf_v, vpf_h, float(alpha))


def _peaks(curve: np.ndarray, min_sep: float, count: int = 2) -> list[int]:
    """Largest local maxima above mean + std, greedily kept ``min_sep`` apart."""
    c = np.asarray(curve, dtype=np.float64)
    floor = c.mean() + c.std()
    left = np.r_[-np.inf, c[:-1]]
    right = np.r_[c[1:], -np.inf]
    cand = np.nonzero((c > left) & (c >= right) & (c > floor))[0]
    cand = sorted(cand, key=lambda i: (-c[i], i))
    kept: list[int] = []
    for i in cand:
        if all(abs(i - j) >= min_sep for j in kept):
            kept.append(int(i))
        if len(kept) == count:
            break
    return kept


@dataclass(frozen=True)
class GpfResult:
    cx: float
    cy: float
    curves: ProjectionCurves


def gpf_center(eye, alpha: float = 0.6, min_sep_frac: float = 0.125) -> GpfResult:
    """Iris centre from the generalized projection functions.

    The iris edges are the two strongest jumps of GPF_v; cx is their midpoint
    and cy the row maximizing GPF_h.
    """
    eye = as_gray(eye)
    h, w = eye.shape
    if w < 16 or h < 12:
        raise ImageSizeError("eye region must be at least 16x12")
    curves = projection_curves(eye, alpha)
    jump = np.abs(np.diff(curves.gpf_v))
    peaks = _peaks(jump, min_sep_frac * w)
    if len(peaks) < 2:
        raise LocalizationError("fewer than two separated GPF_v peaks")
    cx = (peaks[0] + peaks[1]) / 2.0 + 0.5  # jump i sits between columns i and i+1
    cy = float(np.argmax(curves.gpf_h))
    return GpfResult(cx, cy, curves)


# ---------------------------------------------------------------------------
# form factor

def _box_sums(img: np.ndarray):
    a = np.pad(img.astype(np.int64), 1, mode="edge")
    h, w = img.shape
    s = np.zeros((h, w), np.int64)
    q = np.zeros((h, w), np.int64)
    for dy in range(3):
        for dx in range(3):
            v = a[dy:dy + h, dx:dx + w]
            s += v
            q += v * v
    return s, q


def esi_beta(eye) -> np.ndarray:
    """Raw index 1/FF^2 per 3x3 neighbourhood (1 on flat patches, 0 where the mean is 0)."""
    s, q = _box_sums(as_gray(eye))
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = (s.astype(np.float64) ** 2) / (9.0 * q)
    return np.where(q == 0, 0.0, beta)


def esi_edge_map(eye) -> np.ndarray:
    """Edge strength ``round(255 (1 - 1/FF^2))`` over edge-clamped 3x3 neighbourhoods."""
    s, q = _box_sums(as_gray(eye))
    num = 9 * q - s * s  # 81 * variance, exact
    den = 9 * q
    safe = np.where(den == 0, 1, den)
    out = (2 * 255 * num + safe) // (2 * safe)  # half-up rounding in integers
    return np.where(den == 0, 0, out).astype(np.uint8)


# ---------------------------------------------------------------------------
# glint, edges, circles

def remove_glint(eye, radius: int = 10) -> np.ndarray:
    return morph(as_gray(eye), "open", radius)


def _direction_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Rounded edge-direction angle (0/45/90/135) in y-up degrees."""
    grad = np.degrees(np.arctan2(-gy, gx))  # y-up gradient angle
    edge = np.mod(grad + 90.0, 180.0)
    return (np.round(edge / 45.0).astype(np.int64) % 4) * 45


# (dy, dx) of the neighbour compared strictly, then the one compared with >=
_NMS_PAIRS = {0: ((-1, 0), (1, 0)),     # north / south
              90: ((0, -1), (0, 1)),    # west / east
              135: ((-1, 1), (1, -1)),  # north-east / south-west
              45: ((-1, -1), (1, 1))}   # north-west / south-east


def gradients(img):
    smooth = filter2d(as_gray(img), GAUSSIAN_5x5)
    gx = filter2d(smooth, SOBEL_X)
    gy = filter2d(smooth, SOBEL_Y)
    return gx, gy


def non_max_suppression(mag: np.ndarray, bins: np.ndarray) -> np.ndarray:
    h, w = mag.shape
    pad = np.pad(mag, 1, mode="constant")
    keep = np.zeros((h, w), bool)
    for angle, ((ay, ax), (by, bx)) in _NMS_PAIRS.items():
        a = pad[1 + ay:1 + ay + h, 1 + ax:1 + ax + w]
        b = pad[1 + by:1 + by + h, 1 + bx:1 + bx + w]
        # strict against the neighbour earlier in raster order so plateaus thin to one pixel
        keep |= (bins == angle) & (mag > a) & (mag >= b)
    return keep & (mag > 0)


def canny(img, t_low: float = 40, t_high: float = 100) -> np.ndarray:
    if not t_low < t_high:
        raise ValueError("need t_low < t_high")
    gx, gy = gradients(img)
    mag = np.hypot(gx, gy)
    thin = non_max_suppression(mag, _direction_bins(gx, gy))
    cand = thin & (mag >= t_low)
    strong = thin & (mag >= t_high)
    labels, n = ndimage.label(cand, structure=np.ones((3, 3), bool))
    if n == 0:
        return np.zeros_like(cand)
    good = np.zeros(n + 1, bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return good[labels]


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: int
    votes: int


def ring_kernel(r: int) -> np.ndarray:
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (np.rint(np.hypot(xx, yy)) == r).astype(np.float64)


_SECTORS = 12


def _sector_kernels(r: int):
    """Ring offsets split by direction into ``_SECTORS`` equal angular sectors."""
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    ring = np.rint(np.hypot(xx, yy)) == r
    sector = np.floor(np.mod(np.arctan2(yy, xx), 2 * np.pi) / (2 * np.pi / _SECTORS)).astype(int) % _SECTORS
    return [(ring & (sector == k)).astype(np.float64) for k in range(_SECTORS)]


def hough_accumulator(edges, r: int, direction: np.ndarray | None = None) -> np.ndarray:
    """Votes for every centre at radius ``r``.

    With ``direction`` (per-pixel gradient angle, radians, image axes), an
    edge pixel only votes for centres on its dark side, within one sector of
    the direction opposite its gradient.
    """
    e = np.asarray(edges, dtype=bool)
    if direction is None:
        return np.rint(fftconvolve(e.astype(np.float64), ring_kernel(r), mode="same")).astype(np.int64)
    kernels = _sector_kernels(r)
    toward = np.mod(np.asarray(direction) + np.pi, 2 * np.pi)
    bins = np.floor(toward / (2 * np.pi / _SECTORS)).astype(int) % _SECTORS
    acc = np.zeros(e.shape)
    for k in range(_SECTORS):
        sel = e & (bins == k)
        if not sel.any():
            continue
        kern = kernels[(k - 1) % _SECTORS] + kernels[k] + kernels[(k + 1) % _SECTORS]
        acc += fftconvolve(sel.astype(np.float64), kern, mode="same")
    return np.rint(acc).astype(np.int64)


def hough_circle(edges, rmin: int, rmax: int, direction: np.ndarray | None = None) -> Circle:
    e = np.asarray(edges, dtype=bool)
    h, w = e.shape
    if rmin < 3 or rmax < rmin:
        raise ValueError("need 3 <= rmin <= rmax")
    if rmax > min(w, h) / 2:
        raise ValueError("rmax exceeds half the image size")
    if not e.any():
        raise LocalizationError("empty edge map")
    best = None
    for r in range(rmin, rmax + 1):
        acc = hough_accumulator(e, r, direction)
        i = int(np.argmax(acc))  # first in raster order: smallest (cy, cx)
        v = int(acc.flat[i])
        if best is None or v > best.votes:
            best = Circle(i % w, i // w, r, v)
    return best


@dataclass
class IrisConfig:
    gamma: float = 0.5
    glint_radius: int = 10
    t_low: float = 40
    t_high: float = 100
    rmin_frac: float = 1 / 6
    rmax_frac: float = 1 / 2
    min_support: float = 0.35  # votes / ring pixel count
    polarity: bool = False  # dark iris: vote only toward the dark side of each edge
    subpixel: bool = False  # refine the Hough centre with a circle fit to nearby edges


def iris_center(eye, cfg: IrisConfig | None = None) -> Circle:
    """Gamma, opening, Canny, then the circular Hough transform."""
    cfg = cfg or IrisConfig()
    eye = as_gray(eye)
    h, w = eye.shape
    work = gamma_correct(eye, cfg.gamma) if cfg.gamma != 1 else eye
    work = remove_glint(work, cfg.glint_radius)
    edges = canny(work, cfg.t_low, cfg.t_high)
    direction = None
    if cfg.polarity:
        gx, gy = gradients(work)
        direction = np.arctan2(gy, gx)
    rmin = max(3, int(round(h * cfg.rmin_frac)))
    rmax = min(int(min(h, w) / 2), max(rmin, int(round(h * cfg.rmax_frac))))
    c = hough_circle(edges, rmin, rmax, direction)
    if c.votes < cfg.min_support * ring_kernel(c.r).sum():
        raise LocalizationError(f"best circle has only {c.votes} votes")
    if cfg.subpixel:
        c = refine_center(edges, c)
    return c


def refine_center(edges: np.ndarray, c: Circle, band: float = 2.0, iters: int = 3) -> Circle:
    """Least-squares circle through the edge pixels near ``c``; the band narrows each pass."""
    ys, xs = np.nonzero(edges)
    cx, cy, r = float(c.cx), float(c.cy), float(c.r)
    for _ in range(iters):
        sel = np.abs(np.hypot(xs - cx, ys - cy) - r) <= band
        if sel.sum() < 8:
            break
        x, y = xs[sel].astype(np.float64), ys[sel].astype(np.float64)
        sol = np.linalg.lstsq(np.c_[x, y, np.ones_like(x)], x * x + y * y, rcond=None)[0]
        cx, cy = sol[0] / 2, sol[1] / 2
        r = float(np.sqrt(sol[2] + cx * cx + cy * cy))
        band = max(1.0, 0.75 * band)
    if abs(cx - c.cx) > 2 or abs(cy - c.cy) > 2:
        return c  # fit wandered off; keep the Hough answer
    return Circle(float(cx), float(cy), c.r, c.votes)


# ---------------------------------------------------------------------------
# eye corners

@dataclass(frozen=True)
class EyeCorners:
    temporal: tuple[int, int]
    nasal: tuple[int, int]

    @property
    def eye_width(self) -> int:
        return abs(self.temporal[0] - self.nasal[0])


def corner_response(img) -> np.ndarray:
    """Minimum eigenvalue of the 3x3-summed structure tensor."""
    a = as_gray(img).astype(np.float64)
    gx = filter2d(a, SOBEL_X) / 8.0
    gy = filter2d(a, SOBEL_Y) / 8.0
    box = np.ones((3, 3))
    sxx = filter2d(gx * gx, box)
    syy = filter2d(gy * gy, box)
    sxy = filter2d(gx * gy, box)
    tr = sxx + syy
    disc = np.sqrt(np.maximum((sxx - syy) ** 2 + 4 * sxy * sxy, 0))
    return 0.5 * (tr - disc)


def eye_corners(eye, band: float = 0.2, floor: float = 1.0, eye_side: str = "left") -> EyeCorners:
    """Strongest corner in the left and right ``band`` of the crop.

    For the subject's left eye the temporal corner is on the image right.
    """
    eye = as_gray(eye)
    h, w = eye.shape
    resp = corner_response(eye)
    k = max(1, int(round(band * w)))
    found = []
    for lo, hi in ((0, k), (w - k, w)):
        part = resp[:, lo:hi]
        i = int(np.argmax(part))
        if part.flat[i] < floor:
            raise LocalizationError("no corner in one of the bands")
        found.append((lo + i % part.shape[1], i // part.shape[1]))
    left, right = found
    if eye_side == "left":
        return EyeCorners(temporal=right, nasal=left)
    if eye_side == "right":
        return EyeCorners(temporal=left, nasal=right)
    raise ValueError("eye_side must be 'left' or 'right'")


def relative_position(cx: float, corners: EyeCorners) -> float:
    """Iris offset from the temporal corner as a fraction of eye width."""
    if corners.eye_width == 0:
        raise LocalizationError("degenerate eye width")
    return abs(cx - corners.temporal[0]) / corners.eye_width


# ---------------------------------------------------------------------------
# saccades

@dataclass(frozen=True)
class SaccadeRecord:
    onset: int
    offset: int
    amplitude: float
    peak_velocity: float
    duration: float
    sr: float


def velocities(theta, fps: float) -> np.ndarray:
    th = np.asarray(theta, dtype=np.float64)
    return np.diff(th) * fps


def saccade_params(theta, fps: float, v_thresh: float | None = None, frac: float = 0.15) -> list[SaccadeRecord]:
    """Segment runs of |v| above threshold and measure each one.

    ``v_thresh`` defaults to ``frac`` times the peak |v| of the series.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    th = np.asarray(theta, dtype=np.float64)
    if len(th) < 2:
        return []
    v = velocities(th, fps)
    av = np.abs(v)
    if v_thresh is None:
        v_thresh = frac * av.max()
    fast = av > v_thresh
    out = []
    i = 0
    n = len(v)
    while i < n:
        if not fast[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and fast[j + 1]:
            j += 1
        # velocity sample i spans frames i..i+1
        on, off = i, j + 1
        seg = th[on:off + 1]
        vp = float(av[i:j + 1].max())
        ts = abs(int(np.argmax(seg)) - int(np.argmin(seg))) / fps
        out.append(SaccadeRecord(on, off, float(th[off] - th[on]), vp, ts, vp / ts))
        i = j + 1
    return out


def percent_error(true: float, est: float) -> float:
    return 100.0 * (true - est) / true
