"""Synthetic renderers standing in for the recorded face/eye/EOG corpora.

Every renderer takes an explicit ``numpy.random.Generator`` so fixtures
and datasets are reproducible from a seed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

from .imgcore import affine_rotate, to_uint8


def pink_field(rng: np.random.Generator, h: int, w: int, exponent: float = 1.0) -> np.ndarray:
    """Zero-mean random field with a 1/f^exponent amplitude spectrum."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.hypot(fy, fx)
    f[0, 0] = 1.0
    spectrum = (rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape)) / f ** exponent
    spectrum[0, 0] = 0
    field = np.fft.irfft2(spectrum, s=(h, w))
    return (field - field.mean()) / (field.std() + 1e-12)


def natural_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """1/f texture whose gray-level histogram is a symmetric, unclipped Gaussian."""
    field = pink_field(rng, h, w)
    ranks = np.empty(field.size)
    ranks[np.argsort(field.ravel(), kind="stable")] = np.arange(field.size)
    mean = rng.uniform(100, 155)
    sigma = rng.uniform(12, 25)
    vals = mean + sigma * ndtri((ranks + 0.5) / field.size)
    return to_uint8(vals.reshape(h, w))


def vignette(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Mid-gray texture darkened and flattened toward the corners."""
    yy, xx = np.mgrid[0:h, 0:w]
    r = np.hypot((xx - w / 2) / (w / 2), (yy - h / 2) / (h / 2)) / math.sqrt(2)
    gain = 1.0 - 0.85 * r ** 2
    tex = 120 + 40 * pink_field(rng, h, w, 0.8)
    return to_uint8(30 + gain * (tex - 30))


def disk_image(w: int, h: int, cx: float, cy: float, r: float,
               fg: float = 40, bg: float = 200, aa: bool = True) -> np.ndarray:
    """Dark disk on a flat background, optionally anti-aliased."""
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(xx - cx, yy - cy)
    cover = np.clip(r + 0.5 - d, 0, 1) if aa else (d <= r).astype(float)
    return to_uint8(bg + (fg - bg) * cover)


def circle_edges(w: int, h: int, cx: float, cy: float, r: float,
                 dropout: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """One-pixel ring of points whose distance to the centre rounds to ``r``."""
    yy, xx = np.mgrid[0:h, 0:w]
    ring = np.abs(np.hypot(xx - cx, yy - cy) - r) < 0.5
    if dropout > 0:
        rng = rng or np.random.default_rng(0)
        ring &= rng.random((h, w)) >= dropout
    return ring


# ---------------------------------------------------------------------------
# faces

def face_patch(rng: np.random.Generator, size: int = 24, jitter: bool = True) -> np.ndarray:
    """Face proxy: bright oval, dark eye band, darker brows, faint mouth."""
    s = float(size)
    yy, xx = (np.mgrid[0:size, 0:size] + 0.5) / s
    skin = rng.uniform(150, 210) if jitter else 180.0
    bg = rng.uniform(40, 110) if jitter else 80.0
    dx = rng.uniform(-0.02, 0.02) if jitter else 0.0
    dy = rng.uniform(-0.02, 0.02) if jitter else 0.0
    eye_y = 0.38 + dy
    img = np.full((size, size), bg, dtype=np.float64)
    oval = ((xx - 0.5 - dx) / 0.46) ** 2 + ((yy - 0.52 - dy) / 0.5) ** 2 <= 1.0
    img[oval] = skin
    dark = skin * (rng.uniform(0.25, 0.45) if jitter else 0.35)
    for ex in (0.3, 0.7):
        eye = ((xx - ex - dx) / 0.13) ** 2 + ((yy - eye_y) / 0.07) ** 2 <= 1.0
        img[eye] = dark
        brow = (np.abs(yy - (eye_y - 0.12)) < 0.03) & (np.abs(xx - ex - dx) < 0.13)
        img[brow] = dark * 1.2
    band = (np.abs(yy - eye_y) < 0.05) & (np.abs(xx - 0.5 - dx) < 0.32)
    img[band] = np.minimum(img[band], skin * 0.7)
    mouth = (np.abs(yy - (0.8 + dy)) < 0.035) & (np.abs(xx - 0.5 - dx) < 0.16)
    img[mouth] = skin * 0.55
    nose = (np.abs(xx - 0.5 - dx) < 0.04) & (yy > eye_y + 0.08) & (yy < 0.66 + dy)
    img[nose] = skin * 0.85
    if jitter:
        img += rng.normal(0, rng.uniform(2, 8), img.shape)
        img *= rng.uniform(0.8, 1.15)
    return to_uint8(img)


def background(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Clutter: 1/f texture plus random rectangles and blobs."""
    img = 110 + rng.uniform(15, 45) * pink_field(rng, h, w, rng.uniform(0.6, 1.4))
    for _ in range(rng.integers(0, 8)):
        x0, y0 = rng.integers(0, w), rng.integers(0, h)
        bw, bh = rng.integers(3, max(4, w // 3)), rng.integers(3, max(4, h // 3))
        img[y0:y0 + bh, x0:x0 + bw] = rng.uniform(0, 255)
    for _ in range(rng.integers(0, 6)):
        cx, cy, r = rng.uniform(0, w), rng.uniform(0, h), rng.uniform(2, max(3, min(h, w) / 5))
        yy, xx = np.mgrid[0:h, 0:w]
        img[np.hypot(xx - cx, yy - cy) <= r] = rng.uniform(0, 255)
    return to_uint8(img)


def render_face(rng: np.random.Generator, size: int) -> np.ndarray:
    """Face proxy rendered natively at ``size`` pixels (no resampling)."""
    return face_patch(rng, size)


def face_scene(rng: np.random.Generator, w: int, h: int, face_size: int,
               x: int | None = None, y: int | None = None, theta: float = 0.0):
    """Background with one planted face; returns ``(image, (x, y, size))``.

    With ``theta`` the whole scene is rotated about its centre after planting,
    so the returned box is the upright (de-rotated) location.
    """
    img = background(rng, h, w)
    if x is None:
        x = int(rng.integers(0, w - face_size + 1))
    if y is None:
        y = int(rng.integers(0, h - face_size + 1))
    face = render_face(rng, face_size)
    yy, xx = (np.mgrid[0:face_size, 0:face_size] + 0.5) / face_size
    inside = ((xx - 0.5) / 0.5) ** 2 + ((yy - 0.52) / 0.52) ** 2 <= 1.0
    region = img[y:y + face_size, x:x + face_size]
    region[inside] = face[inside]
    if theta:
        img = affine_rotate(img, theta)
    return img, (x, y, face_size)


# ---------------------------------------------------------------------------
# eyes

def eye_image(rng: np.random.Generator, w: int = 50, h: int = 40, closed: bool = False,
              iris_x: float | None = None, iris_r: float | None = None,
              glint: bool = False, noise: float = 4.0, lid_occlusion: float = 0.0) -> np.ndarray:
    """Eye crop: skin, almond-shaped sclera, dark iris disk, or a closed-lid band."""
    yy, xx = np.mgrid[0:h, 0:w] + 0.0
    skin = rng.uniform(150, 200)
    img = np.full((h, w), skin)
    cy = h / 2.0
    left, right = 0.12 * w, 0.88 * w
    half = (right - left) / 2
    mid = (left + right) / 2
    if closed:
        band = np.abs(yy - cy - rng.uniform(-0.05, 0.05) * h) < rng.uniform(0.04, 0.08) * h
        span = np.abs(xx - mid) < half * rng.uniform(0.85, 1.0)
        img[band & span] = skin * rng.uniform(0.25, 0.45)
        lash = (np.abs(yy - cy - 0.12 * h) < 0.03 * h) & span
        img[lash] = skin * 0.7
    else:
        opening = 0.30 * h * (1 - lid_occlusion)
        u = (xx - mid) / half
        lid = np.abs(yy - cy) <= opening * np.sqrt(np.clip(1 - u ** 2, 0, None))
        img[lid] = rng.uniform(200, 235)
        r = iris_r if iris_r is not None else rng.uniform(0.26, 0.32) * h
        ix = iris_x if iris_x is not None else mid + rng.uniform(-0.1, 0.1) * w
        d = np.hypot(xx - ix, yy - cy)
        cover = np.clip(r + 0.5 - d, 0, 1) * lid
        img = img + (rng.uniform(25, 60) - img) * cover
        if glint:
            gx, gy = ix + 0.3 * r, cy - 0.3 * r
            img[(np.abs(xx - gx) <= 1) & (np.abs(yy - gy) <= 1)] = 250
    if noise:
        img = img + rng.normal(0, noise, img.shape)
    return to_uint8(img)


def almond_eye(w: int = 96, h: int = 48, corners=((10, 24), (86, 24)), bulge: float = 14,
               skin: float = 170, sclera: float = 225, iris: float = 50,
               iris_x: float | None = None) -> np.ndarray:
    """Eye outline bounded by two parabolic lids meeting at the given corners."""
    (x0, y0), (x1, y1) = corners
    yy, xx = np.mgrid[0:h, 0:w] + 0.0
    t = (xx - x0) / (x1 - x0)
    base = y0 + (y1 - y0) * t
    open_ = 4 * bulge * t * (1 - t)
    inside = (t >= 0) & (t <= 1) & (yy >= base - open_) & (yy <= base + 0.8 * open_)
    img = np.full((h, w), skin, dtype=np.float64)
    img[inside] = sclera
    if iris is not None:
        ix = iris_x if iris_x is not None else (x0 + x1) / 2
        d = np.hypot(xx - ix, yy - (y0 + y1) / 2)
        cover = np.clip(0.55 * bulge + 0.5 - d, 0, 1) * inside
        img = img + (iris - img) * cover
    return to_uint8(img)


# ---------------------------------------------------------------------------
# spectacles

def spectacle_face(rng: np.random.Generator, w: int = 120, h: int = 60, glasses: bool = True,
                   full: bool = False) -> np.ndarray:
    """Upper-face ROI: skin gradient, eyes and brows, optionally thin spectacle rims.

    With ``full`` a plain lower half (nose shadow, mouth) is appended below.
    """
    yy, xx = np.mgrid[0:h, 0:w] + 0.0
    skin = rng.uniform(150, 200)
    img = skin + rng.uniform(-20, 20) * (xx / w - 0.5) + rng.uniform(-10, 10) * (yy / h - 0.5)
    cy = h * rng.uniform(0.52, 0.6)
    for ex in (0.3 * w, 0.7 * w):
        ex = ex + rng.uniform(-2, 2)
        eye = ((xx - ex) / (0.09 * w)) ** 2 + ((yy - cy) / (0.06 * h)) ** 2 <= 1
        img[eye] = skin * 0.45
        by = cy - rng.uniform(0.2, 0.26) * h
        brow = (np.abs(yy - by) < 1.2) & (np.abs(xx - ex) < 0.09 * w)
        img[brow] = skin * 0.65
    img = _blur(img, 1.0)
    if glasses:
        dark = rng.uniform(20, 60)
        for ex in (0.3 * w, 0.7 * w):
            a, b = 0.17 * w, 0.22 * h
            ring = np.abs(np.hypot((xx - ex) / a, (yy - cy) / b) - 1) * min(a, b) < 0.9
            img[ring] = dark
        bridge = (np.abs(yy - (cy - 0.1 * h)) < 0.9) & (np.abs(xx - 0.5 * w) < 0.03 * w + 1)
        img[bridge] = dark
    if full:
        yy2, xx2 = np.mgrid[0:h, 0:w] + 0.0
        low = np.full((h, w), img[-1].mean())
        low[(np.abs(xx2 - 0.5 * w) < 0.04 * w) & (yy2 < 0.4 * h)] -= 15
        low[(np.abs(yy2 - 0.6 * h) < 1.5) & (np.abs(xx2 - 0.5 * w) < 0.15 * w)] *= 0.6
        img = np.vstack([img, _blur(low, 1.0)])
    img += rng.normal(0, 2.0, img.shape)
    return to_uint8(img)


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    from scipy.ndimage import gaussian_filter
    return gaussian_filter(img, sigma, mode="nearest")


# ---------------------------------------------------------------------------
# signals

def sigmoid_saccade(t: np.ndarray, t0: float, amplitude: float, tau: float) -> np.ndarray:
    """Logistic position trace; peak slope is ``amplitude / (4 tau)``."""
    return amplitude / (1.0 + np.exp(-(t - t0) / tau))


# ---------------------------------------------------------------------------
# cascade training windows

def face_window(rng: np.random.Generator, window: int = 24) -> np.ndarray:
    """Base-size window around a planted face with small scale and offset jitter."""
    size = int(round(window * np.exp(rng.uniform(-0.1, 0.1))))
    pad = 8
    canvas = pad * 2 + window
    img, _ = face_scene(rng, canvas, canvas, size,
                        x=pad + (window - size) // 2 + int(rng.integers(-1, 2)),
                        y=pad + (window - size) // 2 + int(rng.integers(-1, 2)))
    return img[pad:pad + window, pad:pad + window].copy()


def negative_windows(n: int, rng: np.random.Generator, window: int = 24, face_parts: float = 0.3,
                     max_iou: float = 0.4) -> np.ndarray:
    """Background crops at random scales plus misaligned face crops, resampled to the base window."""
    from .imgcore import Rect, resize_bicubic
    out = np.empty((n, window, window), np.uint8)
    i = 0
    while i < n:
        if rng.random() < face_parts:
            size = int(rng.integers(2 * window, 4 * window))
            if rng.random() < 0.4:
                # tilted faces must be found by the rotation search, not upright
                theta = float(rng.choice([-1, 1]) * rng.uniform(20, 50))
                img, _ = face_scene(rng, 2 * size, 2 * size, size, size // 2, size // 2, theta=theta)
                side = int(size * rng.uniform(0.8, 1.25))
                c = size - side // 2 + int(rng.integers(-size // 8, size // 8 + 1))
                out[i] = resize_bicubic(img[c:c + side, c:c + side], window, window)
                i += 1
                continue
            img, (fx, fy, _) = face_scene(rng, 2 * size, 2 * size, size, size // 2, size // 2)
            face = Rect(fx, fy, size, size)
            side = int(rng.integers(window, int(1.6 * size)))
            x, y = (int(v) for v in rng.integers(0, 2 * size - side + 1, 2))
            crop = Rect(x, y, side, side)
            if crop.iou(face) >= max_iou:
                continue
            out[i] = resize_bicubic(crop.crop(img), window, window)
            i += 1
            continue
        side = int(rng.integers(4 * window, 8 * window))
        bg = background(rng, side, side)
        for _ in range(min(16, n - i)):
            w = int(rng.integers(window, side // 2))
            x, y = (int(v) for v in rng.integers(0, side - w + 1, 2))
            out[i] = resize_bicubic(bg[y:y + w, x:x + w], window, window)
            i += 1
    return out


def training_scene(rng: np.random.Generator, w: int = 160, h: int = 120):
    """Scene for negative mining: clutter, an upright face, or a tilted face.

    Returns ``(image, face Rect or None)``; tilted faces count as negatives
    throughout, so their box is reported as None.
    """
    from .imgcore import Rect
    u = rng.random()
    if u < 0.4:
        return background(rng, h, w), None
    size = int(rng.integers(30, min(w, h) - 10))
    if u < 0.7:
        img, (x, y, s) = face_scene(rng, w, h, size)
        return img, Rect(x, y, s, s)
    theta = float(rng.choice([-1, 1]) * rng.uniform(20, 50))
    img, _ = face_scene(rng, w, h, size, (w - size) // 2, (h - size) // 2, theta=theta)
    return img, None


# ---------------------------------------------------------------------------
# iris trajectories

TRACK_X, TRACK_Y = (10.0, 40.0), (10.0, 30.0)


def iris_trajectory(rng: np.random.Generator, n: int = 150, noise: float = 1.5, excursion: bool = True,
                    burst: int = 10, overshoot: float = 15.0):
    """Smooth in-bounds iris path and noisy measurements.

    With ``excursion`` a burst of measurements is thrown ``overshoot`` px
    past one x bound. Returns ``(truth, meas, burst_start or None)``.
    """
    t = np.arange(n)
    x = 25 + 12 * np.sin(2 * np.pi * t / rng.uniform(60, 120) + rng.uniform(0, 2 * np.pi))
    y = 20 + 3 * np.sin(2 * np.pi * t / rng.uniform(60, 120) + rng.uniform(0, 2 * np.pi))
    truth = np.c_[x, y]
    meas = truth + rng.normal(0, noise, truth.shape)
    k0 = None
    if excursion:
        k0 = int(rng.integers(40, n - 60))
        side = rng.choice([-1, 1])
        meas[k0:k0 + burst, 0] = TRACK_X[1] + overshoot if side > 0 else TRACK_X[0] - overshoot
    return truth, meas, k0


# ---------------------------------------------------------------------------
# driver-camera frames

FACE_SIZE = 120
EYE_W, EYE_H = 30, 34
# eye boxes relative to the face box; the left one sits on the eye-search grid
EYE_OFFSETS = ((27, 26), (63, 26))
SOCKET_SHADE = 0.55


def driver_scene(rng: np.random.Generator, w: int = 320, h: int = 240, x: int | None = None,
                 y: int | None = None):
    """Static background with one face; returns ``(image, (x, y))`` of the face box."""
    if x is None:
        x = int(rng.integers(40, w - FACE_SIZE - 40))
    if y is None:
        y = int(rng.integers(20, h - FACE_SIZE - 20))
    img, _ = face_scene(rng, w, h, FACE_SIZE, x=x, y=y)
    return img, (x, y)


def driver_frame(rng: np.random.Generator, scene: np.ndarray, pos, closed: bool, noise: float = 2.0):
    """Paste shaded open or closed eyes into the scene; returns ``(frame, eye_boxes)``."""
    img = scene.astype(np.float64).copy()
    x, y = pos
    boxes = []
    for dx, dy in EYE_OFFSETS:
        eye = eye_image(rng, w=EYE_W, h=EYE_H, closed=closed)
        img[y + dy:y + dy + EYE_H, x + dx:x + dx + EYE_W] = eye * SOCKET_SHADE
        boxes.append((x + dx, y + dy, EYE_W, EYE_H))
    if noise:
        img += rng.normal(0, noise, img.shape)
    return to_uint8(img), boxes


def gaze_trace(t: np.ndarray, steps, tau: float) -> np.ndarray:
    """Sum of logistic steps ``(t0, amplitude)``."""
    out = np.zeros_like(np.asarray(t, dtype=np.float64))
    for t0, amp in steps:
        out += sigmoid_saccade(t, t0, amp, tau)
    return out


def saccade_clip(rng: np.random.Generator, n: int = 210, fps: float = 420.0, w: int = 96, h: int = 48,
                 t0: float = 0.25, amplitude: float = 0.3, tau: float = 0.008, static: bool = False,
                 steps=None):
    """Almond-eye frames whose iris follows logistic saccades.

    ``steps`` is a sequence of ``(t0, amplitude)`` in eye widths; by default a
    single step. Returns ``(frames, iris_x, corners)``; positions are in pixels.
    """
    corners = ((10, 24), (86, 24))
    width = corners[1][0] - corners[0][0]
    t = np.arange(n) / fps
    start = corners[0][0] + 0.3 * width
    if steps is None:
        steps = () if static else ((t0, amplitude),)
    xs = start + width * gaze_trace(t, steps, tau)
    base_noise = rng.normal(0, 1.0, (n, h, w))
    frames = [to_uint8(almond_eye(w, h, corners, bulge=16, iris_x=float(x)) + base_noise[i])
              for i, x in enumerate(xs)]
    return frames, xs, corners


def eog_trace(rng: np.random.Generator, steps, tau: float, duration: float, rate: float = 256.0,
              gain: float = 400.0, noise: float = 4.0, drift: float = 30.0) -> np.ndarray:
    """Horizontal EOG (microvolts) for the same gaze steps: gain times gaze, slow drift, white noise."""
    t = np.arange(int(round(duration * rate))) / rate
    sig = gain * gaze_trace(t, steps, tau)
    sig += drift * np.sin(2 * np.pi * 0.05 * t + rng.uniform(0, 2 * np.pi))
    return sig + rng.normal(0, noise, t.shape)
