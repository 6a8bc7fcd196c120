"""Haar-feature cascades: features, boosting, detection, and the downsample/ROI framework."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .imgcore import (BoundsError, ImageSizeError, Rect, affine_rotate, as_gray,
                      integral_image, padded_integral, rect_sum, resample_bicubic,
                      resize_bicubic, sliding_positions, squared_integral_image)

WINDOW = 24
KINDS = ("two_h", "two_v", "three_h", "three_v", "four")
ROTATION_SEQUENCE = (0.0, 30.0, -30.0, 45.0, -45.0)


# ---------------------------------------------------------------------------
# features

@dataclass(frozen=True)
class HaarFeature:
    """Rectangle feature inside the base window.

    ``(x, y, w, h)`` is the bounding rect; the first (left/top) cell is white.
    """

    kind: str
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        nx, ny = _GRID[self.kind]
        if self.w % nx or self.h % ny or self.w < nx or self.h < ny:
            raise ValueError(f"{self.kind} needs w % {nx} == 0 and h % {ny} == 0")

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.w, self.h)

    def cells(self, ox: float = 0.0, oy: float = 0.0, scale: float = 1.0) -> list[tuple[Rect, int]]:
        """Sub-rects with colour ``+1`` (white) / ``-1`` (black), tiling the scaled bounding rect."""
        nx, ny = _GRID[self.kind]
        xb = [int(round(ox + (self.x + i * self.w / nx) * scale)) for i in range(nx + 1)]
        yb = [int(round(oy + (self.y + j * self.h / ny) * scale)) for j in range(ny + 1)]
        out = []
        for j in range(ny):
            for i in range(nx):
                if xb[i + 1] <= xb[i] or yb[j + 1] <= yb[j]:
                    raise BoundsError(f"{self} collapses at scale {scale}")
                out.append((Rect(xb[i], yb[j], xb[i + 1] - xb[i], yb[j + 1] - yb[j]), _COLOUR[self.kind][j][i]))
        return out


_GRID = {"two_h": (2, 1), "two_v": (1, 2), "three_h": (3, 1), "three_v": (1, 3), "four": (2, 2)}
_COLOUR = {
    "two_h": [[1, -1]],
    "two_v": [[1], [-1]],
    "three_h": [[1, -1, 1]],
    "three_v": [[1], [-1], [1]],
    "four": [[1, -1], [-1, 1]],
}


def enumerate_features(window: int = WINDOW, step: int = 1) -> list[HaarFeature]:
    feats = []
    for kind in KINDS:
        nx, ny = _GRID[kind]
        for w in range(nx, window + 1, nx):
            for h in range(ny, window + 1, ny):
                for y in range(0, window - h + 1, step):
                    for x in range(0, window - w + 1, step):
                        feats.append(HaarFeature(kind, x, y, w, h))
    return feats


def feature_pool(size: int = 2000, seed: int = 0, window: int = WINDOW) -> list[HaarFeature]:
    """Seeded subsample of the full feature set, kept in enumeration order."""
    feats = enumerate_features(window)
    if size >= len(feats):
        return feats
    idx = np.sort(np.random.default_rng(seed).choice(len(feats), size, replace=False))
    return [feats[i] for i in idx]


def haar_raw(ii: np.ndarray, f: HaarFeature, window: Rect, scale: float | None = None) -> float:
    """White-minus-black sum, black scaled by the white/black area ratio so flat input gives 0."""
    if scale is None:
        scale = window.w / WINDOW
    white = black = 0
    aw = ab = 0
    for r, c in f.cells(window.x, window.y, scale):
        if not r.inside(window.x2, window.y2) or r.x < window.x or r.y < window.y:
            raise BoundsError(f"{f} falls outside window {window}")
        s = rect_sum(ii, r)
        if c > 0:
            white += s
            aw += r.area
        else:
            black += s
            ab += r.area
    return white - black * (aw / ab)


def window_std(ii: np.ndarray, sq: np.ndarray, window: Rect) -> float:
    n = window.area
    mean = rect_sum(ii, window) / n
    var = rect_sum(sq, window) / n - mean * mean
    return math.sqrt(var) if var > 0 else 0.0


def haar_eval(ii: np.ndarray, sq: np.ndarray, f: HaarFeature, window: Rect, scale: float | None = None) -> float:
    """Feature response normalized by window area and window intensity std-dev.

    ``sq`` is the squared-intensity integral image of the same frame.
    """
    raw = haar_raw(ii, f, window, scale)
    sigma = window_std(ii, sq, window)
    if sigma == 0:
        return 0.0
    return raw / (window.area * sigma)


class FeatureTable:
    """Vectorized evaluator for a fixed list of features on 24x24 windows."""

    def __init__(self, features: Sequence[HaarFeature]):
        self.features = list(features)
        n = len(self.features)
        self.y0 = np.zeros((n, 4), np.int64)
        self.x0 = np.zeros((n, 4), np.int64)
        self.y1 = np.zeros((n, 4), np.int64)
        self.x1 = np.zeros((n, 4), np.int64)
        self.wt = np.zeros((n, 4))
        for i, f in enumerate(self.features):
            cells = f.cells()
            aw = sum(r.area for r, c in cells if c > 0)
            ab = sum(r.area for r, c in cells if c < 0)
            for k, (r, c) in enumerate(cells):
                self.y0[i, k], self.x0[i, k], self.y1[i, k], self.x1[i, k] = r.y, r.x, r.y2, r.x2
                self.wt[i, k] = 1.0 if c > 0 else -aw / ab

    def values(self, windows: np.ndarray, chunk: int = 256) -> np.ndarray:
        """Normalized responses, shape ``(n_windows, n_features)``."""
        windows = np.asarray(windows, dtype=np.uint8)
        n = len(windows)
        out = np.empty((n, len(self.features)))
        for s in range(0, n, chunk):
            w = windows[s:s + chunk].astype(np.int64)
            P = np.pad(w.cumsum(1).cumsum(2), ((0, 0), (1, 0), (1, 0)))
            sums = (P[:, self.y1, self.x1] - P[:, self.y0, self.x1]
                    - P[:, self.y1, self.x0] + P[:, self.y0, self.x0])
            raw = (sums * self.wt[None]).sum(axis=2)
            flat = w.reshape(len(w), -1).astype(np.float64)
            sigma = flat.std(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = raw / (WINDOW * WINDOW * sigma[:, None])
            v[sigma == 0] = 0.0
            out[s:s + chunk] = v
        return out


# ---------------------------------------------------------------------------
# boosting

@dataclass(frozen=True)
class Stump:
    index: int
    threshold: float
    parity: int
    alpha: float
    error: float

    def predict(self, values: np.ndarray) -> np.ndarray:
        return (self.parity * values < self.parity * self.threshold).astype(np.int64)


@dataclass
class BoostResult:
    stumps: list[Stump]
    round_weights: list[np.ndarray] = field(default_factory=list)

    def votes(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X))
        for s in self.stumps:
            total += s.alpha * s.predict(X[:, s.index])
        return total

    def predict(self, X: np.ndarray) -> np.ndarray:
        half = 0.5 * sum(s.alpha for s in self.stumps)
        return (self.votes(X) >= half).astype(np.int64)


def best_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[int, float, int, float]:
    """Weighted-error-minimizing ``(feature, threshold, parity, error)``.

    Thresholds are midpoints between consecutive distinct sorted values.
    """
    n, F = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    ws = w[order]
    ys = y[order]
    cpos = np.cumsum(ws * ys, axis=0)[:-1]
    cneg = np.cumsum(ws * (1 - ys), axis=0)[:-1]
    tpos = (w * y).sum()
    tneg = (w * (1 - y)).sum()
    # parity +1 predicts positive below the threshold
    err_pos = cneg + (tpos - cpos)
    err_neg = cpos + (tneg - cneg)
    distinct = Xs[1:] > Xs[:-1]
    err_pos = np.where(distinct, err_pos, np.inf)
    err_neg = np.where(distinct, err_neg, np.inf)
    i_pos = np.unravel_index(np.argmin(err_pos), err_pos.shape)
    i_neg = np.unravel_index(np.argmin(err_neg), err_neg.shape)
    e_pos, e_neg = err_pos[i_pos], err_neg[i_neg]
    if not np.isfinite(min(e_pos, e_neg)):
        raise ValueError("no feature takes two distinct values")
    (i, j), parity, err = (i_pos, 1, e_pos) if e_pos <= e_neg else (i_neg, -1, e_neg)
    theta = 0.5 * (Xs[i, j] + Xs[i + 1, j])
    return int(j), float(theta), parity, float(max(err, 0.0))


def _normalize(w: np.ndarray) -> np.ndarray:
    """Divide by the total, then push the rounding residual onto the largest weight."""
    w = w / w.sum()
    k = int(np.argmax(w))
    for _ in range(4):
        r = 1.0 - math.fsum(w)
        if r == 0.0:
            break
        w[k] += r
    return w


def boost(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> Iterator[tuple[Stump, np.ndarray]]:
    """Yield one stump per round with the normalized weights that selected it."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if set(np.unique(y)) != {0, 1}:
        raise ValueError("boosting needs both classes present")
    if weights is None:
        m, l = int((y == 0).sum()), int((y == 1).sum())
        weights = np.where(y == 1, 1.0 / (2 * l), 1.0 / (2 * m))
    w = np.array(weights, dtype=np.float64)
    while True:
        w = _normalize(w)
        j, theta, parity, eps = best_stump(X, y, w)
        if eps >= 0.5:
            return
        eps_c = max(eps, 1e-12)
        beta = eps_c / (1.0 - eps_c)
        stump = Stump(j, theta, parity, math.log(1.0 / beta), eps)
        yield stump, w.copy()
        e = (stump.predict(X[:, j]) != y).astype(np.float64)
        w = w * beta ** (1.0 - e)


def adaboost_train(X: np.ndarray, y: np.ndarray, rounds: int) -> BoostResult:
    """Discrete boosting of threshold stumps over the columns of ``X``."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    result = BoostResult([])
    for stump, w in boost(X, y):
        result.stumps.append(stump)
        result.round_weights.append(w)
        if len(result.stumps) == rounds:
            break
    return result


# ---------------------------------------------------------------------------
# cascade model

@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    threshold: float
    parity: int
    alpha: float


@dataclass(frozen=True)
class CascadeStage:
    weak: tuple[WeakClassifier, ...]
    threshold: float

    @property
    def half_alpha(self) -> float:
        return 0.5 * sum(c.alpha for c in self.weak)


@dataclass(frozen=True)
class CascadeModel:
    stages: tuple[CascadeStage, ...]
    window: int = WINDOW
    scale_step: float = 1.25
    n_scales: int = 11

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a cascade needs at least one stage")
        for st in self.stages:
            for c in st.weak:
                if not c.feature.rect.inside(self.window, self.window):
                    raise ValueError(f"{c.feature} outside the base window")

    def classify_windows(self, windows: np.ndarray) -> np.ndarray:
        """Boolean pass/fail for a stack of base-size windows."""
        feats = sorted({c.feature for st in self.stages for c in st.weak}, key=_feature_key)
        index = {f: i for i, f in enumerate(feats)}
        vals = FeatureTable(feats).values(windows)
        alive = np.ones(len(windows), dtype=bool)
        for st in self.stages:
            total = np.zeros(len(windows))
            for c in st.weak:
                v = vals[:, index[c.feature]]
                total += c.alpha * (c.parity * v < c.parity * c.threshold)
            alive &= total >= st.threshold
        return alive


def _feature_key(f: HaarFeature):
    return (f.kind, f.x, f.y, f.w, f.h)


@dataclass(frozen=True)
class StageRates:
    f: float
    d: float
    n: float
    p: float = 1.0


def cascade_rates(stages: Sequence) -> tuple:
    """Overall false-positive rate, detection rate, and expected features evaluated.

    ``stages`` are ``(f, d, n, p)`` tuples or ``StageRates``; the first stage
    supplies the leading ``n_0`` term. Exact for ``Fraction`` inputs.
    """
    rows = [s if isinstance(s, StageRates) else StageRates(*s) for s in stages]
    for r in rows:
        for v in (r.f, r.d, r.p):
            if not 0 <= v <= 1:
                raise ValueError("rates must lie in [0, 1]")
    F = math.prod(r.f for r in rows)
    D = math.prod(r.d for r in rows)
    N = rows[0].n
    reach = 1
    for i, r in enumerate(rows[1:], start=1):
        N += r.n * reach
        reach *= r.p
    return F, D, N


# ---------------------------------------------------------------------------
# detection

@dataclass(frozen=True)
class Detection:
    rect: Rect
    score: float


def _scaled_cells(model: CascadeModel, scale: float):
    """Per weak classifier: corner offsets and weights at ``scale``."""
    out = []
    for st in model.stages:
        rows = []
        for c in st.weak:
            cells = c.feature.cells(0, 0, scale)
            aw = sum(r.area for r, col in cells if col > 0)
            ab = sum(r.area for r, col in cells if col < 0)
            rows.append((c, [(r.x, r.y, r.x2, r.y2, 1.0 if col > 0 else -aw / ab) for r, col in cells]))
        out.append((st, rows))
    return out


def _scan_scale(P: np.ndarray, Q: np.ndarray, model: CascadeModel, scale: float, stride: int):
    h, w = P.shape[0] - 1, P.shape[1] - 1
    size = int(round(model.window * scale))
    if size > w or size > h:
        return []
    ys, xs = np.meshgrid(np.arange(0, h - size + 1, stride), np.arange(0, w - size + 1, stride), indexing="ij")
    ys, xs = ys.ravel(), xs.ravel()
    area = float(size * size)

    def box(x0, y0, x1, y1, M):
        return M[y1, x1] - M[y0, x1] - M[y1, x0] + M[y0, x0]

    s = box(xs, ys, xs + size, ys + size, P).astype(np.float64)
    q = box(xs, ys, xs + size, ys + size, Q).astype(np.float64)
    var = q / area - (s / area) ** 2
    sigma = np.sqrt(np.maximum(var, 0.0))
    keep = sigma > 0
    xs, ys, sigma = xs[keep], ys[keep], sigma[keep]
    score = np.zeros(len(xs))
    for st, rows in _scaled_cells(model, scale):
        if len(xs) == 0:
            break
        total = np.zeros(len(xs))
        for c, cells in rows:
            raw = np.zeros(len(xs))
            for x0, y0, x1, y1, wt in cells:
                raw += wt * box(xs + x0, ys + y0, xs + x1, ys + y1, P)
            v = raw / (area * sigma)
            total += c.alpha * (c.parity * v < c.parity * c.threshold)
        ok = total >= st.threshold
        score = total[ok] / max(2 * st.half_alpha, 1e-12)
        xs, ys, sigma = xs[ok], ys[ok], sigma[ok]
    return [Detection(Rect(int(x), int(y), size, size), float(sc)) for x, y, sc in zip(xs, ys, score)]


def scan_windows(img, model: CascadeModel, step: float = 1.0) -> list[Detection]:
    """Raw (unmerged) passing windows in scan order: scale, then y, then x."""
    img = as_gray(img)
    P = np.pad(img.astype(np.int64).cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    sq = img.astype(np.int64) ** 2
    Q = np.pad(sq.cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    raw = []
    for k in range(model.n_scales):
        scale = model.scale_step ** k
        stride = max(1, int(round(scale * step)))
        raw.extend(_scan_scale(P, Q, model, scale, stride))
    return raw


def merge_detections(raw: Sequence[Detection], iou: float = 0.3, min_neighbors: int = 1) -> list[Detection]:
    """Group detections whose IoU exceeds ``iou`` and average each group's corners."""
    n = len(raw)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if raw[i].rect.iou(raw[j].rect) > iou:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[Detection]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(raw[i])
    merged = []
    for members in groups.values():
        if len(members) < min_neighbors:
            continue
        x1 = np.mean([d.rect.x for d in members])
        y1 = np.mean([d.rect.y for d in members])
        x2 = np.mean([d.rect.x2 for d in members])
        y2 = np.mean([d.rect.y2 for d in members])
        rx, ry = int(round(x1)), int(round(y1))
        rect = Rect(rx, ry, max(1, int(round(x2)) - rx), max(1, int(round(y2)) - ry))
        merged.append(Detection(rect, float(sum(d.score for d in members))))
    merged.sort(key=lambda d: (-d.score, d.rect.y, d.rect.x))
    return merged


def detect_multiscale(img, model: CascadeModel, step: float = 1.0, min_neighbors: int = 2) -> list[Detection]:
    img = as_gray(img)
    if img.shape[0] < model.window or img.shape[1] < model.window:
        raise ImageSizeError("image smaller than the base window")
    return merge_detections(scan_windows(img, model, step), 0.3, min_neighbors)


@dataclass(frozen=True)
class FaceResult:
    face: Detection
    roi: Rect
    theta: float = 0.0
    frame: np.ndarray | None = field(default=None, compare=False, repr=False)


def upper_half(r: Rect) -> Rect:
    """Eye ROI: the face box above the line joining the midpoints of its vertical sides."""
    return Rect(r.x, r.y, r.w, max(1, r.h // 2))


def remap(r, k: float, width: int, height: int) -> Rect:
    """Scale a downsampled-frame box ``(x1, y1, x2, y2)`` or Rect by ``k``, clamped."""
    x1, y1, x2, y2 = (r.x, r.y, r.x2, r.y2) if isinstance(r, Rect) else r
    x1, y1, x2, y2 = x1 * k, y1 * k, x2 * k, y2 * k
    rect = Rect(int(round(x1)), int(round(y1)), max(1, int(round(x2 - x1))), max(1, int(round(y2 - y1))))
    return rect.clamp(width, height)


def detect_downsampled(img, model: CascadeModel, sf: float = 5.0, step: float = 1.0,
                       min_neighbors: int = 2) -> FaceResult | None:
    """Detect on the bicubic-downsampled frame, take the best face, remap face and eye ROI."""
    img = as_gray(img)
    small = resample_bicubic(img, sf)
    if small.shape[0] < model.window or small.shape[1] < model.window:
        return None
    dets = detect_multiscale(small, model, step, min_neighbors)
    if not dets:
        return None
    best = dets[0]
    h, w = img.shape
    face = Detection(remap(best.rect, sf, w, h), best.score)
    b = best.rect
    # bottom edge of the ROI runs through the midpoints of the face box's vertical sides
    roi = remap((b.x, b.y, b.x2, b.y + b.h // 2), sf, w, h)
    return FaceResult(face, roi, 0.0, img)


def detect_with_rotation(img, model: CascadeModel, sf: float = 5.0, angles: Iterable[float] = ROTATION_SEQUENCE,
                         step: float = 1.0, min_neighbors: int = 2) -> FaceResult | None:
    """Try upright, then de-rotate the frame by each candidate tilt in turn.

    ``theta`` is the tilt of the face; the frame is rotated by ``-theta`` so
    the returned boxes live in the de-rotated frame (kept in ``frame``).
    """
    img = as_gray(img)
    for theta in angles:
        work = img if theta == 0 else affine_rotate(img, -theta)
        res = detect_downsampled(work, model, sf, step, min_neighbors)
        if res is not None:
            return FaceResult(res.face, res.roi, float(theta), work)
    return None


# ---------------------------------------------------------------------------
# template matching

def correlation_coefficient(window: np.ndarray, tmpl: np.ndarray) -> float:
    f = window.astype(np.float64) - window.mean()
    t = tmpl.astype(np.float64) - tmpl.mean()
    den = math.sqrt((f * f).sum() * (t * t).sum())
    if den == 0:
        return 0.0
    return float(np.clip((f * t).sum() / den, -1.0, 1.0))


def template_scores(img, tmpl, overlap: float = 0.25) -> list[tuple[Rect, float]]:
    img, tmpl = as_gray(img), as_gray(tmpl)
    H, W = img.shape
    h, w = tmpl.shape
    if h > H or w > W:
        raise ImageSizeError("template larger than image")
    sx = max(1, int(round(w * (1 - overlap))))
    sy = max(1, int(round(h * (1 - overlap))))
    out = []
    for y in sliding_positions(H, h, sy):
        for x in sliding_positions(W, w, sx):
            out.append((Rect(x, y, w, h), correlation_coefficient(img[y:y + h, x:x + w], tmpl)))
    return out


def template_match(img, tmpl, overlap: float = 0.25, threshold: float = 0.8) -> list[tuple[Rect, float]]:
    """Windows whose normalized correlation with the template is at least ``threshold``."""
    return [(r, g) for r, g in template_scores(img, tmpl, overlap) if g >= threshold]


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainReport:
    stage_rates: list[StageRates]
    negatives_left: int


def train_cascade(positives: np.ndarray, negative_source, n_stages: int = 4, f_target: float = 0.4,
                  d_target: float = 0.995, max_weak: int = 20, n_neg: int = 400, pool_size: int = 2000,
                  seed: int = 0, log=None) -> tuple[CascadeModel, TrainReport]:
    """Desk-scale cascade training with negative bootstrapping.

    ``negative_source(n, rng, model)`` returns up to ``n`` base-size windows;
    ``model`` is the cascade built so far (None before the first stage), and
    only windows it accepts are kept as negatives for the next stage.
    """
    rng = np.random.default_rng(seed)
    feats = feature_pool(pool_size, seed)
    table = FeatureTable(feats)
    Xp = table.values(positives)
    stages: list[CascadeStage] = []
    rates: list[StageRates] = []
    negs = np.empty((0, WINDOW, WINDOW), np.uint8)
    for _ in range(n_stages):
        negs = _collect_negatives(negs, negative_source, stages, n_neg, rng)
        if len(negs) < 10:
            break
        Xn = table.values(negs)
        X = np.vstack([Xp, Xn])
        y = np.r_[np.ones(len(Xp), np.int64), np.zeros(len(Xn), np.int64)]
        weak: list[WeakClassifier] = []
        stumps: list[Stump] = []
        for stump, _w in boost(X, y):
            stumps.append(stump)
            weak.append(WeakClassifier(feats[stump.index], stump.threshold, stump.parity, stump.alpha))
            votes = BoostResult(stumps).votes(X)
            pv, nv = votes[: len(Xp)], votes[len(Xp):]
            half = 0.5 * sum(s.alpha for s in stumps)
            # lower the stage threshold until the detection target is met
            k = int(math.floor((1 - d_target) * len(pv)))
            thr = min(half, float(np.sort(pv)[k]) - 1e-9)
            dpr = float((pv >= thr).mean())
            fpr = float((nv >= thr).mean())
            if fpr <= f_target or len(weak) >= max_weak:
                break
        stages.append(CascadeStage(tuple(weak), thr))
        rates.append(StageRates(fpr, dpr, float(len(weak)), float((votes >= thr).mean())))
        if log:
            log(f"stage {len(stages)}: {len(weak)} weak, f={fpr:.3f} d={dpr:.3f}")
        negs = negs[CascadeModel(tuple(stages)).classify_windows(negs)]
    return CascadeModel(tuple(stages)), TrainReport(rates, len(negs))


def _collect_negatives(current, source, stages, n, rng, max_rounds: int = 500):
    model = CascadeModel(tuple(stages)) if stages else None
    out = [current]
    have = len(current)
    for _ in range(max_rounds):
        if have >= n:
            break
        batch = source(n - have, rng, model)
        if model is not None and len(batch):
            batch = batch[model.classify_windows(batch)]
        out.append(batch)
        have += len(batch)
    return np.concatenate(out)[:n]


def scene_miner(make_scene, per_scene: int = 50, step: float = 2.0, max_iou: float = 0.5):
    """Negative source that harvests accepted windows from generated scenes.

    ``make_scene(rng)`` returns ``(image, face Rect or None)``; windows
    overlapping the face by ``max_iou`` or more are never harvested.
    """

    def source(n, rng, model):
        img, face = make_scene(rng)
        h, w = img.shape
        if model is None:
            cands = []
            for _ in range(4 * per_scene):
                side = int(rng.integers(WINDOW, min(h, w) // 2 + 1))
                x, y = int(rng.integers(0, w - side + 1)), int(rng.integers(0, h - side + 1))
                cands.append(Rect(x, y, side, side))
        else:
            cands = [d.rect for d in scan_windows(img, model, step)]
        if face is not None:
            cands = [r for r in cands if r.iou(face) < max_iou]
        if not cands:
            return np.empty((0, WINDOW, WINDOW), np.uint8)
        pick = rng.permutation(len(cands))[: min(n, per_scene)]
        return np.stack([resize_bicubic(cands[i].crop(img), WINDOW, WINDOW) for i in sorted(pick)])

    return source


# ---------------------------------------------------------------------------
# persistence

def dumps(model: CascadeModel) -> str:
    lines = ["ocular-cascade 1",
             f"window {model.window}",
             f"scale_step {model.scale_step!r}",
             f"scales {model.n_scales}",
             f"stages {len(model.stages)}"]
    for i, st in enumerate(model.stages):
        lines.append(f"stage {i} {st.threshold!r} {len(st.weak)}")
        for c in st.weak:
            f = c.feature
            lines.append(f"{f.kind} {f.x} {f.y} {f.w} {f.h} {c.threshold!r} {c.parity} {c.alpha!r}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> CascadeModel:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if rows[0] != ["ocular-cascade", "1"]:
        raise ValueError("not an ocular cascade file (version 1)")
    window = int(rows[1][1])
    step = float(rows[2][1])
    scales = int(rows[3][1])
    n = int(rows[4][1])
    pos = 5
    stages = []
    for _ in range(n):
        _, _, thr, count = rows[pos]
        pos += 1
        weak = []
        for _ in range(int(count)):
            kind, x, y, w, h, t, p, a = rows[pos]
            pos += 1
            weak.append(WeakClassifier(HaarFeature(kind, int(x), int(y), int(w), int(h)), float(t), int(p), float(a)))
        stages.append(CascadeStage(tuple(weak), float(thr)))
    return CascadeModel(tuple(stages), window, step, scales)


def save(model: CascadeModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load(path) -> CascadeModel:
    with open(path) as fh:
        return loads(fh.read())


__all__ = [
    "HaarFeature", "WeakClassifier", "CascadeStage", "CascadeModel", "Detection", "FaceResult",
    "StageRates", "Stump", "BoostResult", "FeatureTable",
    "haar_raw", "haar_eval", "adaboost_train", "boost", "best_stump", "cascade_rates",
    "detect_multiscale", "detect_downsampled", "detect_with_rotation", "merge_detections",
    "scan_windows", "template_match", "template_scores", "correlation_coefficient",
    "train_cascade", "enumerate_features", "feature_pool", "integral_image", "squared_integral_image",
    "dumps", "loads", "save", "load", "upper_half", "remap",
]
