"""Eye-state features (block LBP, subspace weights), kernel classifier, PERCLOS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import subspace
from .imgcore import as_gray, resize_bicubic

OPEN, CLOSED, UNKNOWN = "open", "closed", "unknown"
EYE_W, EYE_H = 50, 40
BLOCK_W, BLOCK_H = 5, 4

# clockwise from the top-left neighbour, (dy, dx)
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_code(patch) -> int:
    p = np.asarray(patch)
    if p.shape != (3, 3):
        raise ValueError("lbp_code needs a 3x3 patch")
    c = p[1, 1]
    return sum(1 << n for n, (dy, dx) in enumerate(NEIGHBOURS) if p[1 + dy, 1 + dx] >= c)


def lbp_image(img) -> np.ndarray:
    """Per-pixel LBP codes with edge-clamped borders."""
    img = as_gray(img).astype(np.int16)
    h, w = img.shape
    pad = np.pad(img, 1, mode="edge")
    out = np.zeros((h, w), np.int64)
    for n, (dy, dx) in enumerate(NEIGHBOURS):
        out |= (pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] >= img).astype(np.int64) << n
    return out


def block_lbp(eye) -> np.ndarray:
    """1600-value descriptor: 16-bin code histograms of the 10x10 grid of 5x4 blocks."""
    eye = as_gray(eye)
    if eye.shape != (EYE_H, EYE_W):
        eye = resize_bicubic(eye, EYE_W, EYE_H)
    bins = lbp_image(eye) // 16
    ny, nx = EYE_H // BLOCK_H, EYE_W // BLOCK_W
    blocks = bins.reshape(ny, BLOCK_H, nx, BLOCK_W).transpose(0, 2, 1, 3).reshape(ny * nx, -1)
    hist = np.zeros((ny * nx, 16))
    np.add.at(hist, (np.repeat(np.arange(ny * nx), BLOCK_W * BLOCK_H), blocks.ravel()), 1)
    return hist.ravel()


# ---------------------------------------------------------------------------
# kernel classifier

@dataclass(frozen=True)
class KernelClassifier:
    """Two-class kernel machine; positive decision means ``closed``."""

    kernel: str
    degree: int
    gamma: float
    coef0: float
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float

    def gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        dot = np.asarray(A, np.float64) @ np.asarray(B, np.float64).T
        if self.kernel == "linear":
            return dot
        return (self.gamma * dot + self.coef0) ** self.degree

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.gram(X, self.support_vectors) @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) > 0).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, KernelClassifier):
            return NotImplemented
        return (self.kernel, self.degree, self.gamma, self.coef0, self.C, self.bias) == \
            (other.kernel, other.degree, other.gamma, other.coef0, other.C, other.bias) and \
            np.array_equal(self.support_vectors, other.support_vectors) and \
            np.array_equal(self.dual_coef, other.dual_coef)

    __hash__ = None


def classifier_train(X, y, kernel: str = "poly", degree: int = 3, C: float = 10.0,
                     gamma: float | None = None, coef0: float = 1.0) -> KernelClassifier:
    """Soft-margin SVM; labels are 1 (closed) and 0 (open)."""
    from sklearn.svm import SVC

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if set(np.unique(y)) != {0, 1}:
        raise ValueError("training needs both classes (0 = open, 1 = closed)")
    if kernel not in ("linear", "poly"):
        raise ValueError("kernel must be 'linear' or 'poly'")
    if gamma is None:
        var = X.var()
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    svc = SVC(kernel=kernel, degree=degree, gamma=gamma, coef0=coef0, C=C, tol=1e-3, shrinking=False)
    svc.fit(X, y)
    # sklearn orders classes ascending, so its decision is already "closed positive"
    return KernelClassifier(kernel, int(degree), float(gamma), float(coef0), float(C),
                            svc.support_vectors_.copy(), svc.dual_coef_[0].copy(), float(svc.intercept_[0]))


def eye_features(eye, model: subspace.SubspaceModel, mode: str = "pixels") -> np.ndarray:
    """Projection weights of the eye crop: pixel eigen-eyes or block-LBP subspace."""
    eye = as_gray(eye)
    if eye.shape != (EYE_H, EYE_W):
        eye = resize_bicubic(eye, EYE_W, EYE_H)
    if mode == "pixels":
        vec = subspace.normalize_patch(eye) if model.normalized else eye.astype(np.float64).ravel()
    elif mode == "lbp":
        vec = block_lbp(eye)
    else:
        raise ValueError("mode must be 'pixels' or 'lbp'")
    return subspace.weights(model, vec)


def eye_state(eye, model: subspace.SubspaceModel, clf: KernelClassifier, mode: str = "pixels"):
    """``(state, score)``; a missing eye crop gives ``("unknown", nan)``."""
    if eye is None:
        return UNKNOWN, math.nan
    score = float(clf.decision(eye_features(eye, model, mode))[0])
    return (CLOSED if score > 0 else OPEN), score


# ---------------------------------------------------------------------------
# persistence

def dumps(clf: KernelClassifier) -> str:
    lines = ["ocular-svm 1", f"kernel {clf.kernel}", f"degree {clf.degree}", f"gamma {clf.gamma!r}",
             f"coef0 {clf.coef0!r}", f"C {clf.C!r}", f"bias {clf.bias!r}",
             f"sv {len(clf.support_vectors)} {clf.support_vectors.shape[1]}"]
    for a, v in zip(clf.dual_coef, clf.support_vectors):
        lines.append(" ".join([repr(float(a))] + [repr(float(t)) for t in v]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> KernelClassifier:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if rows[0] != ["ocular-svm", "1"]:
        raise ValueError("not an ocular classifier file (version 1)")
    kv = {r[0]: r[1:] for r in rows[1:8]}
    n, d = int(kv["sv"][0]), int(kv["sv"][1])
    body = np.array([[float(t) for t in r] for r in rows[8:8 + n]]).reshape(n, d + 1)
    return KernelClassifier(kv["kernel"][0], int(kv["degree"][0]), float(kv["gamma"][0]), float(kv["coef0"][0]),
                            float(kv["C"][0]), body[:, 1:].copy(), body[:, 0].copy(), float(kv["bias"][0]))


def save(clf: KernelClassifier, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(clf))


def load(path) -> KernelClassifier:
    with open(path) as fh:
        return loads(fh.read())


# ---------------------------------------------------------------------------
# PERCLOS

def perclos_value(states: Sequence[str]) -> float | None:
    """``100 E_c / E_t`` over known frames; None when every frame is unknown."""
    closed = sum(s == CLOSED for s in states)
    known = sum(s in (OPEN, CLOSED) for s in states)
    if known == 0:
        return None
    return 100.0 * closed / known


@dataclass(frozen=True)
class PerclosRow:
    minute: int
    value: float | None
    closed: int
    known: int
    flag: str  # "", "warmup" (window not yet full) or "undefined"


def perclos(states: Sequence[str], fps: float, window: float = 180.0, stride: float = 60.0) -> list[PerclosRow]:
    """Trailing-window PERCLOS reported at every full stride."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    if not 0 < stride <= window:
        raise ValueError("need 0 < stride <= window")
    for s in states:
        if s not in (OPEN, CLOSED, UNKNOWN):
            raise ValueError(f"unknown eye state {s!r}")
    closed = np.r_[0, np.cumsum([s == CLOSED for s in states])]
    known = np.r_[0, np.cumsum([s != UNKNOWN for s in states])]
    total = len(states)
    rows = []
    k = 1
    while True:
        end_t = k * stride
        end = int(round(end_t * fps))
        if end > total:
            break
        start = max(0, int(round((end_t - window) * fps)))
        c, n = int(closed[end] - closed[start]), int(known[end] - known[start])
        flag = "" if end_t >= window else "warmup"
        if n == 0:
            rows.append(PerclosRow(k, None, c, n, "undefined"))
        else:
            rows.append(PerclosRow(k, 100.0 * c / n, c, n, flag))
        k += 1
    return rows
