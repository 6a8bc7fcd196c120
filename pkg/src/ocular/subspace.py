"""PCA subspaces (eigen-faces / eigen-eyes / LBP feature space) and min-error window search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import ImageSizeError, Rect, as_gray, resize_bicubic, sliding_positions


class RankError(ValueError):
    pass


@dataclass(frozen=True)
class SubspaceModel:
    mean: np.ndarray
    basis: np.ndarray  # (K, dim), rows orthonormal
    eigenvalues: np.ndarray
    shape: tuple[int, int] | None = None  # (h, w) of image patches, if any
    normalized: bool = False

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def truncated(self, k: int) -> "SubspaceModel":
        if not 1 <= k <= self.k:
            raise ValueError(f"k must lie in [1, {self.k}]")
        return SubspaceModel(self.mean, self.basis[:k], self.eigenvalues[:k], self.shape, self.normalized)

    def __eq__(self, other):
        if not isinstance(other, SubspaceModel):
            return NotImplemented
        return (np.array_equal(self.mean, other.mean) and np.array_equal(self.basis, other.basis)
                and np.array_equal(self.eigenvalues, other.eigenvalues)
                and self.shape == other.shape and self.normalized == other.normalized)

    __hash__ = None


def pca_train(vectors, k: int, shape=None, normalized: bool = False) -> SubspaceModel:
    """Top-``k`` principal directions through the P x P Gram matrix.

    Eigenvalues are those of the covariance ``A A^T / P``.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("vectors must be a 2-D array (P, dim)")
    P = X.shape[0]
    if P < 2:
        raise ValueError("need at least two training vectors")
    if not 1 <= k <= P - 1:
        raise ValueError(f"k must lie in [1, {P - 1}]")
    mean = X.mean(axis=0)
    A = (X - mean).T  # dim x P
    gram = A.T @ A
    lam, V = np.linalg.eigh(gram)
    order = np.argsort(-lam, kind="stable")
    lam, V = lam[order], V[:, order]
    if lam[0] <= 1e-12 * max(1.0, np.abs(X).max() ** 2):
        raise RankError("training vectors are all identical")
    if lam[k - 1] <= 1e-10 * lam[0]:
        raise RankError(f"training set has rank < {k}")
    U = A @ V[:, :k]
    U /= np.linalg.norm(U, axis=0)
    # re-orthogonalize away round-off from the lift
    U, _ = np.linalg.qr(U)
    U = U.T
    for row in U:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1
    return SubspaceModel(mean, U, lam[:k] / P, None if shape is None else tuple(shape), normalized)


def weights(model: SubspaceModel, vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64).ravel()
    if v.shape[0] != model.dim:
        raise ValueError(f"vector length {v.shape[0]} != model dim {model.dim}")
    return model.basis @ (v - model.mean)


def reconstruction_error(model: SubspaceModel, vec) -> float:
    v = np.asarray(vec, dtype=np.float64).ravel()
    w = weights(model, v)
    phi = v - model.mean
    return float(np.linalg.norm(phi - model.basis.T @ w))


def normalize_patch(patch) -> np.ndarray:
    """Zero mean, unit variance; a flat patch maps to zeros."""
    p = np.asarray(patch, dtype=np.float64).ravel()
    p = p - p.mean()
    s = p.std()
    return p / s if s > 0 else p


def train_patch_model(patches, k: int, normalize: bool = True) -> SubspaceModel:
    patches = [as_gray(p) for p in patches]
    shape = patches[0].shape
    if any(p.shape != shape for p in patches):
        raise ValueError("patches must share one shape")
    vecs = [normalize_patch(p) if normalize else p.astype(np.float64).ravel() for p in patches]
    return pca_train(np.stack(vecs), k, shape, normalize)


@dataclass(frozen=True)
class SubspaceHit:
    rect: Rect  # in roi coordinates
    e_min: float
    resized_rect: Rect


EYE_MODE = dict(window=(50, 40), overlap=0.10, resize_to=(200, 70))
FACE_MODE = dict(window=(200, 140), overlap=0.25, resize_to=None)


def subspace_detect(roi, model: SubspaceModel, window=(50, 40), overlap: float = 0.10,
                    resize_to=(200, 70)) -> SubspaceHit:
    """Window with minimum reconstruction error; ``window`` and ``resize_to`` are ``(w, h)``."""
    roi = as_gray(roi)
    if roi.shape[0] < 8 or roi.shape[1] < 8:
        raise ImageSizeError("roi smaller than 8x8")
    ww, wh = window
    if model.dim != ww * wh:
        raise ValueError(f"model dim {model.dim} does not match a {ww}x{wh} window")
    work = roi if resize_to is None else resize_bicubic(roi, resize_to[0], resize_to[1])
    H, W = work.shape
    if wh > H or ww > W:
        raise ImageSizeError("window larger than the (resized) roi")
    sx = max(1, int(round(ww * (1 - overlap))))
    sy = max(1, int(round(wh * (1 - overlap))))
    best, best_e = None, np.inf
    for y in sliding_positions(H, wh, sy):
        for x in sliding_positions(W, ww, sx):
            patch = work[y:y + wh, x:x + ww]
            vec = normalize_patch(patch) if model.normalized else patch.astype(np.float64).ravel()
            e = reconstruction_error(model, vec)
            if e < best_e:
                best, best_e = Rect(x, y, ww, wh), e
    kx, ky = roi.shape[1] / W, roi.shape[0] / H
    back = Rect(int(round(best.x * kx)), int(round(best.y * ky)),
                max(1, int(round(best.w * kx))), max(1, int(round(best.h * ky)))).clamp(roi.shape[1], roi.shape[0])
    return SubspaceHit(back, float(best_e), best)


# ---------------------------------------------------------------------------
# persistence

def dumps(model: SubspaceModel) -> str:
    shape = "none" if model.shape is None else f"{model.shape[0]} {model.shape[1]}"
    lines = ["ocular-subspace 1", f"dim {model.dim}", f"k {model.k}", f"shape {shape}",
             f"normalized {int(model.normalized)}",
             "eigenvalues " + " ".join(repr(float(v)) for v in model.eigenvalues),
             "mean " + " ".join(repr(float(v)) for v in model.mean)]
    for row in model.basis:
        lines.append("u " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def loads(text: str) -> SubspaceModel:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if rows[0] != ["ocular-subspace", "1"]:
        raise ValueError("not an ocular subspace file (version 1)")
    dim, k = int(rows[1][1]), int(rows[2][1])
    shape = None if rows[3][1] == "none" else (int(rows[3][1]), int(rows[3][2]))
    normalized = bool(int(rows[4][1]))
    lam = np.array([float(v) for v in rows[5][1:]])
    mean = np.array([float(v) for v in rows[6][1:]])
    basis = np.array([[float(v) for v in r[1:]] for r in rows[7:7 + k]])
    if mean.shape != (dim,) or basis.shape != (k, dim):
        raise ValueError("subspace file is truncated or inconsistent")
    return SubspaceModel(mean, basis, lam, shape, normalized)


def save(model: SubspaceModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load(path) -> SubspaceModel:
    with open(path) as fh:
        return loads(fh.read())
