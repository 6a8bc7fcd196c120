"""Spectacle-presence test from frame-edge components, and eye-region extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .enhance import clahe, otsu
from .imgcore import (LAPLACIAN_5x5, Component, ImageSizeError, as_gray, connected_components,
                      dilate_binary_square, distance_transform, filter2d, kernel, local_stddev, to_uint8)


def dog_mask() -> np.ndarray:
    """7x7 integer Mexican-hat mask (zero sum, centre 16)."""
    return kernel([[0, 0, -1, -1, -1, 0, 0],
                   [0, -2, -3, -3, -3, -2, 0],
                   [-1, -3, 5, 5, 5, -3, -1],
                   [-1, -3, 5, 16, 5, -3, -1],
                   [-1, -3, 5, 5, 5, -3, -1],
                   [0, -2, -3, -3, -3, -2, 0],
                   [0, 0, -1, -1, -1, 0, 0]])


def detection_factor(l1: float, l2: float = 0.0, b: float = 1.0) -> float:
    """``(l1 + l2) / (1.5 b)``; pass ``l2 = 0`` for the single-component form."""
    if b <= 0:
        raise ValueError("face breadth must be positive")
    return (l1 + l2) / (1.5 * b)


@dataclass
class SpectacleConfig:
    upper_half: bool = True  # the face crop's upper half is the search region
    edge: str = "dog"  # or "laplacian"
    clahe_tile: int = 64
    clahe_clip: float = 3.0
    local_std: bool = True
    min_size: int = 30
    keep: int = 4
    two_component: bool = True
    length: str = "skeleton"  # component length: skeleton pixels or all pixels


@dataclass
class SpectacleResult:
    detected: bool
    D: float
    components: list[Component]
    lengths: list[int]
    shape: tuple[int, int]
    eye_region: np.ndarray | None = field(default=None, repr=False)

    @property
    def largest(self) -> int:
        return self.lengths[0] if self.lengths else 0

    @property
    def second(self) -> int:
        return self.lengths[1] if len(self.lengths) > 1 else 0

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, bool)
        for c in self.components:
            m |= c.mask(self.shape)
        return m


def edge_strength(img, edge: str = "dog") -> np.ndarray:
    """Absolute mask response stretched to 0..255."""
    k = dog_mask() if edge == "dog" else LAPLACIAN_5x5 if edge == "laplacian" else None
    if k is None:
        raise ValueError("edge must be 'dog' or 'laplacian'")
    resp = np.abs(filter2d(img, k))
    peak = resp.max()
    if peak <= 0:
        return np.zeros(resp.shape, np.uint8)
    return to_uint8(resp * (255.0 / peak))


def component_length(c: Component, shape, how: str = "skeleton") -> int:
    """Stroke length of a component: pixels of its morphological skeleton."""
    if how == "pixels":
        return c.pixel_count
    if how == "skeleton":
        from skimage.morphology import skeletonize
        return int(skeletonize(c.mask(shape)).sum())
    raise ValueError("length must be 'skeleton' or 'pixels'")


def detect_spectacles(face, cfg: SpectacleConfig | None = None) -> SpectacleResult:
    cfg = cfg or SpectacleConfig()
    face = as_gray(face)
    if face.size == 0:
        raise ImageSizeError("empty face crop")
    b = face.shape[1]
    roi = face[: face.shape[0] // 2] if cfg.upper_half else face
    if roi.shape[0] < 7 or roi.shape[1] < 7:
        raise ImageSizeError("search region smaller than the 7x7 mask")
    work = clahe(roi, cfg.clahe_tile, cfg.clahe_clip)
    if cfg.local_std:
        work = local_stddev(work)
    strength = edge_strength(work, cfg.edge)
    if strength.max() == 0:
        return SpectacleResult(False, 0.0, [], [], roi.shape)
    _, binary = otsu(strength)
    kept = np.zeros(roi.shape, bool)
    for c in connected_components(binary, cfg.min_size):
        kept |= c.mask(roi.shape)
    comps = connected_components(dilate_binary_square(kept, 3))[: cfg.keep]
    ranked = sorted(((component_length(c, roi.shape, cfg.length), i) for i, c in enumerate(comps)),
                    key=lambda t: (-t[0], t[1]))
    comps = [comps[i] for _, i in ranked]
    lengths = [n for n, _ in ranked]
    l1 = lengths[0] if lengths else 0
    l2 = lengths[1] if len(lengths) > 1 and cfg.two_component else 0
    D = detection_factor(l1, l2, b)
    return SpectacleResult(D >= 1.0, D, comps, lengths, roi.shape)


def extract_eye_region(result: SpectacleResult, metric: str = "quasi_euclidean", frac: float = 0.8) -> np.ndarray:
    """Pixels closer than ``frac * l`` to the retained components."""
    if not result.detected:
        raise RuntimeError("no spectacles detected; eye region is undefined")
    dist = distance_transform(result.mask(), metric)
    region = dist < frac * result.largest
    result.eye_region = region
    return region
