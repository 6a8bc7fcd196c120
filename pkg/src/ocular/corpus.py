"""Synthetic datasets written in the frame-directory format, with ground truth."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import eog, synth
from .dataset import FrameDataset, TruthRow, write_dataset
from .eyestate import CLOSED, OPEN
from .imgcore import Rect


def closed_runs(rng: np.random.Generator, n: int, closed: int, run=(3, 30)) -> np.ndarray:
    """Boolean mask with exactly ``closed`` True frames grouped into eyelid-closure runs."""
    if not 0 <= closed <= n:
        raise ValueError("need 0 <= closed <= n")
    lengths = []
    while sum(lengths) < closed:
        lengths.append(int(rng.integers(run[0], run[1] + 1)))
    if lengths:
        lengths[-1] -= sum(lengths) - closed
        lengths = [v for v in lengths if v > 0]
    free = n - closed
    if len(lengths) > free + 1:
        raise ValueError("too many closures to separate")
    # open gaps: one before each run, the rest after; interior gaps are at least one frame
    cuts = np.sort(rng.choice(free - max(0, len(lengths) - 1) + 1, len(lengths), replace=True))
    mask = np.zeros(n, bool)
    pos = 0
    prev = 0
    for i, (c, L) in enumerate(zip(cuts, lengths)):
        pos += int(c - prev) + (1 if i else 0)
        prev = c
        mask[pos:pos + L] = True
        pos += L
    return mask


def perclos_stream(root, seed: int = 0, frames: int = 1800, fps: float = 10.0, closed: int = 360,
                   noise: float = 2.0) -> FrameDataset:
    """Driver-camera stream: fixed scene and face, eye closures placed at random."""
    rng = np.random.default_rng(seed)
    scene, pos = synth.driver_scene(rng)
    mask = closed_runs(rng, frames, closed)
    imgs, truth = [], []
    face = Rect(pos[0], pos[1], synth.FACE_SIZE, synth.FACE_SIZE)
    for k in range(frames):
        img, boxes = synth.driver_frame(rng, scene, pos, bool(mask[k]), noise)
        imgs.append(img)
        truth.append(TruthRow(k, face, Rect(*boxes[0]), CLOSED if mask[k] else OPEN))
    return write_dataset(root, imgs, fps, truth)


def blank_stream(root, frames: int = 30, fps: float = 10.0, level: int = 128) -> FrameDataset:
    img = np.full((240, 320), level, np.uint8)
    return write_dataset(root, [img] * frames, fps, [TruthRow(k) for k in range(frames)])


def eye_corpus(root, seed: int = 0, frames: int = 150, others_per_frame: int = 2, jitter: int = 5) -> FrameDataset:
    """Eye-sized crops from driver frames: both eyes (open or closed) plus non-eye crops.

    Eye crops are shifted by up to ``jitter`` pixels, the misalignment a
    downsampled face box passes on to the eye search.
    """
    rng = np.random.default_rng(seed)
    imgs, truth = [], []
    for f in range(frames):
        scene, pos = synth.driver_scene(rng)
        closed = bool(f % 2)
        img, boxes = synth.driver_frame(rng, scene, pos, closed)
        eyes = [Rect(*b) for b in boxes]
        for e in eyes:
            dx, dy = (int(v) for v in rng.integers(-jitter, jitter + 1, 2))
            imgs.append(Rect(e.x + dx, e.y + dy, e.w, e.h).crop(img).copy())
            truth.append(TruthRow(len(truth), None, Rect(0, 0, e.w, e.h), CLOSED if closed else OPEN))
        got = 0
        while got < others_per_frame:
            w, h = eyes[0].w, eyes[0].h
            x, y = int(rng.integers(0, img.shape[1] - w + 1)), int(rng.integers(0, img.shape[0] - h + 1))
            r = Rect(x, y, w, h)
            if max(r.iou(e) for e in eyes) >= 0.1:
                continue
            imgs.append(r.crop(img).copy())
            truth.append(TruthRow(len(truth)))
            got += 1
    return write_dataset(root, imgs, 10.0, truth)


def window_corpus(root, seed: int = 0, positives: int = 200, negatives: int = 200) -> FrameDataset:
    """Base-size face windows and background / misaligned-face windows."""
    rng = np.random.default_rng(seed)
    pos = [synth.face_window(rng) for _ in range(positives)]
    neg = list(synth.negative_windows(negatives, rng))
    full = Rect(0, 0, pos[0].shape[1], pos[0].shape[0])
    truth = [TruthRow(k, full) for k in range(positives)] + [TruthRow(positives + k) for k in range(negatives)]
    return write_dataset(root, pos + neg, 1.0, truth)


def spectacle_set(root, seed: int = 0, each: int = 20) -> FrameDataset:
    """Face crops with spectacles, then without; the state column holds glasses / none."""
    rng = np.random.default_rng(seed)
    imgs = [synth.to_uint8(synth.spectacle_face(rng, glasses=g, full=True))
            for g in [True] * each + [False] * each]
    full = Rect(0, 0, imgs[0].shape[1], imgs[0].shape[0])
    truth = [TruthRow(k, full, None, "glasses" if k < each else "none") for k in range(2 * each)]
    return write_dataset(root, imgs, 1.0, truth)


SACCADE_STEPS = ((0.12, 0.2), (0.32, -0.3), (0.52, 0.25), (0.72, -0.12))


def saccade_set(root, seed: int = 0, tau: float = 0.008, static: bool = False, steps=None, n: int = 210,
                fps: float = 420.0, with_eog: bool = False) -> FrameDataset:
    """Eye-region clip at a high frame rate; iris truth per frame, optional matching EOG file."""
    rng = np.random.default_rng(seed)
    frames, xs, corners = synth.saccade_clip(rng, n=n, fps=fps, tau=tau, static=static, steps=steps)
    cy = corners[0][1]
    truth = [TruthRow(k, iris=(float(x), float(cy))) for k, x in enumerate(xs)]
    ds = write_dataset(root, frames, fps, truth)
    if with_eog:
        if steps is None:
            raise ValueError("the EOG trace needs explicit steps")
        trace = synth.eog_trace(rng, steps, tau, n / fps)
        eog.write_csv(Path(root) / "eog.csv", trace, eog.EOG_RATE)
    return ds


def analytic_sr(amplitude: float, tau: float, frac: float = 0.15) -> float:
    """Saccadic ratio of a logistic step: peak slope over the time spent above ``frac`` of it."""
    s = (1 - np.sqrt(1 - frac)) / 2  # s (1 - s) = frac / 4
    duration = 2 * tau * np.log((1 - s) / s)
    return abs(amplitude) / (4 * tau) / duration
