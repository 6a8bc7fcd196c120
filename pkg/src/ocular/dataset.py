"""PGM frame directories with a manifest and an optional ground-truth CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgcore import Rect
from .pgm import PgmError, read_pgm, write_pgm

MANIFEST = "manifest.txt"
FRAME_NAME = "frame_{:06d}.pgm"
TRUTH_COLUMNS = ("frame", "face_x", "face_y", "face_w", "face_h", "eye_x", "eye_y", "eye_w", "eye_h",
                 "state", "iris_x", "iris_y")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TruthRow:
    frame: int
    face: Rect | None = None
    eye: Rect | None = None
    state: str = ""
    iris: tuple[float, float] | None = None


@dataclass(frozen=True)
class FrameDataset:
    root: Path
    fps: float
    frames: int
    truth: Path | None = None

    def frame_path(self, k: int) -> Path:
        if not 0 <= k < self.frames:
            raise IndexError(f"frame {k} outside 0..{self.frames - 1}")
        return self.root / FRAME_NAME.format(k)

    def read(self, k: int) -> np.ndarray:
        """Decode frame ``k``; raises PgmError or OSError when it is unreadable."""
        return read_pgm(self.frame_path(k))

    def __iter__(self):
        """``(k, image or None, error message)`` in frame order."""
        for k in range(self.frames):
            try:
                yield k, self.read(k), ""
            except (PgmError, OSError) as exc:
                yield k, None, f"{type(exc).__name__}: {exc}"

    def ground_truth(self) -> list[TruthRow]:
        if self.truth is None:
            raise DatasetError(f"{self.root}: manifest names no ground truth")
        rows = read_truth(self.truth)
        for r in rows:
            if not 0 <= r.frame < self.frames:
                raise DatasetError(f"ground truth frame {r.frame} outside the dataset")
        return rows


def open_dataset(root) -> FrameDataset:
    root = Path(root)
    path = root / MANIFEST
    if not path.exists():
        raise DatasetError(f"{root}: no {MANIFEST}")
    values = {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in ("fps", "frames", "truth"):
            raise DatasetError(f"{path}:{n}: unknown key {k!r}")
        values[k] = v
    try:
        fps, frames = float(values["fps"]), int(values["frames"])
    except KeyError as exc:
        raise DatasetError(f"{path}: missing {exc.args[0]}") from None
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if not fps > 0:
        raise DatasetError("fps must be positive")
    if frames < 0:
        raise DatasetError("frame count must be >= 0")
    truth = root / values["truth"] if "truth" in values else None
    return FrameDataset(root, fps, frames, truth)


def write_dataset(root, frames, fps: float, truth: list[TruthRow] | None = None) -> FrameDataset:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    n = 0
    for n, img in enumerate(frames, 1):
        write_pgm(root / FRAME_NAME.format(n - 1), img)
    lines = [f"fps={fps!r}", f"frames={n}"]
    if truth is not None:
        write_truth(root / "truth.csv", truth)
        lines.append("truth=truth.csv")
    (root / MANIFEST).write_text("\n".join(lines) + "\n")
    return open_dataset(root)


def _rect_fields(r: Rect | None) -> list[str]:
    return ["", "", "", ""] if r is None else [str(r.x), str(r.y), str(r.w), str(r.h)]


def write_truth(path, rows: list[TruthRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for r in rows:
            iris = ["", ""] if r.iris is None else [f"{r.iris[0]:.6f}", f"{r.iris[1]:.6f}"]
            w.writerow([r.frame, *_rect_fields(r.face), *_rect_fields(r.eye), r.state, *iris])


def _rect(vals: list[str]) -> Rect | None:
    if all(v == "" for v in vals):
        return None
    if any(v == "" for v in vals):
        raise DatasetError("partially filled rectangle")
    return Rect(*(int(v) for v in vals))


def read_truth(path) -> list[TruthRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or tuple(h.strip() for h in head) != TRUTH_COLUMNS:
            raise DatasetError(f"{path}: header must be {','.join(TRUTH_COLUMNS)}")
        rows = []
        for n, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(TRUTH_COLUMNS):
                raise DatasetError(f"{path}:{n}: expected {len(TRUTH_COLUMNS)} fields")
            rec = [v.strip() for v in rec]
            try:
                iris = None if rec[10] == "" and rec[11] == "" else (float(rec[10]), float(rec[11]))
                rows.append(TruthRow(int(rec[0]), _rect(rec[1:5]), _rect(rec[5:9]), rec[9], iris))
            except ValueError as exc:
                raise DatasetError(f"{path}:{n}: {exc}") from None
    return rows
