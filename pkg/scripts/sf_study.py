"""Face-detection time and accuracy against the downsampling scale factor.

    python scripts/sf_study.py [--scenes 20] [--seed 0]
"""

import argparse
import time

import numpy as np

from ocular import cascade, synth
from ocular.imgcore import Rect
from ocular.resources import face_cascade


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sf", type=float, nargs="+", default=[1, 2, 3, 4, 5, 6])
    a = ap.parse_args()
    model = face_cascade()
    rng = np.random.default_rng(a.seed)
    scenes = [synth.face_scene(rng, 320, 240, int(rng.integers(100, 140))) for _ in range(a.scenes)]
    print("sf,seconds_per_frame,hit_rate,mean_iou")
    for sf in a.sf:
        t0 = time.perf_counter()
        res = [cascade.detect_downsampled(img, model, sf) for img, _ in scenes]
        dt = (time.perf_counter() - t0) / len(scenes)
        ious = [0.0 if r is None else r.face.rect.iou(Rect(x, y, s, s)) for r, (_, (x, y, s)) in zip(res, scenes)]
        print(f"{sf:g},{dt:.4f},{np.mean(np.array(ious) >= 0.5):.3f},{np.mean(ious):.3f}")


if __name__ == "__main__":
    main()
