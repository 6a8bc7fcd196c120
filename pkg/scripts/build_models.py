"""Rebuild the bundled models from the synthetic renderers.

    python scripts/build_models.py [--out DIR] [--only cascade|eye]
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from ocular import cascade, corpus, pipelines, synth
from ocular.config import RunConfig

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "ocular" / "models"


def build_cascade(out: Path) -> None:
    rng = np.random.default_rng(0)
    pos = np.stack([synth.face_window(rng) for _ in range(500)])
    t = time.time()
    model, rep = cascade.train_cascade(pos, cascade.scene_miner(synth.training_scene), n_stages=14,
                                       f_target=0.3, max_weak=30, n_neg=500, pool_size=2000,
                                       log=lambda s: print(f"  {s} ({time.time() - t:.0f} s)", flush=True))
    cascade.save(model, out / "face_cascade.txt")
    print(f"face cascade: {len(model.stages)} stages, {rep.negatives_left} negatives left")


def build_eye_models(out: Path) -> None:
    """Eye locator, LBP subspace and both eye-state classifiers from the seed-0 eye corpus.

    The svm runs come last, so the feature subspaces on disk are the ones the
    classifiers were trained against.
    """
    with tempfile.TemporaryDirectory() as tmp:
        ds = corpus.eye_corpus(Path(tmp) / "eyes", seed=0)
        for mode in ("subspace", "lbp"):
            pipelines.train_models(ds, mode, RunConfig(), out)
        pipelines.train_models(ds, "svm", RunConfig(features="pixels"), out)
        pipelines.train_models(ds, "svm", RunConfig(features="lbp"), out)
    for f in out.glob("train_*.csv"):
        f.unlink()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--only", choices=["cascade", "eye"])
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    if args.only in (None, "cascade"):
        build_cascade(args.out)
    if args.only in (None, "eye"):
        build_eye_models(args.out)


if __name__ == "__main__":
    main()
