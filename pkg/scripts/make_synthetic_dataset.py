"""Write a synthetic frame dataset for one of the CLI pipelines.

    python scripts/make_synthetic_dataset.py perclos data/perclos --seed 0
    python scripts/make_synthetic_dataset.py saccade data/saccade --eog
"""

import argparse
from pathlib import Path

from ocular import corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=("perclos", "blank", "eyes", "windows", "spectacles", "saccade"))
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--frames", type=int, help="frame count (perclos, blank, saccade)")
    ap.add_argument("--closed", type=int, help="closed-eye frames in a perclos stream")
    ap.add_argument("--static", action="store_true", help="saccade clip without eye movement")
    ap.add_argument("--eog", action="store_true", help="saccade clip with four steps and a matching EOG file")
    a = ap.parse_args()

    if a.kind == "perclos":
        n = a.frames or 1800
        ds = corpus.perclos_stream(a.out, a.seed, n, closed=a.closed if a.closed is not None else n // 5)
    elif a.kind == "blank":
        ds = corpus.blank_stream(a.out, a.frames or 30)
    elif a.kind == "eyes":
        ds = corpus.eye_corpus(a.out, a.seed)
    elif a.kind == "windows":
        ds = corpus.window_corpus(a.out, a.seed)
    elif a.kind == "spectacles":
        ds = corpus.spectacle_set(a.out, a.seed)
    else:
        steps = corpus.SACCADE_STEPS if a.eog else None
        ds = corpus.saccade_set(a.out, a.seed, static=a.static, steps=steps, n=a.frames or (380 if a.eog else 210),
                                with_eog=a.eog)
    print(f"{a.kind}: {ds.frames} frames at {ds.fps:g} fps in {a.out}")


if __name__ == "__main__":
    main()
