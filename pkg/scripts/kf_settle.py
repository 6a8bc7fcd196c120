"""Settle time and MSE of the box-constrained Kalman filter against the plain one.

    python scripts/kf_settle.py [--trials 20]
"""

import argparse

import numpy as np

from ocular import synth
from ocular import track as tk


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--fps", type=float, default=30.0)
    a = ap.parse_args()
    model = tk.KfModel.constant_velocity(a.fps)
    box = tk.BoxConstraint.positions(synth.TRACK_X, synth.TRACK_Y)
    print("seed,settle_plain,settle_constrained,mse_plain,mse_constrained")
    for seed in range(a.trials):
        truth, meas, k0 = synth.iris_trajectory(np.random.default_rng(seed))
        _, clean, _ = synth.iris_trajectory(np.random.default_rng(seed), excursion=False)
        z, zc = tk.velocity_measurements(meas), tk.velocity_measurements(clean)
        row, mse = [], []
        for c in (None, box):
            est = tk.filter_series(model, z, c)[:, :2]
            row.append(tk.settle_frame(est, tk.filter_series(model, zc, c)[:, :2], k0 + 10) - k0)
            mse.append(((est - truth) ** 2).mean())
        row += mse
        print(f"{seed},{row[0]},{row[1]},{row[2]:.4f},{row[3]:.4f}")


if __name__ == "__main__":
    main()
