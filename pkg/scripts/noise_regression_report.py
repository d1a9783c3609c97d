#!/usr/bin/env python3
"""Per-regime report of predicted vs true sensor noise variances.

Trains (or loads) the variance network, predicts on windows from a held-out
master seed, and prints mean predicted gyro/accel variances per noise
regime next to the true values — the calibration view behind the adaptive
filter's neural term.

    python3 scripts/noise_regression_report.py --weights results/weights_s1_mse.txt
    python3 scripts/noise_regression_report.py --quick
"""

import argparse
import time
from pathlib import Path

import numpy as np

from naikf.neural import TrainConfig, predict_variances, train, weights_load
from naikf.simgen import REGIMES, build_dataset, windows_from_realizations

TRAIN_MASTER_SEED = 1234
HELDOUT_MASTER_SEED = 4321


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weights", type=Path,
                    help="reuse saved weights instead of training")
    ap.add_argument("--quick", action="store_true",
                    help="train briefly (8 epochs, step 50)")
    ap.add_argument("--step", type=int, default=100,
                    help="window stride for the held-out evaluation")
    args = ap.parse_args(argv)

    if args.weights:
        weights = weights_load(args.weights)
        print(f"loaded {args.weights}")
    else:
        t0 = time.perf_counter()
        reals = build_dataset(TRAIN_MASTER_SEED)
        step = 50 if args.quick else 10
        ts = windows_from_realizations(reals, step=step)
        cfg = TrainConfig(loss="mse", epochs=8 if args.quick else 40,
                          batch_size=64, seed=0, step=step)
        print(f"training on {len(ts.X)} windows ...")
        weights, losses = train(ts.X, ts.y, cfg)
        print(f"loss {losses[0]:.1f} -> {losses[-1]:.1f} "
              f"({(time.perf_counter() - t0) / 60:.1f} min)")

    held = build_dataset(HELDOUT_MASTER_SEED)
    hs = windows_from_realizations(held, step=args.step)
    preds = np.empty((len(hs.X), 6))
    for s in range(0, len(hs.X), 256):
        preds[s:s + 256] = predict_variances(hs.X[s:s + 256], weights)
    win_reg = np.array([r.regime_idx for r in held])[hs.group]

    print(f"\n{len(hs.X)} held-out windows (master seed "
          f"{HELDOUT_MASTER_SEED}, stride {args.step})")
    print(f"{'regime':>6} {'pred gyro':>12} {'true gyro':>12} "
          f"{'pred accel':>12} {'true accel':>12}")
    for r, regime in enumerate(REGIMES):
        m = preds[win_reg == r]
        print(f"{r:>6} {m[:, :3].mean():>12.3e} {regime.sigma_gyro**2:>12.1e} "
              f"{m[:, 3:].mean():>12.3e} {regime.sigma_accel**2:>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
