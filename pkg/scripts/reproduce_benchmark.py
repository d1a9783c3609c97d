#!/usr/bin/env python3
"""Headline experiment: train the variance network, then run the RMSE grid.

Generates the 48-realization training set, trains the stride-1 MSE variant,
and evaluates aekf / ar-ikf / nn-ar-ikf on six held-out trajectories under
five test-noise seeds.  Weights are cached next to the output table so
reruns skip training.

    python3 scripts/reproduce_benchmark.py --out-dir results/
    python3 scripts/reproduce_benchmark.py --quick   # ~2 min sanity pass
"""

import argparse
import time
from pathlib import Path

from naikf import bench
from naikf.neural import TrainConfig, train, weights_load, weights_save
from naikf.simgen import build_dataset, windows_from_realizations

TRAIN_MASTER_SEED = 1234
BENCH_MASTER_SEED = 7001


def get_weights(out_dir: Path, quick: bool):
    tag = "quick" if quick else "s1_mse"
    cache = out_dir / f"weights_{tag}.txt"
    if cache.exists():
        print(f"reusing cached weights {cache}")
        return weights_load(cache)
    t0 = time.perf_counter()
    reals = build_dataset(TRAIN_MASTER_SEED)
    step = 50 if quick else 10
    ts = windows_from_realizations(reals, step=step)
    cfg = TrainConfig(loss="mse", epochs=8 if quick else 40,
                      batch_size=64, seed=0, step=step)
    print(f"training on {len(ts.X)} windows (step={step}, "
          f"{cfg.epochs} epochs) ...")
    weights, losses = train(ts.X, ts.y, cfg)
    print(f"loss {losses[0]:.1f} -> {losses[-1]:.1f} "
          f"in {(time.perf_counter() - t0) / 60:.1f} min")
    weights_save(weights, cache)
    return weights


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--quick", action="store_true",
                    help="short training and a reduced grid")
    args = ap.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    weights = get_weights(args.out_dir, args.quick)
    duration = 20.0 if args.quick else 60.0
    seeds = (0, 1) if args.quick else (0, 1, 2, 3, 4)
    segments = bench.heldout_segments(BENCH_MASTER_SEED, duration=duration)
    t0 = time.perf_counter()
    table = bench.benchmark(
        segments, ["aekf", "ar-ikf", "nn-ar-ikf:s1_mse"], seeds=seeds,
        weights_map={"nn-ar-ikf:s1_mse": weights})
    print(table.to_text())
    csv = table.to_csv(args.out_dir / "benchmark.csv")
    print(f"\ncsv -> {csv}   ({time.perf_counter() - t0:.0f}s, "
          f"{len(seeds)} seeds)")
    return 2 if table.any_diverged else 0


if __name__ == "__main__":
    raise SystemExit(main())
