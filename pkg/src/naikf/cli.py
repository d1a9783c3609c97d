"""Command-line entry points: `python3 -m naikf.cli <subcommand>`.

Subcommands:
  simulate    generate the trajectory/regime dataset grid and write it to disk
  train       fit the variance-regression network on a generated dataset
  run         run one filter variant over one segment and report RMSE
  benchmark   full variant-by-segment RMSE grid on held-out simulated runs
  dump-banana sample a Gaussian in the tangent space, push it through the
              group exponential, and dump the curved position cloud to CSV
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, simgen
from .dataio import DEFAULT_MAPPING, RunConfig, load_segment, parse_kv_config
from .geo import group_exp
from .neural import TrainConfig, train, weights_load, weights_save
from .simgen import FAMILIES, windows_from_realizations


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _base_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config)
    return RunConfig()


def cmd_simulate(args) -> int:
    families = _csv_list(args.families) if args.families else list(FAMILIES)
    regimes = ([int(r) for r in _csv_list(args.regimes)]
               if args.regimes else range(len(simgen.REGIMES)))
    reals = simgen.build_dataset(args.master_seed, families=families,
                                 regimes=regimes, duration=args.duration)
    out = simgen.write_dataset(reals, args.out)
    print(f"wrote {len(reals)} realizations to {out}")
    return 0


def cmd_train(args) -> int:
    reals = simgen.load_dataset(args.data)
    ts = windows_from_realizations(reals, step=args.step)
    cfg = TrainConfig(loss=args.loss, epochs=args.epochs, lr=args.lr,
                      batch_size=args.batch_size, seed=args.seed,
                      dropout_p=args.dropout, step=args.step)
    weights, losses = train(ts.X, ts.y, cfg)
    weights_save(weights, args.out)
    print(f"trained on {len(ts.X)} windows (step={args.step})")
    for i, lo in enumerate(losses, start=1):
        print(f"epoch {i:3d}  loss {lo:.6f}")
    print(f"weights -> {args.out}")
    return 0


def _run_one(seg, cfg, weights):
    res = bench.run_filter(seg, cfg, weights)
    status = "DIVERGED" if res.diverged else "ok"
    print(f"{res.seg_id:30s} {res.variant:20s} "
          f"rmse_pos {res.rmse_pos:10.3f} m  [{status}]")
    return res


def cmd_run(args) -> int:
    cfg = _base_config(args)
    kwargs = {k: getattr(cfg, k) for k in RunConfig.__dataclass_fields__}
    kwargs["filter"] = args.filter
    if args.weights:
        kwargs["nn_variant"] = args.nn_variant or "s1_mse"
    cfg = RunConfig(**kwargs)
    weights = weights_load(args.weights) if args.weights else None

    if args.segment:
        mapping = dict(DEFAULT_MAPPING)
        if args.mapping:
            mapping.update(parse_kv_config(args.mapping))
        root = Path(args.segment)
        seg = load_segment(root.parent, root.name, mapping)
    else:
        seg = bench.simulate_clean_segment(args.family, args.seed,
                                           duration=args.duration)
        seg = bench.inject_test_noise(seg, args.noise_seed,
                                      sigma_gyro=cfg.sigma_gyro,
                                      sigma_accel=cfg.sigma_accel,
                                      sigma_dvl=cfg.sigma_dvl)
    res = _run_one(seg, cfg, weights)
    return 2 if res.diverged else 0


def cmd_benchmark(args) -> int:
    cfg = _base_config(args)
    variants = _csv_list(args.variants)
    weights_map = {}
    for pair in args.weights or []:
        label, _, path = pair.partition("=")
        if not path:
            raise SystemExit(f"--weights expects LABEL=PATH, got {pair!r}")
        weights_map[label] = weights_load(path)
    families = _csv_list(args.families) if args.families \
        else list(bench.BENCH_FAMILIES)
    segments = bench.heldout_segments(args.master_seed, families=families,
                                      duration=args.duration)
    seeds = [int(s) for s in _csv_list(args.seeds)]
    table = bench.benchmark(segments, variants, seeds=seeds,
                            weights_map=weights_map, base_cfg=cfg)
    print(table.to_text())
    if args.out:
        table.to_csv(args.out)
        print(f"csv -> {args.out}")
    if table.any_diverged:
        print("at least one run diverged", file=sys.stderr)
        return 2
    return 0


def cmd_dump_banana(args) -> int:
    """Positions of exp(xi) for xi ~ N(0, diag): the curved error cloud."""
    rng = np.random.default_rng(args.seed)
    sig = np.array([args.sigma_theta] * 3 + [args.sigma_vel] * 3
                   + [args.sigma_pos] * 3)
    rows = np.empty((args.n, 3))
    for i in range(args.n):
        xi = rng.normal(size=9) * sig
        rows[i] = group_exp(xi).pos
    header = "x,y,z"
    np.savetxt(args.out, rows, delimiter=",", header=header, comments="")
    print(f"{args.n} samples -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="naikf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate and write a dataset grid")
    s.add_argument("--out", required=True)
    s.add_argument("--master-seed", type=int, default=42)
    s.add_argument("--families", default="")
    s.add_argument("--regimes", default="")
    s.add_argument("--duration", type=float, default=60.0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="train the variance network")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--loss", choices=("mse", "huber"), default="mse")
    s.add_argument("--step", type=int, default=10)
    s.add_argument("--epochs", type=int, default=40)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dropout", type=float, default=0.2)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("run", help="run one filter over one segment")
    s.add_argument("--filter", default="ar-ikf",
                   choices=("aekf", "ar-ikf", "nn-aekf", "nn-ar-ikf"))
    s.add_argument("--config")
    s.add_argument("--weights")
    s.add_argument("--nn-variant", default="")
    s.add_argument("--segment", help="directory holding IMU/DVL/GT csv files")
    s.add_argument("--mapping", help="column-mapping config for --segment")
    s.add_argument("--family", default="circular")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-seed", type=int, default=0)
    s.add_argument("--duration", type=float, default=60.0)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("benchmark", help="variant-by-segment RMSE table")
    s.add_argument("--variants", default="aekf,ar-ikf")
    s.add_argument("--config")
    s.add_argument("--weights", action="append",
                   help="LABEL=PATH, repeatable, for nn-* variants")
    s.add_argument("--families", default="")
    s.add_argument("--master-seed", type=int, default=7001)
    s.add_argument("--seeds", default="0,1,2,3,4")
    s.add_argument("--duration", type=float, default=60.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("dump-banana",
                       help="push a tangent Gaussian through exp, dump CSV")
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--sigma-theta", type=float, default=0.3)
    s.add_argument("--sigma-vel", type=float, default=0.1)
    s.add_argument("--sigma-pos", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="banana.csv")
    s.set_defaults(func=cmd_dump_banana)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
