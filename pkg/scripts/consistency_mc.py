#!/usr/bin/env python3
"""Monte-Carlo filter consistency: NEES/NIS against chi-square expectations.

Each run draws a trajectory in a frozen-gravity world at the ECEF anchor,
perturbs the initial state by a draw from P0, adds PSD-level sensor noise,
and accumulates the normalized estimation error squared (15 dof) at every
DVL update plus the normalized innovation squared (3 dof).  A consistent
filter reports mean NEES ~ 15 and mean NIS ~ 3.

    python3 scripts/consistency_mc.py --runs 20
"""

import argparse

import numpy as np

from naikf import simgen
from naikf.dynamics import (
    DvlSample,
    ImuSample,
    NavState,
    build_F,
    build_G,
    discretize,
    gravity_ecef,
)
from naikf.filters import Belief, ikf_propagate, ikf_update
from naikf.geo import (
    GroupElement,
    group_compose,
    group_exp,
    group_inverse,
    group_log,
)

DT = 0.01
EVERY = 100
G_FIX = gravity_ecef(simgen.P0_DEFAULT)
P0_DIAG = np.array([1e-6] * 3 + [1e-2] * 3 + [1.0] * 3
                   + [1e-9] * 3 + [1e-4] * 3)


def one_run(family: str, run_idx: int, master: int, duration: float):
    fam_idx = simgen.FAMILIES.index(family)
    rng = np.random.default_rng(np.random.SeedSequence((master, fam_idx, run_idx)))
    spec = simgen.TrajectorySpec(family=family, seed=0, duration=duration,
                                 gravity=G_FIX)
    gt = simgen.make_ground_truth(spec, rng=rng)
    gyro_c, accel_c = simgen.synthesize_imu(gt)
    n = len(gt.t)
    sig_w, sig_a, sig_d = 1e-6, 1e-2, 5e-2
    Qc = np.diag([sig_w**2] * 3 + [sig_a**2] * 3 + [0.0] * 6)
    bg = rng.normal(size=3) * np.sqrt(P0_DIAG[9])
    ba = rng.normal(size=3) * np.sqrt(P0_DIAG[12])
    gyro_m = gyro_c + bg + rng.normal(size=(n, 3)) * (sig_w / np.sqrt(DT))
    accel_m = accel_c + ba + rng.normal(size=(n, 3)) * (sig_a / np.sqrt(DT))
    idx = np.arange(0, n, EVERY)
    dvl_m = gt.vel[idx] @ gt.rot + rng.normal(size=(len(idx), 3)) * sig_d
    e0 = rng.normal(size=15) * np.sqrt(P0_DIAG)
    X0 = GroupElement(rot=gt.rot.copy(), vel=gt.vel[0].copy(),
                      pos=gt.pos[0].copy())
    bel = Belief(
        state=NavState(pose=group_compose(group_exp(e0[:9]), X0),
                       bias_gyro=bg - e0[9:12], bias_accel=ba - e0[12:15]),
        P=np.diag(P0_DIAG),
    )
    nees, nis = [], []
    for k in range(n):
        if k % EVERY == 0:
            bel, rec = ikf_update(bel, DvlSample(gt.t[k], dvl_m[k // EVERY]),
                                  sig_d**2 * np.eye(3))
            Xt = GroupElement(rot=gt.rot, vel=gt.vel[k], pos=gt.pos[k])
            xi = group_log(group_compose(bel.state.pose, group_inverse(Xt)))
            e = np.concatenate([xi, bg - bel.state.bias_gyro,
                                ba - bel.state.bias_accel])
            nees.append(e @ np.linalg.solve(bel.P, e))
            nis.append(rec.nis)
        if k < n - 1:
            F = build_F(bel.state, gravity=G_FIX)
            G = build_G(bel.state)
            _, Qd = discretize(F, G, Qc, DT)
            bel = ikf_propagate(bel, ImuSample(gt.t[k], gyro_m[k], accel_m[k]),
                                DT, Qd, gravity=G_FIX)
    return np.array(nees), np.array(nis)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=20, help="runs per family")
    ap.add_argument("--families", default="stationary,circular")
    ap.add_argument("--duration", type=float, default=30.0)
    ap.add_argument("--master-seed", type=int, default=9100)
    args = ap.parse_args(argv)

    all_nees, all_nis = [], []
    for family in args.families.split(","):
        for run in range(args.runs):
            ne, ni = one_run(family.strip(), run, args.master_seed,
                             args.duration)
            all_nees.append(ne)
            all_nis.append(ni)
        print(f"{family:>12s}: running mean NEES "
              f"{np.mean(all_nees):6.2f}   NIS {np.mean(all_nis):5.2f}")
    n_pts = sum(len(a) for a in all_nees)
    print(f"\n{n_pts} update epochs total")
    print(f"mean NEES {np.mean(all_nees):.2f}   (15-dof expectation 15.0)")
    print(f"mean NIS  {np.mean(all_nis):.2f}    (3-dof expectation 3.0)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
