"""Experiment driver: the full adaptive-filter event loop, RMSE, and tables.

`run_filter` executes the per-measurement loop shared by every variant:
each IMU sample chooses a process-noise term (base, innovation-adapted, or
the neural/innovation blend) and propagates; each DVL sample updates,
feeds the correction buffer, and refreshes the innovation estimate.  The
windowed innovation estimate measures noise accumulated over one DVL
interval, so it is rescaled by dt over that interval before being applied
per propagation step.

Neural inference is open loop in the raw IMU stream, so all windows are
evaluated in batches up front instead of one per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import BlendConfig, InnovBuffer, NoiseParams, clamp_psd, hybrid_Q
from .dataio import RunConfig, Segment, inject_test_noise
from .dynamics import (
    BelowEarthSurface,
    DvlSample,
    ImuSample,
    NavState,
    build_F,
    build_G,
    discretize,
    gravity_ecef,
)
from .filters import (
    Belief,
    CovarianceBlowup,
    SingularInnovationCov,
    ekf_F,
    ekf_G,
    ekf_propagate,
    ekf_update,
    ikf_propagate,
    ikf_update,
)
from .geo import GroupElement
from .neural.network import NetworkWeights, predict_variances
from . import simgen

DIVERGENCE_ERRORS = (CovarianceBlowup, SingularInnovationCov, BelowEarthSurface)

# held-out families for the simulated benchmark (distinct master seed from
# any training corpus makes every realization unseen)
BENCH_FAMILIES = (
    "straight_const", "oscillatory_speed", "back_and_forth",
    "spiral_drift", "lissajous", "circular",
)
DESK_P0 = np.array([12.0, -7.0, 9.0])
DESK_GRAVITY_ANCHOR = simgen.P0_DEFAULT


class MissingWeights(ValueError):
    """A neural variant was requested without trained weights."""


@dataclass
class RunResult:
    """Per-run diagnostics: position error trace, innovations, covariance."""

    seg_id: str
    variant: str
    rmse_pos: float
    pos_err: np.ndarray        # (N,) per-step position error norm [m]
    vel_err: np.ndarray        # (N,) per-step velocity error norm [m/s]
    innovations: np.ndarray    # (M, 3)
    nis: np.ndarray            # (M,)
    cov_trace: np.ndarray      # (N,)
    diverged: bool = False


def variant_label(cfg: RunConfig) -> str:
    if cfg.nn_variant == "none":
        return cfg.filter
    return f"{cfg.filter}:{cfg.nn_variant}"


def rmse_position(est: np.ndarray, gt: np.ndarray) -> float:
    """Root mean square of the pointwise position error norm."""
    est = np.atleast_2d(est)
    gt = np.atleast_2d(gt)
    if est.shape != gt.shape:
        raise ValueError(f"path shapes differ: {est.shape} vs {gt.shape}")
    d = est - gt
    return float(np.sqrt((d * d).sum(axis=1).mean()))


def q_base_diag(cfg: RunConfig) -> np.ndarray:
    """Continuous-time diagonal of the 12 noise inputs from the config."""
    return np.array(
        [cfg.sigma_gyro**2] * 3 + [cfg.sigma_accel**2] * 3
        + [cfg.q_bias_gyro] * 3 + [cfg.q_bias_accel] * 3
    )


def p0_diag(cfg: RunConfig) -> np.ndarray:
    return np.array(
        [cfg.p0_att] * 3 + [cfg.p0_vel] * 3 + [cfg.p0_pos] * 3
        + [cfg.p0_bias_gyro] * 3 + [cfg.p0_bias_accel] * 3
    )


def _nn_window_predictions(seg: Segment, cfg: RunConfig,
                           weights: NetworkWeights) -> np.ndarray:
    """Variance predictions for every stride-aligned window, batched.

    Row i holds the prediction for the window ending at IMU sample
    i*stride + window_imu - 1.
    """
    stream = np.concatenate([seg.gyro.T, seg.accel.T]).astype(np.float32)
    width = cfg.window_imu
    n = stream.shape[1]
    if n < width:
        return np.empty((0, 6))
    wins = np.lib.stride_tricks.sliding_window_view(stream, width, axis=1)
    wins = wins[:, ::cfg.nn_stride].transpose(1, 0, 2)  # (n_win, 6, width)
    out = np.empty((len(wins), 6))
    for start in range(0, len(wins), 256):
        chunk = np.ascontiguousarray(wins[start:start + 256])
        out[start:start + len(chunk)] = predict_variances(chunk, weights)
    return out


def run_filter(seg: Segment, cfg: RunConfig,
               weights: NetworkWeights | None = None) -> RunResult:
    """Run one filter variant over one segment against its ground truth."""
    uses_nn = cfg.filter.startswith("nn-")
    if uses_nn and weights is None:
        raise MissingWeights(f"{cfg.filter} needs trained weights")
    invariant = cfg.filter in ("ar-ikf", "nn-ar-ikf")
    propagate = ikf_propagate if invariant else ekf_propagate
    update = ikf_update if invariant else ekf_update

    gravity = seg.meta.get("gravity")
    dt = seg.imu_dt
    dvl_dt = float(np.median(np.diff(seg.dvl_t))) if len(seg.dvl_t) > 1 else 1.0
    innov_scale = dt / dvl_dt
    R = (cfg.sigma_dvl**2 / dvl_dt) * np.eye(3)
    Qc_base = np.diag(q_base_diag(cfg))
    blend = BlendConfig(lambda_blend=cfg.lambda_blend,
                        q_bias_gyro=cfg.q_bias_gyro,
                        q_bias_accel=cfg.q_bias_accel)
    preds = _nn_window_predictions(seg, cfg, weights) if uses_nn else None

    pose0 = GroupElement(rot=seg.gt_rot[0].copy(), vel=seg.gt_vel[0].copy(),
                         pos=seg.gt_pos[0].copy())
    bel = Belief(state=NavState(pose=pose0), P=np.diag(p0_diag(cfg)))

    n = len(seg.imu_t)
    pos_err = np.zeros(n)
    vel_err = np.zeros(n)
    cov_trace = np.zeros(n)
    cov_trace[0] = float(np.trace(bel.P))
    innovations, nis_log = [], []
    buf = InnovBuffer(cfg.window_dvl)
    q_innov_step = None      # interval estimate rescaled to one IMU step
    prev_P_update = None     # posterior P at the previous DVL update
    phi_interval = np.eye(15)
    diverged = False

    j = int(np.searchsorted(seg.dvl_t, seg.imu_t[0] + dt / 2))  # skip t0 fix
    try:
        for k in range(1, n):
            u = ImuSample(seg.imu_t[k - 1], seg.gyro[k - 1], seg.accel[k - 1])
            s = bel.state
            if invariant:
                F = build_F(s, gravity=gravity)
                G = build_G(s)
            else:
                F = ekf_F(s, u)
                G = ekf_G(s)
            Phi, Qd_base = discretize(F, G, Qc_base, dt)
            phi_interval = Phi @ phi_interval

            alpha = None
            if uses_nn and len(preds) and k - 1 >= cfg.window_imu - 1:
                row = (k - 1 - (cfg.window_imu - 1)) // cfg.nn_stride
                alpha = preds[min(row, len(preds) - 1)]

            if uses_nn and alpha is not None and q_innov_step is not None:
                Qd = hybrid_Q(NoiseParams(q=alpha), q_innov_step, G, blend,
                              dt, Phi)
            elif not uses_nn and q_innov_step is not None:
                Qd = q_innov_step
            else:
                Qd = Qd_base

            bel = propagate(bel, u, dt, Qd, gravity=gravity)
            pos_err[k] = np.linalg.norm(bel.state.pos - seg.gt_pos[k])
            vel_err[k] = np.linalg.norm(bel.state.vel - seg.gt_vel[k])
            cov_trace[k] = float(np.trace(bel.P))

            if j < len(seg.dvl_t) and abs(seg.dvl_t[j] - seg.imu_t[k]) <= dt / 2:
                z = DvlSample(seg.dvl_t[j], seg.dvl_vel[j].copy())
                bel, rec = update(bel, z, R)
                innovations.append(rec.innovation)
                nis_log.append(rec.nis)
                buf.push(rec.correction)
                if buf.full:
                    V = buf.corrections()
                    q_raw = (V.T @ V) / buf.capacity
                    if cfg.adaptive_law == "full" and prev_P_update is not None:
                        q_raw = clamp_psd(
                            q_raw + bel.P
                            - phi_interval @ prev_P_update @ phi_interval.T)
                    q_innov_step = q_raw * innov_scale
                prev_P_update = bel.P
                phi_interval = np.eye(15)
                pos_err[k] = np.linalg.norm(bel.state.pos - seg.gt_pos[k])
                vel_err[k] = np.linalg.norm(bel.state.vel - seg.gt_vel[k])
                j += 1
    except DIVERGENCE_ERRORS:
        diverged = True
        pos_err[k:] = pos_err[k - 1] if k > 0 else 0.0
        vel_err[k:] = vel_err[k - 1] if k > 0 else 0.0
        cov_trace[k:] = cov_trace[k - 1] if k > 0 else 0.0

    rmse = float("inf") if diverged else float(np.sqrt((pos_err**2).mean()))
    return RunResult(
        seg_id=seg.seg_id, variant=variant_label(cfg), rmse_pos=rmse,
        pos_err=pos_err, vel_err=vel_err,
        innovations=(np.array(innovations) if innovations else np.empty((0, 3))),
        nis=np.array(nis_log), cov_trace=cov_trace, diverged=diverged,
    )


# ------------------------------------------------------- simulated segments

def simulate_clean_segment(family: str, seed: int, duration: float = 60.0,
                           dt: float = 0.01, p0=DESK_P0,
                           gravity=None) -> Segment:
    """Noise-free segment in the frozen-gravity desk world.

    IMU streams are exact inversions of the trajectory and DVL samples are
    exact body velocities, so all sensor noise comes from
    `inject_test_noise` and is reproducible per (segment, seed).
    """
    g_fix = np.asarray(gravity, dtype=float) if gravity is not None \
        else gravity_ecef(DESK_GRAVITY_ANCHOR)
    spec = simgen.TrajectorySpec(
        family=family, seed=seed, duration=duration, dt=dt,
        p0=np.asarray(p0, dtype=float), gravity=g_fix)
    gt = simgen.make_ground_truth(spec)
    gyro, accel = simgen.synthesize_imu(gt)
    idx = np.arange(0, len(gt.t), 100)
    dvl_vel = gt.vel[idx] @ gt.rot
    return Segment(
        seg_id=f"{family}_s{seed}",
        imu_t=gt.t, gyro=gyro, accel=accel,
        dvl_t=gt.t[idx], dvl_vel=dvl_vel,
        gt_t=gt.t, gt_pos=gt.pos, gt_vel=gt.vel,
        gt_rot=np.broadcast_to(gt.rot, (len(gt.t), 3, 3)).copy(),
        meta={"family": family, "gravity": g_fix},
    )


def heldout_segments(master_seed: int = 7001, families=BENCH_FAMILIES,
                     duration: float = 60.0) -> list[Segment]:
    return [simulate_clean_segment(f, master_seed + i, duration=duration)
            for i, f in enumerate(families)]


# ------------------------------------------------------------------- table

@dataclass
class BenchmarkTable:
    """RMSE grid: one row per segment plus a mean row, one column per variant."""

    variants: list
    seg_ids: list
    cells: np.ndarray          # (n_seg, n_variant, n_seed) position RMSE [m]
    any_diverged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def mean_per_variant(self) -> np.ndarray:
        return self.cells.mean(axis=(0, 2))

    def to_csv(self, path) -> Path:
        path = Path(path)
        mean = self.cells.mean(axis=2)
        std = self.cells.std(axis=2)
        lines = ["segment," + ",".join(
            f"{v}_mean,{v}_std" for v in self.variants)]
        for i, seg in enumerate(self.seg_ids):
            vals = [f"{mean[i, jv]:.6f},{std[i, jv]:.6f}"
                    for jv in range(len(self.variants))]
            lines.append(seg + "," + ",".join(vals))
        overall = self.cells.mean(axis=(0, 2))
        ostd = self.cells.mean(axis=0).std(axis=1)
        lines.append("mean," + ",".join(
            f"{overall[jv]:.6f},{ostd[jv]:.6f}" for jv in range(len(self.variants))))
        path.write_text("\n".join(lines) + "\n")
        return path

    def to_text(self) -> str:
        mean = self.cells.mean(axis=2)
        std = self.cells.std(axis=2)
        w0 = max(len("segment"), *(len(s) for s in self.seg_ids), len("mean"))
        wc = max(18, *(len(v) for v in self.variants))
        head = "segment".ljust(w0) + "".join(v.rjust(wc + 2) for v in self.variants)
        rows = [head, "-" * len(head)]
        for i, seg in enumerate(self.seg_ids):
            cells = "".join(
                f"{mean[i, jv]:.3f}±{std[i, jv]:.3f}".rjust(wc + 2)
                for jv in range(len(self.variants)))
            rows.append(seg.ljust(w0) + cells)
        overall = self.cells.mean(axis=(0, 2))
        ostd = self.cells.mean(axis=0).std(axis=1)
        rows.append("-" * len(head))
        rows.append("mean".ljust(w0) + "".join(
            f"{overall[jv]:.3f}±{ostd[jv]:.3f}".rjust(wc + 2)
            for jv in range(len(self.variants))))
        return "\n".join(rows)


def _cfg_for(variant: str, base: RunConfig | None) -> RunConfig:
    filt, _, nn = variant.partition(":")
    kwargs = {} if base is None else {
        k: getattr(base, k) for k in RunConfig.__dataclass_fields__}
    kwargs["filter"] = filt
    kwargs["nn_variant"] = nn or "none"
    return RunConfig(**kwargs)


def benchmark(segments: list, variants: list, seeds=(0, 1, 2, 3, 4),
              weights_map: dict | None = None,
              base_cfg: RunConfig | None = None) -> BenchmarkTable:
    """Full grid: every variant on every segment under every noise seed.

    `variants` entries are "filter" or "filter:nn_variant" labels; neural
    variants look up their weights in `weights_map` by the same label.
    Sensor noise is injected fresh per (segment, seed) at the config noise
    levels, so clean simulated segments and real segments share a protocol.
    """
    if not variants:
        raise ValueError("no variants requested")
    if not segments:
        raise ValueError("no segments provided")
    weights_map = weights_map or {}
    cfgs = {v: _cfg_for(v, base_cfg) for v in variants}
    for v, cfg in cfgs.items():
        if cfg.filter.startswith("nn-") and v not in weights_map:
            raise MissingWeights(f"variant {v} has no entry in weights_map")

    cells = np.empty((len(segments), len(variants), len(seeds)))
    any_diverged = False
    for i, seg in enumerate(segments):
        for js, seed in enumerate(seeds):
            noisy = inject_test_noise(
                seg, seed,
                sigma_gyro=cfgs[variants[0]].sigma_gyro,
                sigma_accel=cfgs[variants[0]].sigma_accel,
                sigma_dvl=cfgs[variants[0]].sigma_dvl)
            for jv, v in enumerate(variants):
                res = run_filter(noisy, cfgs[v], weights_map.get(v))
                cells[i, jv, js] = res.rmse_pos
                any_diverged |= res.diverged
    return BenchmarkTable(
        variants=list(variants), seg_ids=[s.seg_id for s in segments],
        cells=cells, any_diverged=any_diverged,
        meta={"seeds": list(seeds)},
    )
