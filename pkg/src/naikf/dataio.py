"""Dataset containers, the sea-trial CSV loader, test-noise injection and
the rolling IMU window used to feed the noise-regression network.

Real recordings arrive as CSV files whose column names vary between
exports, so the loader reads a small key=value mapping config instead of
hard-coding a schema.  Simulated runs use the same Segment container.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .dynamics import geodetic_to_ecef


class MissingSegment(FileNotFoundError):
    """Dataset directory does not contain the expected trajectory segments."""


class SchemaError(ValueError):
    """A required column is absent or malformed in a dataset file."""


@dataclass
class Segment:
    """One trajectory: aligned IMU stream, DVL stream and ground truth."""

    seg_id: str
    imu_t: np.ndarray          # (N,)
    gyro: np.ndarray           # (N, 3) rad/s
    accel: np.ndarray          # (N, 3) m/s^2
    dvl_t: np.ndarray          # (M,)
    dvl_vel: np.ndarray        # (M, 3) body-frame m/s
    gt_t: np.ndarray           # (K,)
    gt_pos: np.ndarray         # (K, 3) ECEF m
    gt_vel: np.ndarray         # (K, 3) ECEF m/s
    gt_rot: np.ndarray         # (K, 3, 3) body-to-ECEF
    meta: dict = field(default_factory=dict)

    @property
    def imu_dt(self) -> float:
        return float(np.median(np.diff(self.imu_t)))


@dataclass
class RunConfig:
    """Configuration for one filter run (shared by CLI and benchmark)."""

    filter: str = "ar-ikf"          # aekf | ar-ikf | nn-aekf | nn-ar-ikf
    nn_variant: str = "none"        # s1_mse | s10_mse | s10_huber | none
    lambda_blend: float = 0.6
    window_dvl: int = 25
    window_imu: int = 100
    nn_stride: int = 1
    adaptive_law: str = "simplified"   # simplified | full
    # base process / measurement noise (continuous-time PSD levels)
    sigma_gyro: float = 1e-4
    sigma_accel: float = 0.4
    sigma_dvl: float = 5e-2
    q_bias_gyro: float = 1e-12
    q_bias_accel: float = 1e-8
    # initial covariance diagonal
    p0_att: float = 1e-4
    p0_vel: float = 1e-2
    p0_pos: float = 1.0
    p0_bias_gyro: float = 1e-8
    p0_bias_accel: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        filters = {"aekf", "ar-ikf", "nn-aekf", "nn-ar-ikf"}
        if self.filter not in filters:
            raise ValueError(f"unknown filter {self.filter!r}")
        variants = {"none", "s1_mse", "s10_mse", "s10_huber"}
        if self.nn_variant not in variants:
            raise ValueError(f"unknown nn_variant {self.nn_variant!r}")
        needs_nn = self.filter.startswith("nn-")
        if needs_nn and self.nn_variant == "none":
            raise ValueError(f"filter {self.filter} requires an nn_variant")
        if not needs_nn and self.nn_variant != "none":
            raise ValueError(f"filter {self.filter} does not take an nn_variant")
        if not (0.0 <= self.lambda_blend <= 1.0):
            raise ValueError("lambda_blend outside [0, 1]")

    @staticmethod
    def from_file(path) -> "RunConfig":
        kwargs = {}
        for key, value in parse_kv_config(path).items():
            if key not in RunConfig.__dataclass_fields__:
                raise ValueError(f"unknown config key {key!r}")
            target = RunConfig.__dataclass_fields__[key].type
            if target in ("float", float):
                kwargs[key] = float(value)
            elif target in ("int", int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = value
        return RunConfig(**kwargs)


def parse_kv_config(path) -> dict:
    """Parse a `key = value` config file; '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ----------------------------------------------------------------- loader

DEFAULT_MAPPING = {
    "imu_file": "{seg}/IMU.csv",
    "dvl_file": "{seg}/DVL.csv",
    "gt_file": "{seg}/GT.csv",
    "imu_time": "time",
    "imu_gyro": "gyro_x,gyro_y,gyro_z",
    "imu_accel": "acc_x,acc_y,acc_z",
    "dvl_time": "time",
    "dvl_vel": "dvl_x,dvl_y,dvl_z",
    "gt_time": "time",
    "gt_frame": "geodetic_ned",          # or "ecef"
    "gt_pos": "lat,lon,alt",             # ecef: x,y,z
    "gt_vel": "vn,ve,vd",                # ecef: vx,vy,vz
    "gt_att": "roll,pitch,yaw",          # ecef: 9 row-major rotation columns
    "angles_deg": "true",
}


def _columns(df: pd.DataFrame, names: str, path) -> np.ndarray:
    cols = [c.strip() for c in names.split(",")]
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing} (have {list(df.columns)})")
    out = df[cols].to_numpy(dtype=float)
    if not np.all(np.isfinite(out)):
        raise SchemaError(f"{path}: non-finite values in columns {cols}")
    return out


def _ned_to_ecef_rot(lat, lon):
    """Rotation taking NED vectors to ECEF at the given geodetic point."""
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    return np.array([
        [-sl * co, -so, -cl * co],
        [-sl * so, co, -cl * so],
        [cl, 0.0, -sl],
    ])


def euler_to_rot(roll, pitch, yaw):
    """ZYX Euler angles to a body-to-reference rotation matrix."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def load_segment(root: Path, seg: str, mapping: dict) -> Segment:
    root = Path(root)
    paths = {k: root / mapping[f"{k}_file"].format(seg=seg) for k in ("imu", "dvl", "gt")}
    for p in paths.values():
        if not p.exists():
            raise MissingSegment(f"missing file {p}")
    frames = {
        k: pd.read_csv(p, comment="#", float_precision="round_trip")
        for k, p in paths.items()
    }

    imu_t = _columns(frames["imu"], mapping["imu_time"], paths["imu"])[:, 0]
    gyro = _columns(frames["imu"], mapping["imu_gyro"], paths["imu"])
    accel = _columns(frames["imu"], mapping["imu_accel"], paths["imu"])
    dvl_t = _columns(frames["dvl"], mapping["dvl_time"], paths["dvl"])[:, 0]
    dvl_vel = _columns(frames["dvl"], mapping["dvl_vel"], paths["dvl"])
    gt_t = _columns(frames["gt"], mapping["gt_time"], paths["gt"])[:, 0]
    pos_raw = _columns(frames["gt"], mapping["gt_pos"], paths["gt"])
    vel_raw = _columns(frames["gt"], mapping["gt_vel"], paths["gt"])
    att_raw = _columns(frames["gt"], mapping["gt_att"], paths["gt"])

    frame = mapping.get("gt_frame", "geodetic_ned")
    if frame == "ecef":
        if att_raw.shape[1] != 9:
            raise SchemaError(f"{paths['gt']}: ecef attitude needs 9 row-major columns")
        gt_pos = pos_raw
        gt_vel = vel_raw
        gt_rot = att_raw.reshape(-1, 3, 3)
    elif frame == "geodetic_ned":
        deg = mapping.get("angles_deg", "true").lower() in ("true", "1", "yes")
        scale = np.pi / 180.0 if deg else 1.0
        lat, lon, alt = pos_raw[:, 0] * scale, pos_raw[:, 1] * scale, pos_raw[:, 2]
        gt_pos = np.stack([geodetic_to_ecef(a, b, c) for a, b, c in zip(lat, lon, alt)])
        gt_vel = np.empty_like(vel_raw)
        gt_rot = np.empty((len(gt_t), 3, 3))
        for i in range(len(gt_t)):
            C_ne = _ned_to_ecef_rot(lat[i], lon[i])
            gt_vel[i] = C_ne @ vel_raw[i]
            gt_rot[i] = C_ne @ euler_to_rot(*(att_raw[i] * scale))
    else:
        raise SchemaError(f"unknown gt_frame {frame!r}")

    for name, t in (("imu", imu_t), ("dvl", dvl_t), ("gt", gt_t)):
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise SchemaError(f"{seg}: non-increasing {name} timestamps")

    return Segment(
        seg_id=seg, imu_t=imu_t, gyro=gyro, accel=accel,
        dvl_t=dvl_t, dvl_vel=dvl_vel,
        gt_t=gt_t, gt_pos=gt_pos, gt_vel=gt_vel, gt_rot=gt_rot,
        meta={"source": str(root)},
    )


def load_akit(root, mapping_file=None, n_expected=12) -> list[Segment]:
    """Load the sea-trial dataset: one Segment per trajectory directory.

    Segment names come from the mapping key `segments` (comma-separated) or
    are discovered as subdirectories.  Raises MissingSegment when fewer than
    `n_expected` segments are found.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingSegment(f"dataset directory {root} not found")
    mapping = dict(DEFAULT_MAPPING)
    if mapping_file is not None:
        mapping.update(parse_kv_config(mapping_file))
    if "segments" in mapping:
        seg_names = [s.strip() for s in mapping["segments"].split(",") if s.strip()]
    else:
        seg_names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if len(seg_names) < n_expected:
        raise MissingSegment(
            f"found {len(seg_names)} segments under {root}, expected {n_expected}"
        )
    return [load_segment(root, s, mapping) for s in seg_names]


# ---------------------------------------------------- test-noise injection

def inject_test_noise(seg: Segment, seed: int, sigma_gyro=1e-4, sigma_accel=0.4,
                      sigma_dvl=5e-2) -> Segment:
    """Add white test noise to the IMU and DVL streams of a segment.

    Noise levels are continuous-time PSD-level sigmas; the per-sample std is
    sigma / sqrt(dt) at each stream's own rate.  The sub-seed is derived
    from (seed, segment id) so different segments draw independent noise.
    """
    sub = zlib.crc32(seg.seg_id.encode())
    rng = np.random.default_rng(np.random.SeedSequence((seed, sub)))
    imu_dt = seg.imu_dt
    dvl_dt = float(np.median(np.diff(seg.dvl_t)))
    gyro = seg.gyro + rng.normal(size=seg.gyro.shape) * (sigma_gyro / np.sqrt(imu_dt))
    accel = seg.accel + rng.normal(size=seg.accel.shape) * (sigma_accel / np.sqrt(imu_dt))
    dvl = seg.dvl_vel + rng.normal(size=seg.dvl_vel.shape) * (sigma_dvl / np.sqrt(dvl_dt))
    return Segment(
        seg_id=seg.seg_id, imu_t=seg.imu_t, gyro=gyro, accel=accel,
        dvl_t=seg.dvl_t, dvl_vel=dvl,
        gt_t=seg.gt_t, gt_pos=seg.gt_pos, gt_vel=seg.gt_vel, gt_rot=seg.gt_rot,
        meta={**seg.meta, "test_noise_seed": seed},
    )


# ----------------------------------------------------------- window stream

class WindowStream:
    """Rolling FIFO of the last `width` IMU samples as a (6, width) window.

    Rows are the three gyro axes then the three accel axes.  `ready` turns
    true once the buffer has filled; before that `window()` raises.
    """

    def __init__(self, width: int = 100):
        self.width = width
        self._buf = np.zeros((6, width))
        self._idx = 0
        self._count = 0

    @property
    def ready(self) -> bool:
        return self._count >= self.width

    def push(self, gyro, accel) -> None:
        self._buf[:3, self._idx] = gyro
        self._buf[3:, self._idx] = accel
        self._idx = (self._idx + 1) % self.width
        self._count += 1

    def window(self) -> np.ndarray:
        if not self.ready:
            raise RuntimeError(f"window not ready ({self._count}/{self.width} samples)")
        return np.concatenate([self._buf[:, self._idx:], self._buf[:, : self._idx]], axis=1)
