"""Trajectory simulator and training-set generator.

Velocity profiles are closed-form per family; position integrates them
with the same first-order rule the strapdown step uses, and the IMU
synthesis inverts the navigation equations by forward differences, so a
noise-free re-integration reproduces the ground truth to float precision.
Orientation is held at a random constant per realization.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import Segment
from .dynamics import EARTH_RATE, gravitation_ecef

P0_DEFAULT = np.array([4399229.20, 3068308.93, 3439906.25])

FAMILIES = (
    "stationary",
    "straight_const",
    "straight_accel",
    "straight_decel",
    "oscillatory_speed",
    "back_and_forth",
    "vertical_osc",
    "spiral_drift",
    "velocity_random_walk",
    "lissajous",
    "circular",
    "sinusoidal_path",
)


class UnknownFamily(ValueError):
    pass


@dataclass(frozen=True)
class NoiseRegime:
    """Paired accel/gyro white-noise levels (PSD-level sigma)."""

    sigma_accel: float
    sigma_gyro: float

    @property
    def label(self) -> str:
        return f"a{self.sigma_accel:g}_w{self.sigma_gyro:g}"


REGIMES = (
    NoiseRegime(5e-1, 1e-4),
    NoiseRegime(1e-1, 1e-5),
    NoiseRegime(5e-2, 1e-6),
    NoiseRegime(1e-2, 1e-7),
)


@dataclass(frozen=True)
class TrajectorySpec:
    """Trajectory randomization parameters.

    `gravity` selects the world model: None means full position-dependent
    gravity at the ECEF anchor point, while a fixed 3-vector freezes the
    gravity field (a local-frame world, usable with small `p0`).
    """

    family: str
    seed: int
    duration: float = 60.0
    dt: float = 0.01
    v_base: float = 5.0
    p0: np.ndarray = field(default_factory=lambda: P0_DEFAULT.copy())
    gravity: np.ndarray | None = None


@dataclass(frozen=True)
class GroundTruth:
    spec: TrajectorySpec
    t: np.ndarray        # (N,)
    pos: np.ndarray      # (N, 3)
    vel: np.ndarray      # (N, 3)
    rot: np.ndarray      # (3, 3) constant body-to-ECEF


def _random_rotation(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _perp_unit(rng, d) -> np.ndarray:
    w = rng.normal(size=3)
    w -= (w @ d) * d
    n = np.linalg.norm(w)
    if n < 1e-12:
        return _perp_unit(rng, d)
    return w / n


def velocity_profile(spec: TrajectorySpec, rng):
    """Draw the per-realization randomization and return (profile, R0).

    `profile(t)` evaluates the closed-form velocity at scalar or array t.
    The random-walk family has no closed form and returns a sampled array
    instead (callable on the sample grid only).
    """
    if spec.family not in FAMILIES:
        raise UnknownFamily(f"{spec.family!r} (expected one of {FAMILIES})")
    R0 = _random_rotation(rng)
    d = _unit(rng)                      # initial heading
    speed = rng.uniform(0.0, spec.v_base)
    w = _perp_unit(rng, d)              # lateral axis
    r = _unit(rng)                      # drift axis
    T = spec.duration
    u_radial = spec.p0 / np.linalg.norm(spec.p0)
    fam = spec.family

    if fam == "stationary":
        profile = lambda t: np.zeros(np.shape(t) + (3,)) if np.ndim(t) else np.zeros(3)
    elif fam == "straight_const":
        profile = lambda t: np.multiply.outer(np.ones_like(np.asarray(t, dtype=float)), speed * d)
    elif fam == "straight_accel":
        profile = lambda t: np.multiply.outer(speed + 0.1 * np.asarray(t, dtype=float), d)
    elif fam == "straight_decel":
        profile = lambda t: np.multiply.outer(speed * (1.0 - np.asarray(t, dtype=float) / T), d)
    elif fam == "oscillatory_speed":
        profile = lambda t: np.multiply.outer(
            speed * (1.0 + 0.5 * np.sin(2 * np.pi * np.asarray(t, dtype=float) / T)), d)
    elif fam == "back_and_forth":
        profile = lambda t: np.multiply.outer(
            speed * np.sign(np.sin(2 * np.pi * np.asarray(t, dtype=float) / 10.0)), d)
    elif fam == "vertical_osc":
        profile = lambda t: np.multiply.outer(
            2.0 * np.sin(2 * np.pi * np.asarray(t, dtype=float) / T), u_radial)
    elif fam == "spiral_drift":
        v0 = speed * d
        profile = lambda t: np.multiply.outer(
            np.ones_like(np.asarray(t, dtype=float)), v0
        ) + np.multiply.outer(np.sin(4 * np.pi * np.asarray(t, dtype=float) / T), r)
    elif fam == "velocity_random_walk":
        n = int(round(spec.duration / spec.dt))
        steps = rng.normal(scale=0.05, size=(n, 3))
        v = np.empty((n, 3))
        v[0] = speed * d
        for k in range(1, n):
            v[k] = v[k - 1] + steps[k]
            nv = np.linalg.norm(v[k])
            if nv > 10.0:
                v[k] *= 10.0 / nv
        profile = ("sampled", v)
    elif fam == "lissajous":
        z = np.cross(d, w)
        profile = lambda t: (
            np.multiply.outer(speed * np.sin(2 * np.pi * np.asarray(t, dtype=float) / T), d)
            + np.multiply.outer(speed * np.sin(4 * np.pi * np.asarray(t, dtype=float) / T), w)
            + np.multiply.outer(np.sin(6 * np.pi * np.asarray(t, dtype=float) / T), z)
        )
    elif fam == "circular":
        om = 2 * np.pi / T
        profile = lambda t: speed * (
            np.multiply.outer(np.cos(om * np.asarray(t, dtype=float)), d)
            + np.multiply.outer(np.sin(om * np.asarray(t, dtype=float)), w)
        )
    elif fam == "sinusoidal_path":
        om = 2 * np.pi / T
        profile = lambda t: np.multiply.outer(
            np.ones_like(np.asarray(t, dtype=float)), speed * d
        ) + np.multiply.outer((speed / 2.0) * np.sin(om * np.asarray(t, dtype=float)), w)
    else:  # pragma: no cover
        raise UnknownFamily(fam)
    return profile, R0


def make_ground_truth(spec: TrajectorySpec, rng=None) -> GroundTruth:
    """Sample the velocity profile and integrate position first-order."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    profile, R0 = velocity_profile(spec, rng)
    n = int(round(spec.duration / spec.dt))
    t = np.arange(n) * spec.dt
    vel = profile[1] if isinstance(profile, tuple) else np.asarray(profile(t), dtype=float)
    pos = np.empty((n, 3))
    pos[0] = spec.p0
    np.cumsum(vel[:-1] * spec.dt, axis=0, out=pos[1:])
    pos[1:] += spec.p0
    return GroundTruth(spec=spec, t=t, pos=pos, vel=vel, rot=R0)


def synthesize_imu(gt: GroundTruth):
    """Invert the navigation equations for noise-free specific force and rate.

    The acceleration uses forward differences (the last sample replicates
    its predecessor), gravitation and centripetal/Coriolis terms are
    explicit, and the body rate is the Earth rate seen in the body frame.
    In a frozen-gravity world the centripetal term is folded into the
    fixed gravity vector.
    """
    dt = gt.spec.dt
    vdot = np.empty_like(gt.vel)
    vdot[:-1] = np.diff(gt.vel, axis=0) / dt
    vdot[-1] = vdot[-2]
    coriolis = 2.0 * np.cross(EARTH_RATE, gt.vel)
    if gt.spec.gravity is None:
        centripetal = np.cross(EARTH_RATE, np.cross(EARTH_RATE, gt.pos))
        f_e = vdot - gravitation_ecef(gt.pos) + centripetal + coriolis
    else:
        f_e = vdot - np.asarray(gt.spec.gravity, dtype=float) + coriolis
    accel = f_e @ gt.rot            # R0^T applied row-wise
    gyro = np.tile(gt.rot.T @ EARTH_RATE, (len(gt.t), 1))
    return gyro, accel


def add_noise(gyro, accel, regime: NoiseRegime, dt: float, rng):
    """White noise at the discrete std sigma/sqrt(dt), per axis."""
    g = gyro + rng.normal(size=gyro.shape) * (regime.sigma_gyro / np.sqrt(dt))
    a = accel + rng.normal(size=accel.shape) * (regime.sigma_accel / np.sqrt(dt))
    return g, a


def make_dvl(gt: GroundTruth, sigma_dvl: float, rng, every: int = 100):
    """Body-frame DVL samples every `every` IMU samples (1 Hz at dt=0.01)."""
    idx = np.arange(0, len(gt.t), every)
    v_body = gt.vel[idx] @ gt.rot
    dvl_dt = every * gt.spec.dt
    noisy = v_body + rng.normal(size=v_body.shape) * (sigma_dvl / np.sqrt(dvl_dt))
    return gt.t[idx], noisy


@dataclass
class Realization:
    """One simulated run: ground truth plus noisy sensor streams."""

    family: str
    regime_idx: int
    seed_key: tuple
    gt: GroundTruth
    gyro: np.ndarray
    accel: np.ndarray
    dvl_t: np.ndarray
    dvl_vel: np.ndarray

    @property
    def regime(self) -> NoiseRegime:
        return REGIMES[self.regime_idx]

    @property
    def targets(self) -> np.ndarray:
        """Per-axis injected variances, gyro triplet then accel triplet."""
        r = self.regime
        return np.array([r.sigma_gyro**2] * 3 + [r.sigma_accel**2] * 3)

    def to_segment(self) -> Segment:
        n = len(self.gt.t)
        meta = {"family": self.family, "regime": self.regime_idx,
                "sigma_gyro": self.regime.sigma_gyro,
                "sigma_accel": self.regime.sigma_accel}
        if self.gt.spec.gravity is not None:
            meta["gravity"] = np.asarray(self.gt.spec.gravity, dtype=float)
        return Segment(
            seg_id=f"{self.family}_r{self.regime_idx}",
            imu_t=self.gt.t, gyro=self.gyro, accel=self.accel,
            dvl_t=self.dvl_t, dvl_vel=self.dvl_vel,
            gt_t=self.gt.t, gt_pos=self.gt.pos, gt_vel=self.gt.vel,
            gt_rot=np.broadcast_to(self.gt.rot, (n, 3, 3)).copy(),
            meta=meta,
        )


def realize(family: str, regime_idx: int, master_seed: int,
            duration=60.0, dt=0.01, sigma_dvl=5e-2,
            p0=None, gravity=None) -> Realization:
    """Deterministically generate one (family, regime) realization."""
    if family not in FAMILIES:
        raise UnknownFamily(f"{family!r} (expected one of {FAMILIES})")
    fam_idx = FAMILIES.index(family)
    seq = np.random.SeedSequence((master_seed, fam_idx, regime_idx))
    rng = np.random.default_rng(seq)
    kwargs = {}
    if p0 is not None:
        kwargs["p0"] = np.asarray(p0, dtype=float)
    if gravity is not None:
        kwargs["gravity"] = np.asarray(gravity, dtype=float)
    spec = TrajectorySpec(family=family, seed=0, duration=duration, dt=dt, **kwargs)
    gt = make_ground_truth(spec, rng=rng)
    gyro_clean, accel_clean = synthesize_imu(gt)
    gyro, accel = add_noise(gyro_clean, accel_clean, REGIMES[regime_idx], dt, rng)
    dvl_t, dvl_vel = make_dvl(gt, sigma_dvl, rng)
    return Realization(
        family=family, regime_idx=regime_idx,
        seed_key=(master_seed, fam_idx, regime_idx),
        gt=gt, gyro=gyro, accel=accel, dvl_t=dvl_t, dvl_vel=dvl_vel,
    )


def build_dataset(master_seed: int, families=FAMILIES, regimes=range(len(REGIMES)),
                  duration=60.0, p0=None, gravity=None) -> list[Realization]:
    """The full training corpus: every family under every noise regime."""
    return [
        realize(f, r, master_seed, duration=duration, p0=p0, gravity=gravity)
        for f in families for r in regimes
    ]


# ----------------------------------------------------------------- windows

@dataclass
class TrainingSet:
    """Materialized windows (float32) with per-window variance targets."""

    X: np.ndarray          # (n, 6, width) gyro rows then accel rows
    y: np.ndarray          # (n, 6) per-axis variances, gyro first
    group: np.ndarray      # (n,) realization index per window
    step: int


def window_count(n_samples: int, width: int, step: int) -> int:
    return (n_samples - width) // step + 1


def windows_from_realizations(reals: list[Realization], step: int,
                              width: int = 100) -> TrainingSet:
    xs, ys, gs = [], [], []
    for ridx, real in enumerate(reals):
        stream = np.concatenate([real.gyro.T, real.accel.T]).astype(np.float32)
        n = window_count(stream.shape[1], width, step)
        X = np.empty((n, 6, width), dtype=np.float32)
        for i in range(n):
            X[i] = stream[:, i * step : i * step + width]
        xs.append(X)
        ys.append(np.tile(real.targets, (n, 1)))
        gs.append(np.full(n, ridx))
    return TrainingSet(
        X=np.concatenate(xs), y=np.concatenate(ys).astype(np.float64),
        group=np.concatenate(gs), step=step,
    )


# ------------------------------------------------------------------- disk

_FMT = "%.17g"


def _write_csv(path: Path, header_meta: dict, columns: list[str], data: np.ndarray):
    with open(path, "w") as fh:
        for k, v in header_meta.items():
            fh.write(f"# {k}={v}\n")
        fh.write(",".join(columns) + "\n")
        np.savetxt(fh, data, fmt=_FMT, delimiter=",")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_dataset(reals: list[Realization], out_dir) -> Path:
    """Write realizations as CSV triplets plus a checksum manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for real in reals:
        tag = f"{real.family}_r{real.regime_idx}"
        meta = {
            "family": real.family, "regime": real.regime_idx,
            "sigma_gyro": real.regime.sigma_gyro,
            "sigma_accel": real.regime.sigma_accel,
            "seed_key": ",".join(map(str, real.seed_key)),
            "dt": real.gt.spec.dt,
            "gravity": ("none" if real.gt.spec.gravity is None else
                        ",".join(repr(float(x)) for x in real.gt.spec.gravity)),
        }
        imu_path = out / f"imu_{tag}.csv"
        _write_csv(
            imu_path, meta,
            ["t", "gyro_x", "gyro_y", "gyro_z", "acc_x", "acc_y", "acc_z"],
            np.column_stack([real.gt.t, real.gyro, real.accel]),
        )
        gt_path = out / f"gt_{tag}.csv"
        rot_flat = np.tile(real.gt.rot.reshape(-1), (len(real.gt.t), 1))
        _write_csv(
            gt_path, meta,
            ["t", "px", "py", "pz", "vx", "vy", "vz"] + [f"r{i}{j}" for i in range(3) for j in range(3)],
            np.column_stack([real.gt.t, real.gt.pos, real.gt.vel, rot_flat]),
        )
        dvl_path = out / f"dvl_{tag}.csv"
        _write_csv(dvl_path, meta, ["t", "vb_x", "vb_y", "vb_z"],
                   np.column_stack([real.dvl_t, real.dvl_vel]))
        entries.append({
            "tag": tag, **{k: str(v) for k, v in meta.items()},
            "files": {p.name: _sha256(p) for p in (imu_path, gt_path, dvl_path)},
        })
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"realizations": entries}, indent=2))
    return manifest


def _read_csv(path: Path) -> np.ndarray:
    with open(path) as fh:
        skip = 0
        for line in fh:
            skip += 1
            if not line.startswith("#"):
                break  # column-name row
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def load_dataset(data_dir, verify=True) -> list[Realization]:
    """Read back a written dataset (checksums verified by default)."""
    root = Path(data_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    reals = []
    for entry in manifest["realizations"]:
        if verify:
            for name, digest in entry["files"].items():
                actual = _sha256(root / name)
                if actual != digest:
                    raise IOError(f"checksum mismatch for {name}")
        tag = entry["tag"]
        imu = _read_csv(root / f"imu_{tag}.csv")
        gtd = _read_csv(root / f"gt_{tag}.csv")
        dvl = _read_csv(root / f"dvl_{tag}.csv")
        dt = float(entry["dt"])
        grav_s = entry.get("gravity", "none")
        grav = (None if grav_s == "none" else
                np.array([float(x) for x in grav_s.split(",")]))
        spec = TrajectorySpec(family=entry["family"], seed=0,
                              duration=len(imu) * dt, dt=dt, p0=gtd[0, 1:4].copy(),
                              gravity=grav)
        gt = GroundTruth(spec=spec, t=imu[:, 0], pos=gtd[:, 1:4], vel=gtd[:, 4:7],
                         rot=gtd[0, 7:16].reshape(3, 3))
        reals.append(Realization(
            family=entry["family"], regime_idx=int(entry["regime"]),
            seed_key=tuple(int(x) for x in entry["seed_key"].split(",")),
            gt=gt, gyro=imu[:, 1:4], accel=imu[:, 4:7],
            dvl_t=dvl[:, 0], dvl_vel=dvl[:, 1:4],
        ))
    return reals
