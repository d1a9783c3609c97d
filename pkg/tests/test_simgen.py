"""Per-family trajectory identities, windowing, and dataset disk round trip."""

import numpy as np
import pytest

from naikf.dynamics import ImuSample, NavState, gravity_ecef, strapdown_step
from naikf.geo import GroupElement
from naikf.simgen import (
    FAMILIES,
    P0_DEFAULT,
    REGIMES,
    TrajectorySpec,
    UnknownFamily,
    add_noise,
    build_dataset,
    load_dataset,
    make_ground_truth,
    realize,
    synthesize_imu,
    window_count,
    windows_from_realizations,
    write_dataset,
)

DESK_P0 = np.array([12.0, -7.0, 9.0])
G_FIX = gravity_ecef(P0_DEFAULT)


def _gt(family, seed=11, **kw):
    return make_ground_truth(TrajectorySpec(family=family, seed=seed, **kw))


# ------------------------------------------------------ family identities

def test_regime_table():
    pairs = [(r.sigma_accel, r.sigma_gyro) for r in REGIMES]
    assert pairs == [(5e-1, 1e-4), (1e-1, 1e-5), (5e-2, 1e-6), (1e-2, 1e-7)]
    assert len({r.label for r in REGIMES}) == 4


def test_unknown_family_raises():
    with pytest.raises(UnknownFamily):
        _gt("warp_drive")
    with pytest.raises(UnknownFamily):
        realize("warp_drive", 0, 1)


def test_stationary_profile():
    gt = _gt("stationary")
    assert gt.vel.shape == (6000, 3)
    np.testing.assert_array_equal(gt.vel, 0.0)
    assert np.abs(gt.pos - gt.pos[0]).max() == 0.0
    gyro, accel = synthesize_imu(gt)
    # constant specific force whose norm is local gravity magnitude
    assert np.abs(accel - accel[0]).max() < 1e-12
    assert 9.7 < np.linalg.norm(accel[0]) < 9.9
    # body rate is the Earth rate seen in the body frame
    np.testing.assert_allclose(np.linalg.norm(gyro, axis=1), 7.292115e-5, atol=1e-9)


def test_straight_const_profile():
    gt = _gt("straight_const")
    assert np.abs(gt.vel - gt.vel[0]).max() < 1e-12
    assert np.linalg.norm(gt.vel[0]) <= 5.0


def test_straight_accel_profile():
    gt = _gt("straight_accel")
    dv = np.diff(gt.vel, axis=0)
    np.testing.assert_allclose(np.linalg.norm(dv, axis=1), 0.1 * 0.01, atol=1e-12)
    assert np.abs(dv - dv[0]).max() < 1e-12


def test_straight_decel_profile():
    gt = _gt("straight_decel")
    speeds = np.linalg.norm(gt.vel, axis=1)
    assert np.all(np.diff(speeds) <= 1e-12)
    assert speeds[-1] < 0.01 * max(speeds[0], 1e-9) + 1e-9


def test_oscillatory_speed_profile():
    gt = _gt("oscillatory_speed", seed=12)
    speeds = np.linalg.norm(gt.vel, axis=1)
    base = speeds[0]  # sin(0)=0 so the first sample is the base speed
    assert speeds.max() <= 1.5 * base + 1e-9
    assert speeds.min() >= 0.5 * base - 1e-9
    # direction never changes
    dirs = gt.vel / np.maximum(speeds, 1e-15)[:, None]
    assert np.abs(dirs - dirs[0]).max() < 1e-9


def test_back_and_forth_profile():
    gt = _gt("back_and_forth", seed=13)
    k = np.arange(4000)
    mask = k % 500 != 0  # exclude the sign-change samples
    np.testing.assert_allclose(gt.vel[k[mask]], gt.vel[k[mask] + 1000], atol=1e-12)
    # speed is bang-bang: zero at crossings, a single magnitude elsewhere
    speeds = np.unique(np.round(np.linalg.norm(gt.vel, axis=1), 9))
    assert len(speeds) <= 2


def test_vertical_osc_profile():
    gt = _gt("vertical_osc")
    u = gt.spec.p0 / np.linalg.norm(gt.spec.p0)
    cross = np.cross(gt.vel, u)
    assert np.abs(cross).max() < 1e-12
    assert np.abs(np.linalg.norm(gt.vel, axis=1)).max() <= 2.0 + 1e-9


def test_spiral_drift_is_line_plus_single_axis():
    gt = _gt("spiral_drift")
    dv = gt.vel - gt.vel[0]
    s = np.linalg.svd(dv, compute_uv=False)
    assert s[1] < 1e-9 * max(1.0, s[0])


def test_velocity_random_walk_clipped():
    gt = _gt("velocity_random_walk", seed=14)
    assert np.linalg.norm(gt.vel, axis=1).max() <= 10.0 + 1e-9


def test_lissajous_zero_mean_velocity():
    gt = _gt("lissajous")
    assert np.linalg.norm(gt.vel.mean(axis=0)) < 1e-10


def test_circular_profile():
    gt = _gt("circular", seed=15)
    speeds = np.linalg.norm(gt.vel, axis=1)
    assert np.ptp(speeds) < 1e-9
    # half a period reverses the velocity
    np.testing.assert_allclose(gt.vel[3000:], -gt.vel[:3000], atol=1e-9)


def test_sinusoidal_path_profile():
    gt = _gt("sinusoidal_path", seed=16)
    d = gt.vel[0] / np.linalg.norm(gt.vel[0])
    along = gt.vel @ d
    np.testing.assert_allclose(along, along[0], atol=1e-9)


def test_position_is_first_order_integral():
    gt = _gt("circular")
    k = 137
    expect = gt.spec.p0 + 0.01 * gt.vel[:k].sum(axis=0)
    np.testing.assert_allclose(gt.pos[k], expect, atol=1e-9)


# ------------------------------------------------------- IMU re-integration

@pytest.mark.parametrize("family", ["circular", "spiral_drift", "vertical_osc"])
def test_strapdown_reintegrates_ground_truth(family):
    gt = _gt(family, seed=21, duration=20.0)
    gyro, accel = synthesize_imu(gt)
    s = NavState(pose=GroupElement(rot=gt.rot.copy(), vel=gt.vel[0].copy(),
                                   pos=gt.pos[0].copy()))
    for k in range(len(gt.t) - 1):
        s = strapdown_step(s, ImuSample(gt.t[k], gyro[k], accel[k]), gt.spec.dt)
    assert np.linalg.norm(s.pos - gt.pos[-1]) < 1e-2
    assert np.linalg.norm(s.vel - gt.vel[-1]) < 1e-3


def test_strapdown_reintegrates_frozen_gravity_world():
    gt = _gt("circular", seed=22, duration=20.0, p0=DESK_P0, gravity=G_FIX)
    gyro, accel = synthesize_imu(gt)
    s = NavState(pose=GroupElement(rot=gt.rot.copy(), vel=gt.vel[0].copy(),
                                   pos=gt.pos[0].copy()))
    for k in range(len(gt.t) - 1):
        s = strapdown_step(s, ImuSample(gt.t[k], gyro[k], accel[k]),
                           gt.spec.dt, gravity=G_FIX)
    assert np.linalg.norm(s.pos - gt.pos[-1]) < 1e-2


# ------------------------------------------------------------ realizations

def test_realize_deterministic():
    a = realize("circular", 1, master_seed=77)
    b = realize("circular", 1, master_seed=77)
    c = realize("circular", 1, master_seed=78)
    np.testing.assert_array_equal(a.gyro, b.gyro)
    np.testing.assert_array_equal(a.dvl_vel, b.dvl_vel)
    np.testing.assert_array_equal(a.gt.pos, b.gt.pos)
    assert not np.array_equal(a.gyro, c.gyro)
    assert a.seed_key == (77, FAMILIES.index("circular"), 1)


def test_realize_noise_levels():
    real = realize("stationary", 0, master_seed=5)
    clean_gyro, clean_accel = synthesize_imu(real.gt)
    assert (real.gyro - clean_gyro).std() == pytest.approx(1e-4 / 0.1, rel=0.05)
    assert (real.accel - clean_accel).std() == pytest.approx(5e-1 / 0.1, rel=0.05)
    # DVL: 1 Hz samples of body velocity, sigma_dvl/sqrt(1 s)
    np.testing.assert_array_equal(real.dvl_t, real.gt.t[::100])
    clean_dvl = real.gt.vel[::100] @ real.gt.rot
    assert (real.dvl_vel - clean_dvl).std() == pytest.approx(5e-2, rel=0.2)


def test_add_noise_scaling():
    zeros = np.zeros((20000, 3))
    rng = np.random.default_rng(0)
    g, a = add_noise(zeros, zeros, REGIMES[2], 0.01, rng)
    assert g.std() == pytest.approx(1e-6 / 0.1, rel=0.03)
    assert a.std() == pytest.approx(5e-2 / 0.1, rel=0.03)


def test_realize_frozen_gravity_metadata():
    real = realize("stationary", 2, master_seed=9, p0=DESK_P0, gravity=G_FIX)
    seg = real.to_segment()
    np.testing.assert_array_equal(seg.meta["gravity"], G_FIX)
    _, accel = synthesize_imu(real.gt)
    np.testing.assert_allclose(np.linalg.norm(accel, axis=1),
                               np.linalg.norm(G_FIX), atol=1e-12)
    ecef = realize("stationary", 2, master_seed=9).to_segment()
    assert "gravity" not in ecef.meta


def test_targets_order_gyro_then_accel():
    real = realize("circular", 3, master_seed=4)
    np.testing.assert_allclose(
        real.targets, [1e-14, 1e-14, 1e-14, 1e-4, 1e-4, 1e-4], rtol=1e-12)


# ---------------------------------------------------------------- windows

def test_window_counts():
    assert window_count(6000, 100, 1) == 5901
    assert window_count(6000, 100, 10) == 591
    assert window_count(100, 100, 10) == 1


def test_windows_content_and_dtype():
    reals = [realize("circular", 1, 50, duration=3.0),
             realize("stationary", 0, 50, duration=3.0)]
    ts = windows_from_realizations(reals, step=10)
    per = window_count(300, 100, 10)
    assert ts.X.shape == (2 * per, 6, 100)
    assert ts.X.dtype == np.float32
    assert ts.y.shape == (2 * per, 6)
    stream = np.concatenate([reals[0].gyro.T, reals[0].accel.T]).astype(np.float32)
    np.testing.assert_array_equal(ts.X[0], stream[:, :100])
    np.testing.assert_array_equal(ts.X[1], stream[:, 10:110])
    np.testing.assert_array_equal(ts.y[0], reals[0].targets)
    np.testing.assert_array_equal(ts.y[-1], reals[1].targets)
    np.testing.assert_array_equal(np.unique(ts.group), [0, 1])
    assert (ts.group == 0).sum() == per


# ------------------------------------------------------------------- disk

def test_dataset_disk_roundtrip(tmp_path):
    reals = build_dataset(123, families=("circular", "vertical_osc"),
                          regimes=(0, 2), duration=2.0)
    write_dataset(reals, tmp_path)
    back = load_dataset(tmp_path)
    assert len(back) == 4
    for a, b in zip(reals, back):
        assert a.family == b.family
        assert a.regime_idx == b.regime_idx
        assert a.seed_key == b.seed_key
        np.testing.assert_array_equal(a.gyro, b.gyro)
        np.testing.assert_array_equal(a.accel, b.accel)
        np.testing.assert_array_equal(a.dvl_t, b.dvl_t)
        np.testing.assert_array_equal(a.dvl_vel, b.dvl_vel)
        np.testing.assert_array_equal(a.gt.pos, b.gt.pos)
        np.testing.assert_array_equal(a.gt.vel, b.gt.vel)
        np.testing.assert_array_equal(a.gt.rot, b.gt.rot)
        assert b.gt.spec.gravity is None


def test_dataset_roundtrip_keeps_frozen_gravity(tmp_path):
    reals = [realize("circular", 1, 7, duration=2.0, p0=DESK_P0, gravity=G_FIX)]
    write_dataset(reals, tmp_path)
    back = load_dataset(tmp_path)
    np.testing.assert_array_equal(back[0].gt.spec.gravity, G_FIX)


def test_dataset_checksum_tamper_detected(tmp_path):
    reals = [realize("stationary", 0, 7, duration=1.0)]
    write_dataset(reals, tmp_path)
    victim = tmp_path / "imu_stationary_r0.csv"
    text = victim.read_text()
    victim.write_text(text.replace("0", "1", 1))
    with pytest.raises(IOError):
        load_dataset(tmp_path)
    load_dataset(tmp_path, verify=False)  # verification can be waived


def test_build_dataset_full_grid_shape():
    reals = build_dataset(1, duration=0.5)
    assert len(reals) == len(FAMILIES) * len(REGIMES)
    keys = {(r.family, r.regime_idx) for r in reals}
    assert len(keys) == len(reals)
