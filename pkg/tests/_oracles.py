"""Independent numerical oracles used to freeze expected values.

Everything here is deliberately naive: dense power series, quadrature and
small-step integration, written against the math rather than against the
package implementation.
"""

import numpy as np

from naikf.dynamics import EARTH_RATE
from naikf.geo import GroupElement, group_compose, group_inverse, group_log, so3_wedge


def expm_series(A, terms=30):
    """Plain truncated power series for the matrix exponential."""
    A = np.asarray(A, dtype=float)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms + 1):
        term = term @ A / k
        out = out + term
    return out


def right_jacobian_quadrature(phi, order=60):
    """J_r(phi) = integral_0^1 exp(-s phi^) ds by Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # map [-1, 1] -> [0, 1]
    s_vals = 0.5 * (nodes + 1.0)
    W = so3_wedge(phi)
    out = np.zeros((3, 3))
    for s, w in zip(s_vals, weights):
        out += 0.5 * w * expm_series(-s * W, terms=40)
    return out


def _rot_at(C0, w_body, t):
    """Attitude at time t for constant body rate under Earth rotation.

    Solves Cdot = C w^ - W C exactly: C(t) = exp(-W t) C0 exp(w^ t).
    """
    return expm_series(-so3_wedge(EARTH_RATE) * t, 40) @ C0 @ expm_series(
        so3_wedge(w_body) * t, 40
    )


def integrate_nav(C0, v0, p0, w_body, f_body, g_const, t_end, n_steps):
    """Integrate the strapdown equations with frozen gravity.

    Attitude handled exactly (constant body rate); velocity and position by
    RK4 on the time-varying linear ODE.  Supports negative t_end.
    """
    h = t_end / n_steps
    W = so3_wedge(EARTH_RATE)
    v = np.array(v0, dtype=float)
    p = np.array(p0, dtype=float)

    def vdot(t, v):
        return _rot_at(C0, w_body, t) @ f_body - 2.0 * (W @ v) + g_const

    t = 0.0
    for _ in range(n_steps):
        k1v = vdot(t, v)
        k1p = v
        k2v = vdot(t + h / 2, v + h / 2 * k1v)
        k2p = v + h / 2 * k1v
        k3v = vdot(t + h / 2, v + h / 2 * k2v)
        k3p = v + h / 2 * k2v
        k4v = vdot(t + h, v + h * k3v)
        k4p = v + h * k3v
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        t += h
    return _rot_at(C0, w_body, t_end), v, p


def integrate_nav_general(C0, v0, p0, w_of_t, f_of_t, g_const, t_end, n_steps=8):
    """RK4 on the full (C, v, p) strapdown ODE with time-varying inputs.

    The attitude block is integrated as a plain 3x3 matrix ODE; for the
    short horizons used in Jacobian checks the orthogonality drift is far
    below the tolerances of interest.  Supports negative t_end.
    """
    W = so3_wedge(EARTH_RATE)
    h = t_end / n_steps

    def rate(t, C, v, p):
        Cd = C @ so3_wedge(w_of_t(t)) - W @ C
        vd = C @ f_of_t(t) - 2.0 * (W @ v) + g_const
        return Cd, vd, v

    C = np.array(C0, dtype=float)
    v = np.array(v0, dtype=float)
    p = np.array(p0, dtype=float)
    t = 0.0
    for _ in range(n_steps):
        k1 = rate(t, C, v, p)
        k2 = rate(t + h / 2, C + h / 2 * k1[0], v + h / 2 * k1[1], p + h / 2 * k1[2])
        k3 = rate(t + h / 2, C + h / 2 * k2[0], v + h / 2 * k2[1], p + h / 2 * k2[2])
        k4 = rate(t + h, C + h * k3[0], v + h * k3[1], p + h * k3[2])
        C = C + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        p = p + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        t += h
    return C, v, p


def error_flow_15(est0: GroupElement, dx, gyro_meas, accel_meas, g_const, t_end):
    """Flow the full 15-dof error (group error + bias/noise offsets).

    dx packs (xi_9, dbias_gyro, dbias_accel, noise_gyro, noise_accel,
    rate_bias_gyro, rate_bias_accel), i.e. 27 perturbation channels.  The
    truth starts at exp(-xi^) est0 and is driven by the measured rates minus
    bias and noise offsets, with the bias offsets drifting linearly (the
    white-noise stand-in for the random walk).  Returns the 9-vector group
    error log at t_end; the bias error components evolve trivially as
    dbias + rate * t.
    """
    from naikf.geo import group_exp

    dx = np.asarray(dx, dtype=float)
    xi0 = dx[0:9]
    dbg, dba = dx[9:12], dx[12:15]
    ng, na = dx[15:18], dx[18:21]
    rbg, rba = dx[21:24], dx[24:27]

    true0 = group_compose(group_exp(-xi0), est0)
    Ce, ve, pe = integrate_nav_general(
        est0.rot, est0.vel, est0.pos,
        lambda t: gyro_meas, lambda t: accel_meas, g_const, t_end,
    )
    Ct, vt, pt = integrate_nav_general(
        true0.rot, true0.vel, true0.pos,
        lambda t: gyro_meas - dbg - ng - rbg * t,
        lambda t: accel_meas - dba - na - rba * t,
        g_const, t_end,
    )
    eta = group_compose(
        GroupElement(Ce, ve, pe), group_inverse(GroupElement(Ct, vt, pt))
    )
    return group_log(eta)


def numerical_F_G(est0, gyro_meas, accel_meas, g_const, h=1e-3, eps=1e-5):
    """Central-difference estimate of the 15x15 F and 15x12 G blocks.

    Differentiates the nonlinear invariant-error flow in both the
    perturbation and time directions, which cancels the leading
    discretization terms.
    """
    def flow_jac(t_end):
        M = np.zeros((9, 27))
        for j in range(27):
            dp = np.zeros(27)
            dp[j] = eps
            plus = error_flow_15(est0, dp, gyro_meas, accel_meas, g_const, t_end)
            minus = error_flow_15(est0, -dp, gyro_meas, accel_meas, g_const, t_end)
            M[:, j] = (plus - minus) / (2.0 * eps)
        return M

    Mp = flow_jac(h)
    Mm = flow_jac(-h)
    D = (Mp - Mm) / (2.0 * h)  # 9 x 27 rate sensitivities of the group error

    F = np.zeros((15, 15))
    F[:9, :15] = D[:, 0:15]
    # bias rows of F are zero (random-walk model)
    G = np.zeros((15, 12))
    G[:9, 0:3] = D[:, 15:18]
    G[:9, 3:6] = D[:, 18:21]
    # bias errors integrate their driving noise directly
    G[9:12, 6:9] = np.eye(3)
    G[12:15, 9:12] = np.eye(3)
    return F, G


def invariant_error_flow(
    est0: GroupElement,
    xi0,
    dbias_gyro,
    dbias_accel,
    gyro_meas,
    accel_meas,
    extra_gyro_noise,
    extra_accel_noise,
    g_const,
    t_end,
    n_steps=64,
):
    """Flow the right-invariant error through the nonlinear dynamics.

    The true state starts at exp(-xi0^) est0 and is driven by the measured
    rates minus the true biases (bias_hat + dbias) minus white-noise stand-ins
    held constant; the estimate is driven by the measured rates (bias_hat
    folded into gyro_meas/accel_meas upstream).  Returns the 9-vector
    log(est_t true_t^-1) at t_end.
    """
    from naikf.geo import group_exp, vec9_wedge  # local import to keep header light

    true0 = group_compose(group_exp(-np.asarray(xi0, dtype=float)), est0)
    Ce, ve, pe = integrate_nav(
        est0.rot, est0.vel, est0.pos, gyro_meas, accel_meas, g_const, t_end, n_steps
    )
    w_true = gyro_meas - dbias_gyro - extra_gyro_noise
    f_true = accel_meas - dbias_accel - extra_accel_noise
    Ct, vt, pt = integrate_nav(
        true0.rot, true0.vel, true0.pos, w_true, f_true, g_const, t_end, n_steps
    )
    eta = group_compose(
        GroupElement(Ce, ve, pe), group_inverse(GroupElement(Ct, vt, pt))
    )
    return group_log(eta)


# --------------------------------------------------------- network oracles

def conv1d_naive(x, kernel, bias):
    """Triple-loop cross-correlation with zero padding, for oracle checks."""
    B, Cin, W = x.shape
    Cout, _, K = kernel.shape
    pad = K // 2
    out = np.zeros((B, Cout, W))
    for b in range(B):
        for o in range(Cout):
            for w in range(W):
                acc = bias[o]
                for c in range(Cin):
                    for t in range(K):
                        src = w + t - pad
                        if 0 <= src < W:
                            acc += kernel[o, c, t] * x[b, c, src]
                out[b, o, w] = acc
    return out


def network_gradcheck(w64, x64, y64, loss_fn, picks_per_tensor=3, h=1e-4,
                      seed=42, denom_floor=1e-6):
    """Central-difference check of every trainable tensor at a smooth point.

    LeakyReLU makes the loss piecewise smooth; a probe is only valid when
    the activation sign pattern is identical at w, w+h and w-h, so probes
    that cross a kink are redrawn.  Returns (worst_rel, n_checked,
    n_skipped).  The denominator floor keeps exactly-zero gradients (conv
    biases cancelled by the following batch norm) from reading as noise.
    """
    from naikf.neural import network_backward, network_forward_cached

    def evaluate():
        pred, caches = network_forward_cached(
            x64, w64, mode="train", rng=np.random.default_rng(5))
        value, grad = loss_fn(pred, y64)
        masks = [c[2][0] for c in caches if c[0] == "relu"]
        return value, caches, grad, masks

    _, caches, grad, base_masks = evaluate()
    from naikf.neural import TRAINABLE
    grads = network_backward(caches, w64, grad)

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = skipped = 0
    for name in TRAINABLE:
        arr = w64.tensors[name]
        done = tries = 0
        while done < picks_per_tensor and tries < 10 * picks_per_tensor:
            tries += 1
            idx = tuple(rng.integers(0, s) for s in arr.shape)
            keep = arr[idx]
            arr[idx] = keep + h
            vp, _, _, mp = evaluate()
            arr[idx] = keep - h
            vm, _, _, mm = evaluate()
            arr[idx] = keep
            stable = all(
                np.array_equal(a, b) and np.array_equal(a, c)
                for a, b, c in zip(base_masks, mp, mm)
            )
            if not stable:
                skipped += 1
                continue
            fd = (vp - vm) / (2.0 * h)
            an = grads[name][idx]
            rel = abs(fd - an) / max(abs(fd), abs(an), denom_floor)
            worst = max(worst, rel)
            done += 1
            checked += 1
    return worst, checked, skipped
