"""Hot fixed-timestep simulation kernels.

Everything in this module is plain scalar/ndarray math so that it can be
compiled with numba's ``@njit``. When numba is unavailable, or when the
environment variable ``HAPTIKIT_DISABLE_NUMBA`` is set to ``1``/``true``,
the same functions run as pure Python/numpy. Both paths execute the
identical source, so results are bit-for-bit equal (no fastmath).

State vector layout used by :func:`run_session_chunk`:

    [theta, omega, sticking, theta_hat_prev, omega_filt, cursor]

Angles are rad, velocities rad/s, torques mNm, cursor px.
"""

from __future__ import annotations

import math
import os

import numpy as np

TWO_PI = 2.0 * math.pi

# Indices into the session state vector.
S_THETA = 0
S_OMEGA = 1
S_STICKING = 2
S_THETA_HAT_PREV = 3
S_OMEGA_FILT = 4
S_CURSOR = 5
STATE_SIZE = 6


def _flag_disables_numba() -> bool:
    return os.environ.get("HAPTIKIT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


NUMBA_ENABLED = False
if not _flag_disables_numba():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dependency normally
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(fn):
        return _njit(cache=True)(fn)
else:
    def _jit(fn):
        return fn


@_jit
def profile_torque(theta, prof_x, prof_y):
    """Breakaway torque at shaft angle theta.

    prof_x must start at 0.0 and end at 2*pi with prof_y[-1] == prof_y[0];
    the profile repeats every shaft revolution. Linear interpolation,
    written out by hand so the jitted and pure paths share one code path.
    """
    xm = theta % TWO_PI
    lo = 0
    hi = prof_x.shape[0] - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prof_x[mid] <= xm:
            lo = mid
        else:
            hi = mid
    span = prof_x[hi] - prof_x[lo]
    t = (xm - prof_x[lo]) / span
    return prof_y[lo] + t * (prof_y[hi] - prof_y[lo])


@_jit
def plant_substep(theta, omega, sticking, tau_cmd, anchor_theta, dt,
                  j_eff, b_eff, k_user, coulomb_ratio, v_dead, theta_lim,
                  prof_x, prof_y):
    """One semi-implicit Euler substep of the shaft dynamics.

    Karnopp stiction: while latched (or inside the velocity dead band) the
    shaft stays put until the net applied torque exceeds the local
    breakaway level; kinetic friction is coulomb_ratio * breakaway plus
    viscous b_eff * omega. Hard stops clamp theta and zero the velocity
    component into the stop. Returns (theta, omega, sticking).
    """
    tau_applied = tau_cmd + k_user * (anchor_theta - theta)
    tau_break = profile_torque(theta, prof_x, prof_y)

    if sticking >= 0.5 or abs(omega) < v_dead:
        if abs(tau_applied) <= tau_break:
            return theta, 0.0, 1.0
        sgn = 1.0 if tau_applied > 0.0 else -1.0
        omega_new = omega + dt * (tau_applied - coulomb_ratio * tau_break * sgn
                                  - b_eff * omega) / j_eff
    else:
        sgn = 1.0 if omega > 0.0 else -1.0
        omega_new = omega + dt * (tau_applied - coulomb_ratio * tau_break * sgn
                                  - b_eff * omega) / j_eff
        if omega_new * omega < 0.0 and abs(tau_applied) <= tau_break:
            # friction alone reversed the motion within one substep: re-latch
            return theta, 0.0, 1.0

    theta_new = theta + dt * omega_new
    if theta_new > theta_lim:
        theta_new = theta_lim
        if omega_new > 0.0:
            omega_new = 0.0
    elif theta_new < -theta_lim:
        theta_new = -theta_lim
        if omega_new < 0.0:
            omega_new = 0.0
    return theta_new, omega_new, 0.0


@_jit
def controller_core(theta_hat, theta_hat_prev, omega_filt, k_stiff, b_damp,
                    center, tau_limit, alpha, dt_ctrl):
    """Impedance law on the measured angle; returns (tau, omega_filt, saturated).

    Velocity is a backward difference of the measured angle run through a
    first-order low pass (pole set by alpha). theta_hat_prev == nan marks
    the first sample, where the velocity estimate starts at zero.
    """
    if theta_hat_prev == theta_hat_prev:  # not nan
        vel = (theta_hat - theta_hat_prev) / dt_ctrl
    else:
        vel = 0.0
    omega_new = omega_filt + alpha * (vel - omega_filt)
    tau = -k_stiff * (theta_hat - center) - b_damp * omega_new
    saturated = 0.0
    if tau > tau_limit:
        tau = tau_limit
        saturated = 1.0
    elif tau < -tau_limit:
        tau = -tau_limit
        saturated = 1.0
    return tau, omega_new, saturated


@_jit
def run_closed_loop(theta0, omega0, sticking0, tau_ext, substeps, dt_ctrl,
                    j_eff, b_eff, k_user, anchor_theta, coulomb_ratio, v_dead,
                    theta_lim, prof_x, prof_y, quantum,
                    k_stiff, b_damp, center, tau_limit, alpha):
    """Closed-loop run: impedance controller at 1/dt_ctrl plus external torque.

    Per control tick k the encoder is sampled, the controller output is
    computed from that sample, and tau_cmd + tau_ext[k] is held (ZOH) over
    `substeps` plant substeps. Records the measured and true angle at the
    start of each tick. Returns (theta_hat, theta_true, tau_cmd, sat_count,
    theta, omega, sticking).
    """
    n = tau_ext.shape[0]
    th_hat_arr = np.empty(n)
    th_true_arr = np.empty(n)
    tau_cmd_arr = np.empty(n)
    theta = theta0
    omega = omega0
    sticking = sticking0
    theta_hat_prev = np.nan
    omega_filt = 0.0
    sat_count = 0
    dt_sub = dt_ctrl / substeps
    for k in range(n):
        theta_hat = np.floor(theta / quantum) * quantum
        tau_cmd, omega_filt, saturated = controller_core(
            theta_hat, theta_hat_prev, omega_filt, k_stiff, b_damp, center,
            tau_limit, alpha, dt_ctrl)
        theta_hat_prev = theta_hat
        if saturated > 0.5:
            sat_count += 1
        th_hat_arr[k] = theta_hat
        th_true_arr[k] = theta
        tau_cmd_arr[k] = tau_cmd
        tau_tick = tau_cmd + tau_ext[k]
        for _ in range(substeps):
            theta, omega, sticking = plant_substep(
                theta, omega, sticking, tau_tick, anchor_theta, dt_sub,
                j_eff, b_eff, k_user, coulomb_ratio, v_dead, theta_lim,
                prof_x, prof_y)
    return th_hat_arr, th_true_arr, tau_cmd_arr, sat_count, theta, omega, sticking


@_jit
def run_friction_ramp(theta0, ramp_rate, tau_limit, substeps, dt_ctrl,
                      j_eff, b_eff, coulomb_ratio, v_dead, theta_lim,
                      prof_x, prof_y, quantum):
    """Torque ramp from rest until the encoder count first changes.

    Returns the commanded torque at the tick where motion was detected,
    or nan when the ramp reaches tau_limit without producing motion.
    """
    counts0 = np.floor(theta0 / quantum)
    theta = theta0
    omega = 0.0
    sticking = 1.0
    dt_sub = dt_ctrl / substeps
    k = 0
    while True:
        k += 1
        tau = ramp_rate * k * dt_ctrl
        if tau > tau_limit:
            return np.nan
        for _ in range(substeps):
            theta, omega, sticking = plant_substep(
                theta, omega, sticking, tau, 0.0, dt_sub,
                j_eff, b_eff, 0.0, coulomb_ratio, v_dead, theta_lim,
                prof_x, prof_y)
        if np.floor(theta / quantum) != counts0:
            return tau


@_jit
def run_session_chunk(state, n_ticks, anchor_theta, dt_ctrl, substeps,
                      j_eff, b_eff, k_user, coulomb_ratio, v_dead, theta_lim,
                      prof_x, prof_y, quantum,
                      k_stiff, b_damp, center, tau_limit, alpha,
                      defl_gain, rate_gain, deadzone, screen_width,
                      cursor_out):
    """Advance the interactive loop n_ticks with a held operator anchor.

    Each tick runs the overlay controller, `substeps` plant substeps with
    the fingertip impedance pulled toward anchor_theta, then the rate
    mapping cursor update from the measured deflection defl_gain * theta_hat.
    cursor_out[k] receives the cursor value after tick k. `state` is
    mutated in place.
    """
    theta = state[S_THETA]
    omega = state[S_OMEGA]
    sticking = state[S_STICKING]
    theta_hat_prev = state[S_THETA_HAT_PREV]
    omega_filt = state[S_OMEGA_FILT]
    cursor = state[S_CURSOR]
    dt_sub = dt_ctrl / substeps
    for k in range(n_ticks):
        theta_hat = np.floor(theta / quantum) * quantum
        tau_cmd, omega_filt, _sat = controller_core(
            theta_hat, theta_hat_prev, omega_filt, k_stiff, b_damp, center,
            tau_limit, alpha, dt_ctrl)
        theta_hat_prev = theta_hat
        for _ in range(substeps):
            theta, omega, sticking = plant_substep(
                theta, omega, sticking, tau_cmd, anchor_theta, dt_sub,
                j_eff, b_eff, k_user, coulomb_ratio, v_dead, theta_lim,
                prof_x, prof_y)
        deflection = defl_gain * theta_hat
        if abs(deflection) <= deadzone:
            deflection = 0.0
        cursor = cursor + rate_gain * deflection * dt_ctrl
        if cursor < 0.0:
            cursor = 0.0
        elif cursor > screen_width:
            cursor = screen_width
        cursor_out[k] = cursor
    state[S_THETA] = theta
    state[S_OMEGA] = omega
    state[S_STICKING] = sticking
    state[S_THETA_HAT_PREV] = theta_hat_prev
    state[S_OMEGA_FILT] = omega_filt
    state[S_CURSOR] = cursor
