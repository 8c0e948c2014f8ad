import math

import pytest
from hypothesis import given, settings, strategies as st

from haptikit.controller import (ControllerState, ImpedanceConfig,
                                 control_step, make_controller_state,
                                 overlay_for_condition)
from haptikit.device import DeviceParams, shaft_to_triggers


@pytest.fixture
def params():
    return DeviceParams()


def test_equilibrium_zero_torque(params):
    cfg = ImpedanceConfig(stiffness_K=5.0)
    tau, _ = control_step(cfg, 0, make_controller_state(params))
    assert tau == 0.0


def test_linear_spring_law(params):
    # K = 2 mNm/rad (the inverse of the 0.5 rad/mNm flat band); offset the
    # center so the measured displacement is exactly 0.5 rad
    state = make_controller_state(params)
    counts = 500
    theta_hat = counts * state.quantum
    cfg = ImpedanceConfig(stiffness_K=2.0, center=theta_hat - 0.5)
    tau, _ = control_step(cfg, counts, state)
    assert tau == pytest.approx(-1.0, rel=1e-12)


def test_saturation_clamps_exactly(params):
    cfg = ImpedanceConfig(stiffness_K=1e6, torque_limit=32.3)
    tau, state = control_step(cfg, 2000, make_controller_state(params))
    assert tau == -32.3 and state.saturated
    tau, state = control_step(cfg, -2000, state)
    assert tau == 32.3 and state.saturated


def test_zero_impedance_transparency(params):
    cfg = ImpedanceConfig(stiffness_K=0.0, damping_B=0.0)
    state = make_controller_state(params)
    for counts in (0, 100, -414, 2000, 3, -1):
        tau, state = control_step(cfg, counts, state)
        assert tau == 0.0


@given(counts=st.integers(-1500, 1500))
def test_restoring_sign(counts):
    params = DeviceParams()
    cfg = ImpedanceConfig(stiffness_K=3.0)
    tau, _ = control_step(cfg, counts, make_controller_state(params))
    theta_hat = counts * params.encoder_quantum
    if tau != 0.0:
        assert math.copysign(1.0, tau) == -math.copysign(1.0, theta_hat)


def test_linearity_below_saturation(params):
    state = make_controller_state(params)
    cfg = ImpedanceConfig(stiffness_K=4.0)
    tau1, _ = control_step(cfg, 100, state)
    tau2, _ = control_step(cfg, 200, state)
    assert tau2 == pytest.approx(2.0 * tau1, rel=1e-12)


def test_velocity_filter_dc_gain(params):
    # constant-velocity encoder ramp: the filtered estimate converges to the
    # true velocity within 1% after 5 time constants (tau = 1/(2*pi*fc))
    cfg = ImpedanceConfig(stiffness_K=0.0, damping_B=1.0,
                          velocity_filter_cutoff=50.0)
    state = make_controller_state(params)
    # a whole number of counts per loop period, so the backward difference
    # sees the true velocity without quantization ripple
    omega_true = 10 * state.quantum / cfg.dt
    n_steps = int(5.0 / (2 * math.pi * 50.0) / cfg.dt) + 1
    for k in range(n_steps + 1):
        counts = round(omega_true * k * cfg.dt / state.quantum)
        tau, state = control_step(cfg, counts, state)
    assert state.omega_filt == pytest.approx(omega_true, rel=0.01)


def test_overlay_knob():
    cfg = overlay_for_condition("knob")
    assert cfg.stiffness_K == 7.5
    assert cfg.center == 0.0


def test_overlay_handheld_conversion():
    cfg = overlay_for_condition("handheld")
    # 7.4 mNm per mm of trigger travel; torque per shaft radian via r
    assert cfg.stiffness_K == pytest.approx(7.4 * 3.02, rel=1e-12)
    assert cfg.trigger_stiffness_raw == 7.4


def test_overlay_handheld_center_is_midstroke():
    cfg = overlay_for_condition("handheld")
    pose = shaft_to_triggers(DeviceParams(), cfg.center)
    assert pose.x_upper == 7.5 and pose.x_lower == 7.5


def test_overlay_unknown_condition():
    with pytest.raises(ValueError):
        overlay_for_condition("trackball")


def test_config_validation():
    with pytest.raises(ValueError):
        ImpedanceConfig(stiffness_K=-1.0)
    with pytest.raises(ValueError):
        ImpedanceConfig(stiffness_K=1.0, torque_limit=0.0)


def test_first_sample_velocity_is_zero(params):
    cfg = ImpedanceConfig(stiffness_K=0.0, damping_B=100.0)
    tau, state = control_step(cfg, 500, make_controller_state(params))
    assert tau == 0.0 and state.omega_filt == 0.0
