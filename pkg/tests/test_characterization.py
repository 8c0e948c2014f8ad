import math

import numpy as np
import pytest

from haptikit import characterization as ch
from haptikit.controller import ImpedanceConfig
from haptikit.device import DeviceParams, StictionProfile


@pytest.fixture
def overlay():
    return ImpedanceConfig(stiffness_K=2.0)


# -- chirp ---------------------------------------------------------------------

def test_chirp_shape_and_endpoints():
    sig = ch.make_chirp(0.1, 100.0, 30.0, 1.0, 1000.0)
    assert sig.shape == (30000,)
    assert ch.chirp_instantaneous_frequency(0.1, 100.0, 30.0, 0.0) == pytest.approx(0.1)
    assert ch.chirp_instantaneous_frequency(0.1, 100.0, 30.0, 30.0) == pytest.approx(100.0)


def test_chirp_log_sweep_midpoint():
    f_mid = ch.chirp_instantaneous_frequency(0.1, 100.0, 30.0, 15.0)
    assert f_mid == pytest.approx(math.sqrt(0.1 * 100.0), rel=1e-9)  # 3.162 Hz


def test_chirp_rejects_degenerate():
    with pytest.raises(ValueError):
        ch.make_chirp(1.0, 1.0, 10.0, 1.0, 1000.0)
    with pytest.raises(ValueError):
        ch.make_chirp(0.0, 10.0, 10.0, 1.0, 1000.0)
    with pytest.raises(ValueError):
        ch.make_chirp(1.0, 600.0, 10.0, 1.0, 1000.0)


def test_chirp_phase_continuity():
    sig = ch.make_chirp(0.5, 50.0, 10.0, 1.0, 1000.0)
    # amplitude never exceeded, no sample-to-sample jumps beyond the highest
    # instantaneous frequency allows
    assert np.max(np.abs(sig)) <= 1.0 + 1e-12
    max_step = 2 * math.pi * 50.0 / 1000.0  # rad of phase per sample at f1
    assert np.max(np.abs(np.diff(sig))) <= max_step * 1.05


# -- frequency response -----------------------------------------------------------

def _linear_plant(b=0.04):
    return DeviceParams(stiction_profile=StictionProfile.frictionless(),
                        viscous_b=b, encoder_counts_per_turn=1 << 22)


def test_frf_matches_closed_form(overlay):
    chirp = ch.make_chirp(0.1, 100.0, 30.0, 0.4, 1000.0)
    res = ch.measure_frf(_linear_plant(), overlay, chirp, runs=2, seed=3,
                         noise_sd=0.005)
    cf = ch.closed_loop_magnitude(2.0, 7.91e-4, 0.04, res.frequencies)
    mask = (res.frequencies >= 0.5) & (res.frequencies <= 50.0)
    ratio = res.magnitude[mask] / cf[mask]
    assert ratio.max() < 1.05 and ratio.min() > 0.95


def test_frf_monotone_above_resonance(overlay):
    chirp = ch.make_chirp(0.1, 100.0, 30.0, 0.4, 1000.0)
    res = ch.measure_frf(_linear_plant(), overlay, chirp, runs=2, seed=3,
                         noise_sd=0.005)
    peak = int(np.argmax(res.magnitude))
    tail = res.magnitude[peak:][res.frequencies[peak:] <= 100.0]
    assert np.all(np.diff(tail) < 0.0)


def test_frf_rejects_bad_args(overlay):
    chirp = ch.make_chirp(0.1, 100.0, 1.0, 0.4, 1000.0)
    with pytest.raises(ValueError):
        ch.measure_frf(_linear_plant(), overlay, chirp, runs=0)
    with pytest.raises(ValueError):
        ch.measure_frf(_linear_plant(), overlay.with_stiffness(0.0), chirp)


def test_frf_run_averaging_does_not_increase_variance(overlay):
    # short chirps across seeds: flat-band estimates from 4-run averages
    # scatter no more than single-run estimates
    chirp = ch.make_chirp(0.2, 50.0, 8.0, 0.4, 1000.0)
    params = ch.bench_device()
    singles, averaged = [], []
    for seed in range(6):
        singles.append(ch.measure_frf(params, overlay, chirp, runs=1,
                                      seed=seed, noise_sd=0.05).flat_band_gain)
        averaged.append(ch.measure_frf(params, overlay, chirp, runs=4,
                                       seed=100 + seed, noise_sd=0.05).flat_band_gain)
    assert np.var(averaged) <= np.var(singles) * 1.05


# -- stability sweep ----------------------------------------------------------------

def test_sweep_zero_stiffness_is_stable(overlay):
    res = ch.stability_sweep(ch.bench_device(), overlay, k_start=0.0,
                             k_step=2.0, k_max=6.0, eval_seconds=1.0)
    assert res.steps[0].stiffness_K == 0.0 and res.steps[0].stable


def test_sweep_rejects_bad_range(overlay):
    with pytest.raises(ValueError):
        ch.stability_sweep(ch.bench_device(), overlay, 5.0, 1.0, 5.0)
    with pytest.raises(ValueError):
        ch.stability_sweep(ch.bench_device(), overlay, 1.0, -1.0, 5.0)
    with pytest.raises(ValueError):
        ch.stability_sweep(ch.bench_device(), overlay, 1.0, 1.0, 5.0,
                           perturbation=0.0)


def test_sweep_finds_instability_boundary(overlay):
    res = ch.stability_sweep(ch.bench_device(), overlay, k_start=6.0,
                             k_step=1.0, k_max=16.0)
    stables = [s.stable for s in res.steps]
    assert stables[0] is True and stables[-1] is False
    assert not math.isnan(res.max_stable_K)
    # trigger-side conversions are consistent
    r = 3.02
    assert res.max_stable_trigger_stiffness == pytest.approx(res.max_stable_K / r**2)
    assert res.max_stable_force == pytest.approx(
        res.max_stable_trigger_stiffness * 15.0)


# -- friction ----------------------------------------------------------------------

def test_friction_constant_profile():
    params = DeviceParams(stiction_profile=StictionProfile.constant(0.665))
    res = ch.friction_test(params, positions=np.linspace(-1.5, 1.5, 5))
    # overshoot at most one ramp step per loop period plus the quantum traverse
    assert res.mean_torque == pytest.approx(0.665, abs=0.01)
    assert res.mean_torque >= 0.665
    assert res.mean_force == pytest.approx(0.665 / 3.02, abs=0.004)


def test_friction_frictionless_profile():
    params = DeviceParams(stiction_profile=StictionProfile.frictionless())
    res = ch.friction_test(params, positions=[0.0, 1.0])
    assert res.max_torque <= 0.02  # first ramp steps only


def test_friction_default_profile_against_configuration():
    params = DeviceParams()
    res = ch.friction_test(params)
    configured = params.stiction_profile(np.array(ch.DEFAULT_FRICTION_POSITIONS))
    assert res.min_torque == pytest.approx(configured.min(), rel=0.05)
    assert res.max_torque == pytest.approx(configured.max(), rel=0.05)
    assert res.mean_torque == pytest.approx(configured.mean(), rel=0.05)
    assert res.mean_force == pytest.approx(0.22, rel=0.05)


def test_friction_no_breakaway_flagged():
    params = DeviceParams(stiction_profile=StictionProfile.constant(50.0))
    positions = [0.0, 0.5]
    with pytest.raises(RuntimeError):
        ch.friction_test(params, positions=positions)
    # mixed profile: one reachable, one stuck position
    table = StictionProfile.from_pairs([[0.0, 0.4], [1.0, 50.0], [2.0, 0.4]])
    res = ch.friction_test(DeviceParams(stiction_profile=table),
                           positions=[0.0, 1.0])
    assert res.no_breakaway == [1.0]
    assert len(res.samples) == 1


def test_friction_rejects_out_of_travel():
    with pytest.raises(ValueError):
        ch.friction_test(DeviceParams(), positions=[5.0])


def test_friction_accuracy_bound():
    # reported breakaway within ramp_rate/loop_rate plus the quantization
    # delay of the configured level at each position
    params = DeviceParams()
    res = ch.friction_test(params, ramp_rate=0.5)
    for s in res.samples:
        configured = params.stiction_profile(s.theta)
        assert s.breakaway_torque >= configured - 1e-9
        assert s.breakaway_torque - configured < 0.5 / 1000.0 + 0.01
