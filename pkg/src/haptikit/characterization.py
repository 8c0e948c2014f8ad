"""Bench experiments run against the simulated plant.

Three experiments: an uncoupled stability sweep over rendered stiffness,
a breakaway-friction ramp at multiple shaft positions, and a chirp
frequency-response measurement with flat-band / resonance / inertia
extraction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import signal as sp_signal

from . import kernels
from .controller import ImpedanceConfig
from .device import DeviceParams, StictionProfile

TWO_PI = 2.0 * math.pi

# Plant substeps per controller period. The controller samples and holds
# at loop_rate; the plant itself is much closer to continuous, and the
# sampled-stiffness energy leak that limits the renderable stiffness only
# shows up when the plant is integrated on a finer grid than the loop.
DEFAULT_SUBSTEPS = 10

# Documented damping choice for bench configs; the drivetrain's viscous
# term is not separately measurable from breakaway levels alone.
BENCH_VISCOUS_B = 5e-3  # mNm/(rad/s)

DEFAULT_FRICTION_POSITIONS = tuple(np.linspace(-2.2, 2.2, 16))
DEFAULT_FRICTION_RAMP_RATE = 0.5  # mNm/s

FRF_CHIRP_F0 = 0.1
FRF_CHIRP_F1 = 100.0
FRF_CHIRP_DURATION = 30.0
FRF_CHIRP_AMPLITUDE = 0.4  # mNm
FRF_OVERLAY_STIFFNESS = 2.0  # mNm/rad centering overlay during the chirp
FRF_NOISE_SD = 0.01  # mNm torque dither per tick, decorrelates quantization
FRF_SEGMENT_SECONDS = 4.0
FRF_GRID = tuple(np.geomspace(0.25, 100.0, 240))


def bench_device(stiction: Optional[StictionProfile] = None,
                 viscous_b: float = BENCH_VISCOUS_B, **kwargs) -> DeviceParams:
    """Device parameters used by the bench experiments.

    Frictionless by default: breakaway torque would otherwise dominate the
    small excitations these experiments use, and the documented viscous
    term is the quantity the stability analysis is about.
    """
    profile = stiction if stiction is not None else StictionProfile.frictionless()
    return DeviceParams(stiction_profile=profile, viscous_b=viscous_b, **kwargs)


# ---------------------------------------------------------------------------
# chirp generation

def make_chirp(f0: float, f1: float, duration: float, amplitude: float,
               sample_rate: float) -> np.ndarray:
    """Phase-continuous exponential (log) torque sweep.

    Instantaneous frequency is f0 at t = 0 and f1 at t = duration, so the
    sweep spends equal time per octave.
    """
    if not (0.0 < f0 < f1 < sample_rate / 2.0):
        raise ValueError(
            f"need 0 < f0 < f1 < sample_rate/2, got f0={f0}, f1={f1}, rate={sample_rate}")
    if duration <= 0 or amplitude <= 0:
        raise ValueError("duration and amplitude must be > 0")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    rate = duration / math.log(f1 / f0)
    phase = TWO_PI * f0 * rate * (np.exp(t / rate) - 1.0)
    return amplitude * np.sin(phase)


def chirp_instantaneous_frequency(f0: float, f1: float, duration: float,
                                  t: float) -> float:
    rate = duration / math.log(f1 / f0)
    return f0 * math.exp(t / rate)


# ---------------------------------------------------------------------------
# shared closed-loop runner

def _run_loop(params: DeviceParams, overlay: ImpedanceConfig,
              tau_ext: np.ndarray, theta0: float = 0.0,
              substeps: int = DEFAULT_SUBSTEPS):
    prof = params.stiction_profile
    return kernels.run_closed_loop(
        theta0, 0.0, 1.0, np.ascontiguousarray(tau_ext, dtype=float),
        substeps, overlay.dt,
        params.effective_inertia(), params.effective_damping(),
        params.user_spring_rotational(), theta0,
        params.coulomb_ratio, params.velocity_deadband, params.theta_limit,
        prof.theta_knots, prof.torque_knots, params.encoder_quantum,
        overlay.stiffness_K, overlay.damping_B, overlay.center,
        overlay.torque_limit, overlay.filter_alpha)


# ---------------------------------------------------------------------------
# frequency response

@dataclass
class FrfResult:
    frequencies: np.ndarray      # Hz, log-spaced grid
    magnitude: np.ndarray        # rad/mNm
    phase: np.ndarray            # deg
    coherence: np.ndarray
    flat_band_gain: float        # rad/mNm, median over 0.5-2 Hz
    resonance_hz: float
    fitted_inertia: float        # mNm/(rad/s^2)
    runs_averaged: int
    warnings: list[str] = field(default_factory=list)


def measure_frf(params: DeviceParams, overlay: ImpedanceConfig,
                chirp: np.ndarray, runs: int = 10, seed: int = 0,
                noise_sd: float = FRF_NOISE_SD,
                substeps: int = DEFAULT_SUBSTEPS,
                segment_seconds: float = FRF_SEGMENT_SECONDS,
                grid: Sequence[float] = FRF_GRID) -> FrfResult:
    """Estimate theta-per-torque of the centered plant from chirp runs.

    Per run the chirp (plus a small torque dither) is applied on top of
    the centering overlay; the response is the dequantized encoder angle.
    H1 = cross-spectrum / input auto-spectrum with Hann segment averaging,
    magnitudes averaged across runs.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if overlay.stiffness_K <= 0:
        raise ValueError("the chirp needs a centering overlay (stiffness_K > 0)")
    fs = overlay.loop_rate
    nperseg = int(round(segment_seconds * fs))
    mags, hs, cohs = [], [], []
    for run in range(runs):
        rng = np.random.default_rng((seed, run))
        tau_ext = chirp + rng.normal(0.0, noise_sd, chirp.shape[0])
        th_hat, _th, _tau, _sat, *_ = _run_loop(params, overlay, tau_ext,
                                                substeps=substeps)
        f, pxy = sp_signal.csd(tau_ext, th_hat, fs=fs, window="hann",
                               nperseg=nperseg, noverlap=nperseg // 2)
        _, pxx = sp_signal.welch(tau_ext, fs=fs, window="hann",
                                 nperseg=nperseg, noverlap=nperseg // 2)
        _, coh = sp_signal.coherence(tau_ext, th_hat, fs=fs, window="hann",
                                     nperseg=nperseg, noverlap=nperseg // 2)
        h = pxy / pxx
        mags.append(np.abs(h))
        hs.append(h)
        cohs.append(coh)
    mag_lin = np.mean(mags, axis=0)
    h_mean = np.mean(hs, axis=0)
    coh_lin = np.mean(cohs, axis=0)

    grid = np.asarray(grid, dtype=float)
    mag = np.interp(grid, f, mag_lin)
    phase = np.interp(grid, f, np.degrees(np.unwrap(np.angle(h_mean))))
    coh = np.interp(grid, f, coh_lin)

    warnings: list[str] = []
    peak_idx = int(np.argmax(mag))
    resonance = float(grid[peak_idx])
    if peak_idx in (0, len(grid) - 1):
        warnings.append(f"resonance at grid edge ({resonance:.3g} Hz)")

    flat_mask = (grid >= 0.5) & (grid <= 2.0)
    flat_band_gain = float(np.median(mag[flat_mask]))

    fit_mask = (grid >= 3.0 * resonance) & (grid <= 100.0)
    if fit_mask.sum() >= 4:
        # weighted log-domain least squares of mag ~ 1/(J w^2); coherence^2
        # weights keep low-SNR bins near the top of the band from biasing J
        g = 1.0 / (TWO_PI * grid[fit_mask]) ** 2
        w = coh[fit_mask] ** 2
        resid = np.log(g) - np.log(mag[fit_mask])
        fitted_inertia = float(np.exp(np.sum(w * resid) / np.sum(w)))
        if float(np.mean(coh[fit_mask])) < 0.8:
            warnings.append("coherence < 0.8 in the inertia fit band")
    else:
        fitted_inertia = math.nan
        warnings.append("inertia fit band has too few grid points")

    return FrfResult(frequencies=grid, magnitude=mag, phase=phase, coherence=coh,
                     flat_band_gain=flat_band_gain, resonance_hz=resonance,
                     fitted_inertia=fitted_inertia, runs_averaged=runs,
                     warnings=warnings)


def closed_loop_magnitude(k_stiff: float, inertia: float, damping: float,
                          freq_hz) -> np.ndarray:
    """|theta/tau| of the continuous spring-mass-damper loop, rad/mNm."""
    w = TWO_PI * np.asarray(freq_hz, dtype=float)
    return 1.0 / np.abs(k_stiff - inertia * w ** 2 + 1j * damping * w)


# ---------------------------------------------------------------------------
# stability sweep

@dataclass
class SweepStep:
    stiffness_K: float
    stable: bool
    peak_ratio: float


@dataclass
class StabilitySweepResult:
    steps: list[SweepStep]
    max_stable_K: float                  # mNm/rad
    max_stable_trigger_stiffness: float  # N/mm
    max_stable_force: float              # N, commanded at full stroke
    flags: list[str] = field(default_factory=list)


def _oscillation_peaks(series: np.ndarray, start_idx: int,
                       floor: float) -> np.ndarray:
    """Positive local maxima after start_idx (one per oscillation period).

    Peaks below `floor` are settled-to-quantization residue, not motion.
    """
    x = series[start_idx:]
    if x.size < 3:
        return np.empty(0)
    mid = x[1:-1]
    is_peak = (mid > x[:-2]) & (mid >= x[2:]) & (mid > floor)
    return mid[is_peak]


def stability_sweep(params: DeviceParams, base_overlay: ImpedanceConfig,
                    k_start: float, k_step: float, k_max: float,
                    perturbation: float = 0.05,
                    eval_seconds: float = 2.5, transient_seconds: float = 0.2,
                    growth_eps: float = 0.02,
                    substeps: int = 2 * DEFAULT_SUBSTEPS) -> StabilitySweepResult:
    """Raise the rendered stiffness in steps and classify each for stability.

    Each step runs the closed loop from rest, kicks it with a torque
    impulse (perturbation, mNm*s, spread over one controller period) and
    watches the oscillation peaks of the shaft angle after a transient
    window: stable iff no successive-peak ratio exceeds 1 + growth_eps.
    """
    if k_step <= 0:
        raise ValueError("k_step must be > 0")
    if k_start >= k_max:
        raise ValueError("k_start must be < k_max")
    if perturbation <= 0:
        raise ValueError("perturbation must be > 0")

    n_ticks = int(round(eval_seconds * base_overlay.loop_rate))
    start_idx = int(round(transient_seconds * base_overlay.loop_rate))
    tau_ext = np.zeros(n_ticks)
    tau_ext[0] = perturbation / base_overlay.dt

    steps: list[SweepStep] = []
    flags: list[str] = []
    k_values = np.arange(k_start, k_max + 0.5 * k_step, k_step)
    for k in k_values:
        overlay = base_overlay.with_stiffness(float(k))
        _th_hat, th_true, _tau, _sat, *_ = _run_loop(params, overlay, tau_ext,
                                                     substeps=substeps)
        rel = th_true - overlay.center
        # a drift that parks against one stop is bounded; only an oscillation
        # that bangs both rails counts as railed divergence
        post = th_true[start_idx:]
        rail = params.theta_limit * (1.0 - 1e-9)
        hit_stop = bool(np.any(post >= rail) and np.any(post <= -rail))
        peaks = _oscillation_peaks(rel, start_idx, 4.0 * params.encoder_quantum)
        if peaks.size >= 3:
            ratios = peaks[1:] / peaks[:-1]
            peak_ratio = float(np.max(ratios))
            # envelope check catches growth too slow to trip the per-period
            # ratio within one oscillation
            growing = (peak_ratio > 1.0 + growth_eps) or \
                      (peaks[-1] > (1.0 + growth_eps) * peaks[0])
            stable = not growing and not hit_stop
            if stable and peaks[-1] > 0.8 * peaks[0]:
                flags.append(f"K={k:g}: non-settling oscillation, "
                             f"classification ambiguous")
        else:
            peak_ratio = math.nan
            stable = not hit_stop
        if hit_stop:
            flags.append(f"K={k:g}: oscillation railed against both hard stops")
        steps.append(SweepStep(stiffness_K=float(k), stable=stable,
                               peak_ratio=peak_ratio))

    max_stable = math.nan
    for s in steps:
        if not s.stable:
            break
        max_stable = s.stiffness_K
    if math.isnan(max_stable):
        flags.append("first sweep step already unstable")
    elif steps[-1].stable:
        flags.append("no instability found within the sweep range")

    r = params.radius_r
    trig = max_stable / r ** 2 if not math.isnan(max_stable) else math.nan
    force = trig * params.stroke if not math.isnan(trig) else math.nan
    return StabilitySweepResult(steps=steps, max_stable_K=max_stable,
                                max_stable_trigger_stiffness=trig,
                                max_stable_force=force, flags=flags)


# ---------------------------------------------------------------------------
# friction / transparency

@dataclass
class FrictionSample:
    theta: float
    breakaway_torque: float  # mNm
    breakaway_force: float   # N


@dataclass
class FrictionTestResult:
    samples: list[FrictionSample]
    min_torque: float
    max_torque: float
    mean_torque: float
    min_force: float
    max_force: float
    mean_force: float
    no_breakaway: list[float] = field(default_factory=list)


def friction_test(params: DeviceParams,
                  positions: Iterable[float] = DEFAULT_FRICTION_POSITIONS,
                  ramp_rate: float = DEFAULT_FRICTION_RAMP_RATE,
                  loop_rate: float = 1000.0,
                  substeps: int = DEFAULT_SUBSTEPS) -> FrictionTestResult:
    """Slow torque ramp from rest at each position; record where motion starts.

    Motion is detected at the first encoder count change, so the reported
    torque overshoots the configured breakaway by at most the ramp step
    plus the time it takes to traverse one encoder quantum.
    """
    if ramp_rate <= 0:
        raise ValueError("ramp_rate must be > 0")
    positions = [float(p) for p in positions]
    lim = params.theta_limit
    for p in positions:
        if abs(p) > lim:
            raise ValueError(f"position {p} outside travel +/-{lim}")

    prof = params.stiction_profile
    samples: list[FrictionSample] = []
    missing: list[float] = []
    for p in positions:
        tau = kernels.run_friction_ramp(
            p, ramp_rate, params.torque_limit, substeps, 1.0 / loop_rate,
            params.effective_inertia(), params.effective_damping(),
            params.coulomb_ratio, params.velocity_deadband, lim,
            prof.theta_knots, prof.torque_knots, params.encoder_quantum)
        if math.isnan(tau):
            missing.append(p)
        else:
            samples.append(FrictionSample(
                theta=p, breakaway_torque=float(tau),
                breakaway_force=float(tau) / params.radius_r))
    if not samples:
        raise RuntimeError("no position produced breakaway below the torque limit")
    torques = np.array([s.breakaway_torque for s in samples])
    forces = np.array([s.breakaway_force for s in samples])
    return FrictionTestResult(
        samples=samples,
        min_torque=float(torques.min()), max_torque=float(torques.max()),
        mean_torque=float(torques.mean()),
        min_force=float(forces.min()), max_force=float(forces.max()),
        mean_force=float(forces.mean()), no_breakaway=missing)


# ---------------------------------------------------------------------------
# CSV / JSON export

def write_frf_csv(result: FrfResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "magnitude_rad_per_mNm", "phase_deg", "coherence"])
        for f, m, p, c in zip(result.frequencies, result.magnitude,
                              result.phase, result.coherence):
            w.writerow([f"{f:.6g}", f"{m:.8g}", f"{p:.6g}", f"{c:.6g}"])


def write_sweep_csv(result: StabilitySweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stiffness_mNm_per_rad", "stable", "peak_ratio"])
        for s in result.steps:
            w.writerow([f"{s.stiffness_K:.6g}", int(s.stable), f"{s.peak_ratio:.6g}"])


def write_friction_csv(result: FrictionTestResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_rad", "breakaway_torque_mNm", "breakaway_force_N"])
        for s in result.samples:
            w.writerow([f"{s.theta:.6g}", f"{s.breakaway_torque:.8g}",
                        f"{s.breakaway_force:.8g}"])


def frf_summary(result: FrfResult) -> dict:
    return {
        "flat_band_gain_rad_per_mNm": result.flat_band_gain,
        "resonance_hz": result.resonance_hz,
        "fitted_inertia_mNm_per_rad_s2": result.fitted_inertia,
        "runs_averaged": result.runs_averaged,
        "warnings": result.warnings,
    }


def sweep_summary(result: StabilitySweepResult) -> dict:
    return {
        "max_stable_K_mNm_per_rad": result.max_stable_K,
        "max_stable_trigger_stiffness_N_per_mm": result.max_stable_trigger_stiffness,
        "max_stable_force_N": result.max_stable_force,
        "steps": len(result.steps),
        "flags": result.flags,
    }


def friction_summary(result: FrictionTestResult) -> dict:
    return {
        "min_torque_mNm": result.min_torque,
        "max_torque_mNm": result.max_torque,
        "mean_torque_mNm": result.mean_torque,
        "min_force_N": result.min_force,
        "max_force_N": result.max_force,
        "mean_force_N": result.mean_force,
        "positions": len(result.samples),
        "no_breakaway_positions": result.no_breakaway,
    }
