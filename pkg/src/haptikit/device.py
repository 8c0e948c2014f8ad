"""Dynamic model of the coupled-trigger device.

Single rotational degree of freedom: motor rotor plus reflected drivetrain
inertia, cable-drive reduction to two mechanically coupled linear triggers,
position-dependent stiction with a Coulomb + viscous kinetic branch,
trigger travel hard stops, and encoder quantization.

Unit conventions (kept throughout the package):

* torque        mNm
* inertia       mNm/(rad/s^2)
* angle         rad, velocity rad/s
* trigger travel mm, trigger force N  (mNm / mm == N)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels

TWO_PI = 2.0 * math.pi

DEFAULT_INERTIA = 7.91e-4          # mNm/(rad/s^2), reflected at the shaft
DEFAULT_RADIUS_MM = 3.02           # mm trigger travel per shaft radian
DEFAULT_STROKE_MM = 15.0           # mm trigger travel
DEFAULT_TORQUE_MAX_CONT = 32.3     # mNm continuous motor rating
DEFAULT_ENCODER_CPT = 4096         # encoder positions per shaft revolution
DEFAULT_COULOMB_RATIO = 0.8
DEFAULT_VELOCITY_DEADBAND = 1e-3   # rad/s, stiction re-latch band

BREAKAWAY_TORQUE_MIN = 0.177       # mNm
BREAKAWAY_TORQUE_MAX = 1.029       # mNm
# Phase of the default breakaway sinusoid. Places both extremes inside the
# trigger travel and makes the 16-point characterization grid average to
# 0.6644 mNm, i.e. 0.22 N at the nominal 3.02 mm radius.
BREAKAWAY_PHASE = 0.4917137735540570


class StictionProfile:
    """Breakaway torque as a function of shaft angle.

    Stored as knots over one shaft revolution [0, 2*pi] with linear
    interpolation and periodic extension. Callable on scalars or arrays.
    """

    def __init__(self, theta_knots: np.ndarray, torque_knots: np.ndarray):
        theta = np.asarray(theta_knots, dtype=float)
        torque = np.asarray(torque_knots, dtype=float)
        if theta.ndim != 1 or theta.shape != torque.shape or theta.size < 2:
            raise ValueError("profile needs matching 1-D theta/torque knot arrays")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(torque))):
            raise ValueError("profile knots must be finite")
        if np.any(torque < 0.0):
            raise ValueError("breakaway torque must be >= 0 everywhere")
        theta = theta % TWO_PI
        order = np.argsort(theta)
        theta = theta[order]
        torque = torque[order]
        if theta[0] != 0.0:
            # interpolate the period boundary between the last and first knots
            span = theta[0] + TWO_PI - theta[-1]
            frac = (TWO_PI - theta[-1]) / span
            t0 = torque[-1] + frac * (torque[0] - torque[-1])
            theta = np.concatenate(([0.0], theta))
            torque = np.concatenate(([t0], torque))
        theta = np.concatenate((theta, [TWO_PI]))
        torque = np.concatenate((torque, [torque[0]]))
        if np.any(np.diff(theta) <= 0.0):
            raise ValueError("profile knot angles must be distinct modulo one revolution")
        self.theta_knots = theta
        self.torque_knots = torque

    @classmethod
    def constant(cls, torque_mNm: float) -> "StictionProfile":
        return cls(np.array([0.0, math.pi]), np.array([torque_mNm, torque_mNm]))

    @classmethod
    def frictionless(cls) -> "StictionProfile":
        return cls.constant(0.0)

    @classmethod
    def sinusoid(cls, offset: float, amplitude: float, phase: float,
                 knots: int = 128) -> "StictionProfile":
        th = np.linspace(0.0, TWO_PI, knots, endpoint=False)
        return cls(th, offset + amplitude * np.sin(th + phase))

    @classmethod
    def default(cls) -> "StictionProfile":
        offset = 0.5 * (BREAKAWAY_TORQUE_MIN + BREAKAWAY_TORQUE_MAX)
        amplitude = 0.5 * (BREAKAWAY_TORQUE_MAX - BREAKAWAY_TORQUE_MIN)
        return cls.sinusoid(offset, amplitude, BREAKAWAY_PHASE)

    @classmethod
    def from_pairs(cls, pairs) -> "StictionProfile":
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("expected a list of (theta_rad, torque_mNm) pairs")
        return cls(arr[:, 0], arr[:, 1])

    def to_pairs(self) -> list[list[float]]:
        # drop the synthetic wrap knot at 2*pi
        return [[float(t), float(v)] for t, v in
                zip(self.theta_knots[:-1], self.torque_knots[:-1])]

    def __call__(self, theta):
        if np.isscalar(theta):
            return float(kernels.profile_torque(float(theta), self.theta_knots,
                                                self.torque_knots))
        theta = np.asarray(theta, dtype=float)
        out = np.empty(theta.shape)
        flat = theta.ravel()
        oflat = out.ravel()
        for i in range(flat.size):
            oflat[i] = kernels.profile_torque(flat[i], self.theta_knots,
                                              self.torque_knots)
        return out


@dataclass
class UserLoad:
    """Linear fingertip impedance at the upper trigger, reflected to the shaft."""

    mass_kg: float = 0.0
    stiffness_n_per_mm: float = 0.0
    damping_n_per_mm_s: float = 0.0

    def __post_init__(self):
        if self.mass_kg < 0 or self.stiffness_n_per_mm < 0 or self.damping_n_per_mm_s < 0:
            raise ValueError("user load terms must be >= 0")


@dataclass
class DeviceParams:
    """Physical parameters of the motor + drivetrain + trigger assembly."""

    inertia_J: float = DEFAULT_INERTIA
    radius_r: float = DEFAULT_RADIUS_MM
    viscous_b: float = 0.0
    stiction_profile: StictionProfile = field(default_factory=StictionProfile.default)
    coulomb_ratio: float = DEFAULT_COULOMB_RATIO
    stroke: float = DEFAULT_STROKE_MM
    torque_max_cont: float = DEFAULT_TORQUE_MAX_CONT
    torque_peak_mult: float = 1.0
    encoder_counts_per_turn: int = DEFAULT_ENCODER_CPT
    user_load: Optional[UserLoad] = None
    velocity_deadband: float = DEFAULT_VELOCITY_DEADBAND

    def __post_init__(self):
        if not (self.inertia_J > 0 and self.radius_r > 0 and self.stroke > 0):
            raise ValueError("inertia_J, radius_r and stroke must be > 0")
        if self.encoder_counts_per_turn < 1:
            raise ValueError("encoder_counts_per_turn must be >= 1")
        if not 0.0 < self.coulomb_ratio <= 1.0:
            raise ValueError("coulomb_ratio must be in (0, 1]")
        if self.viscous_b < 0:
            raise ValueError("viscous_b must be >= 0")
        if self.torque_max_cont <= 0 or self.torque_peak_mult < 1.0:
            raise ValueError("torque rating invalid")

    @property
    def theta_limit(self) -> float:
        """Hard-stop shaft angle, rad: half the stroke over the drive radius."""
        return (self.stroke / 2.0) / self.radius_r

    @property
    def encoder_quantum(self) -> float:
        return TWO_PI / self.encoder_counts_per_turn

    @property
    def torque_limit(self) -> float:
        return self.torque_max_cont * self.torque_peak_mult

    def effective_inertia(self) -> float:
        j = self.inertia_J
        if self.user_load is not None:
            # kg at radius_r mm -> mNm/(rad/s^2): m * r^2 * 1e-3
            j += self.user_load.mass_kg * self.radius_r ** 2 * 1e-3
        return j

    def effective_damping(self) -> float:
        b = self.viscous_b
        if self.user_load is not None:
            b += self.user_load.damping_n_per_mm_s * self.radius_r ** 2
        return b

    def user_spring_rotational(self) -> float:
        if self.user_load is None:
            return 0.0
        return self.user_load.stiffness_n_per_mm * self.radius_r ** 2

    def to_json_dict(self) -> dict:
        d = {
            "inertia_J": self.inertia_J,
            "radius_r": self.radius_r,
            "viscous_b": self.viscous_b,
            "stiction_profile": self.stiction_profile.to_pairs(),
            "coulomb_ratio": self.coulomb_ratio,
            "stroke": self.stroke,
            "torque_max_cont": self.torque_max_cont,
            "torque_peak_mult": self.torque_peak_mult,
            "encoder_counts_per_turn": self.encoder_counts_per_turn,
            "user_load": None,
        }
        if self.user_load is not None:
            d["user_load"] = {
                "mass_kg": self.user_load.mass_kg,
                "stiffness_n_per_mm": self.user_load.stiffness_n_per_mm,
                "damping_n_per_mm_s": self.user_load.damping_n_per_mm_s,
            }
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "DeviceParams":
        kwargs = dict(d)
        profile = kwargs.pop("stiction_profile", None)
        load = kwargs.pop("user_load", None)
        params = cls(
            stiction_profile=(StictionProfile.from_pairs(profile)
                              if profile is not None else StictionProfile.default()),
            user_load=(UserLoad(**load) if load else None),
            **kwargs,
        )
        return params

    def with_profile(self, profile: StictionProfile) -> "DeviceParams":
        return replace(self, stiction_profile=profile)


@dataclass
class DeviceState:
    """Simulation state; advance only through :func:`step`."""

    theta: float = 0.0
    omega: float = 0.0
    t: float = 0.0
    sticking: bool = True
    last_applied_torque: float = 0.0


@dataclass
class TriggerPose:
    x_upper: float
    x_lower: float


def step(params: DeviceParams, state: DeviceState, motor_torque: float,
         user_force: float, dt: float,
         user_anchor_theta: Optional[float] = None) -> DeviceState:
    """Advance the plant one semi-implicit Euler step of length dt.

    motor_torque is the commanded motor torque (mNm); saturation is the
    caller's responsibility. user_force (N) acts at the upper trigger in
    the +x_upper direction. When params.user_load is set its spring pulls
    the shaft toward user_anchor_theta (defaults to the current angle, so
    the load is a passive mass/damper unless an anchor is commanded).
    """
    for name, v in (("motor_torque", motor_torque), ("user_force", user_force),
                    ("dt", dt)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")
    if not 0.0 < dt <= 1e-3:
        raise ValueError(f"dt must be in (0, 0.001] s, got {dt}")
    if not (math.isfinite(state.theta) and math.isfinite(state.omega)):
        raise ValueError("device state is non-finite")

    anchor = state.theta if user_anchor_theta is None else float(user_anchor_theta)
    tau_cmd = motor_torque + user_force * params.radius_r
    prof = params.stiction_profile
    theta, omega, sticking = kernels.plant_substep(
        state.theta, state.omega, 1.0 if state.sticking else 0.0,
        tau_cmd, anchor, dt,
        params.effective_inertia(), params.effective_damping(),
        params.user_spring_rotational(), params.coulomb_ratio,
        params.velocity_deadband, params.theta_limit,
        prof.theta_knots, prof.torque_knots)
    return DeviceState(theta=theta, omega=omega, t=state.t + dt,
                       sticking=sticking >= 0.5,
                       last_applied_torque=motor_torque)


def shaft_to_triggers(params: DeviceParams, theta: float) -> TriggerPose:
    """Trigger positions for a shaft angle; the coupling keeps their sum = stroke."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    lim = params.theta_limit
    if abs(theta) > lim * (1.0 + 1e-12):
        raise ValueError(f"theta {theta} outside travel +/-{lim}")
    x_upper = params.stroke / 2.0 + params.radius_r * theta
    x_upper = min(max(x_upper, 0.0), params.stroke)
    return TriggerPose(x_upper=x_upper, x_lower=params.stroke - x_upper)


def reflect_torque_to_force(params: DeviceParams, torque: float) -> float:
    """Shaft torque (mNm) to equivalent force at the trigger (N)."""
    if not math.isfinite(torque):
        raise ValueError("torque must be finite")
    return torque / params.radius_r


def quantize_encoder(params: DeviceParams, theta: float) -> int:
    """Encoder counts for a shaft angle (floor quantization)."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    return int(math.floor(theta / params.encoder_quantum))


def dequantize_encoder(params: DeviceParams, counts: int) -> float:
    return counts * params.encoder_quantum


def kinetic_energy(params: DeviceParams, state: DeviceState) -> float:
    return 0.5 * params.effective_inertia() * state.omega ** 2
