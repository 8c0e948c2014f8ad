"""Discrete-time impedance controller: virtual spring/damper about a center.

Runs at a fixed loop rate on encoder counts. Velocity comes from a
backward difference of the dequantized angle through a first-order low
pass, which keeps quantization noise out of the damping term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from . import kernels
from .device import DeviceParams, DEFAULT_RADIUS_MM, DEFAULT_TORQUE_MAX_CONT

KNOB_STIFFNESS = 7.5            # mNm/rad rendered about center in the knob condition
HANDHELD_TRIGGER_STIFFNESS = 7.4  # mNm per mm of trigger displacement (as specified)


@dataclass
class ImpedanceConfig:
    stiffness_K: float                     # mNm/rad
    damping_B: float = 0.0                 # mNm/(rad/s)
    center: float = 0.0                    # rad
    torque_limit: float = DEFAULT_TORQUE_MAX_CONT
    loop_rate: float = 1000.0              # Hz
    velocity_filter_cutoff: float = 50.0   # Hz
    trigger_stiffness_raw: Optional[float] = None  # mNm/mm before conversion, if any

    def __post_init__(self):
        if self.stiffness_K < 0 or self.damping_B < 0:
            raise ValueError("stiffness_K and damping_B must be >= 0")
        if self.torque_limit <= 0 or self.loop_rate <= 0:
            raise ValueError("torque_limit and loop_rate must be > 0")
        if self.velocity_filter_cutoff <= 0:
            raise ValueError("velocity_filter_cutoff must be > 0")

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_rate

    @property
    def filter_alpha(self) -> float:
        """Per-sample gain of the first-order velocity low pass (unit DC gain)."""
        return 1.0 - math.exp(-2.0 * math.pi * self.velocity_filter_cutoff * self.dt)

    @classmethod
    def from_trigger_stiffness(cls, stiffness_mNm_per_mm: float,
                               radius_mm: float = DEFAULT_RADIUS_MM,
                               **kwargs) -> "ImpedanceConfig":
        """Build from a trigger-side stiffness in mNm per mm of travel.

        The value mixes shaft torque with trigger displacement; with
        x = radius * theta the torque per shaft radian is value * radius.
        The raw number is kept alongside the converted one.
        """
        return cls(stiffness_K=stiffness_mNm_per_mm * radius_mm,
                   trigger_stiffness_raw=stiffness_mNm_per_mm, **kwargs)

    def to_json_dict(self) -> dict:
        return {
            "stiffness_K": self.stiffness_K,
            "damping_B": self.damping_B,
            "center": self.center,
            "torque_limit": self.torque_limit,
            "loop_rate": self.loop_rate,
            "velocity_filter_cutoff": self.velocity_filter_cutoff,
            "trigger_stiffness_raw": self.trigger_stiffness_raw,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImpedanceConfig":
        return cls(**d)

    def with_stiffness(self, k: float) -> "ImpedanceConfig":
        return replace(self, stiffness_K=k)


@dataclass
class ControllerState:
    quantum: float                     # rad per encoder count
    theta_hat_prev: float = math.nan   # nan marks "no previous sample yet"
    omega_filt: float = 0.0
    saturated: bool = False


def make_controller_state(params: DeviceParams) -> ControllerState:
    return ControllerState(quantum=params.encoder_quantum)


def control_step(cfg: ImpedanceConfig, encoder_counts: int,
                 state: ControllerState) -> Tuple[float, ControllerState]:
    """One loop iteration: encoder counts in, saturated motor torque out."""
    theta_hat = encoder_counts * state.quantum
    tau, omega_new, saturated = kernels.controller_core(
        theta_hat, state.theta_hat_prev, state.omega_filt,
        cfg.stiffness_K, cfg.damping_B, cfg.center, cfg.torque_limit,
        cfg.filter_alpha, cfg.dt)
    new_state = ControllerState(quantum=state.quantum, theta_hat_prev=theta_hat,
                                omega_filt=omega_new, saturated=saturated >= 0.5)
    return float(tau), new_state


def overlay_for_condition(condition: str,
                          radius_mm: float = DEFAULT_RADIUS_MM,
                          **kwargs) -> ImpedanceConfig:
    """Centering overlay used in the study, per input condition.

    knob: 7.5 mNm/rad about center. handheld: 7.4 mNm per mm of trigger
    travel, converted to torque per shaft radian via the drive radius.
    Center is mid-stroke (shaft angle 0) for both.
    """
    if condition == "knob":
        return ImpedanceConfig(stiffness_K=KNOB_STIFFNESS, center=0.0, **kwargs)
    if condition == "handheld":
        return ImpedanceConfig.from_trigger_stiffness(
            HANDHELD_TRIGGER_STIFFNESS, radius_mm, center=0.0, **kwargs)
    raise ValueError(f"unknown condition {condition!r}; expected 'handheld' or 'knob'")
