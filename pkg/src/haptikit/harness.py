"""Study task machinery.

Differential (rate-control) cursor mapping, Fitts-style targeting trials
with index of difficulty and throughput, sinusoid tracking segments with
per-segment error, session plans, and a synthetic operator that can drive
a whole session headlessly.

Deflection units are mm of upper-trigger depression for the handheld
condition (positive = upper trigger pressed = cursor right) and shaft
radians for the knob.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_SCREEN_WIDTH = 1200.0  # px
DEFAULT_DWELL_MS = 2000

# 300 px/s at full deflection for both devices (7.5 mm trigger travel,
# 1.5 rad knob travel) so attainable cursor speed is equal across conditions.
RATE_GAIN_HANDHELD = 40.0   # px/s per mm
RATE_GAIN_KNOB = 200.0      # px/s per rad

DEFAULT_TARGET_AMPLITUDES = (120.0, 240.0, 480.0)  # px
DEFAULT_TARGET_WIDTHS = (20.0, 40.0, 80.0)         # px
DEFAULT_TRACKING_AMPLITUDES = (150.0, 400.0)       # px
TRACKING_FREQUENCIES = (0.3, 1.0)                  # Hz

CONDITIONS = ("handheld", "knob")


@dataclass
class MappingConfig:
    mode: str                         # 'handheld' or 'knob'
    rate_gain: float                  # px/s per deflection unit
    deadzone: float = 0.0             # deflection units
    screen_width: float = DEFAULT_SCREEN_WIDTH

    def __post_init__(self):
        if self.mode not in CONDITIONS:
            raise ValueError(f"unknown mapping mode {self.mode!r}")
        if self.rate_gain <= 0:
            raise ValueError("rate_gain must be > 0")
        if self.deadzone < 0:
            raise ValueError("deadzone must be >= 0")

    def to_json_dict(self) -> dict:
        return {"mode": self.mode, "rate_gain": self.rate_gain,
                "deadzone": self.deadzone, "screen_width": self.screen_width}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MappingConfig":
        return cls(**d)


def map_input(cfg: MappingConfig, deflection: float, cursor: float,
              dt: float) -> float:
    """Rate-control update: deflection commands cursor velocity."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    d = 0.0 if abs(deflection) <= cfg.deadzone else deflection
    return min(max(cursor + cfg.rate_gain * d * dt, 0.0), cfg.screen_width)


# ---------------------------------------------------------------------------
# targeting

def index_of_difficulty(amplitude: float, width: float) -> float:
    """Bits: log2(A/W + 1)."""
    if amplitude <= 0 or width <= 0:
        raise ValueError("amplitude and width must be > 0")
    return math.log2(amplitude / width + 1.0)


@dataclass
class TargetSpec:
    amplitude: float       # px
    width: float           # px
    start_pos: float       # px
    direction: int         # +1 right, -1 left

    def __post_init__(self):
        if self.width <= 0 or self.amplitude <= 0:
            raise ValueError("width and amplitude must be > 0")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")

    @property
    def target_center(self) -> float:
        return self.start_pos + self.direction * self.amplitude

    @property
    def id_bits(self) -> float:
        return index_of_difficulty(self.amplitude, self.width)


@dataclass
class TargetingTrial:
    amplitude_A: float
    width_W: float
    start_pos: float
    direction: int
    mt: Optional[float]          # s, None until completed
    id_bits: float
    path: list                   # (t_ms, cursor) samples
    completed: bool
    t0_ms: Optional[int] = None
    dwell_start_ms: Optional[int] = None

    @property
    def tp(self) -> float:
        if not self.completed or self.mt is None or self.mt <= 0:
            raise ValueError("throughput is defined for completed trials only")
        return self.id_bits / self.mt


class TargetingStateMachine:
    """Trial protocol: key press arms the trial, motion, then a continuous
    dwell inside the target completes it. Movement time runs from the key
    press to the start of the dwell that completed; any exit from the
    target resets the dwell clock."""

    def __init__(self, spec: TargetSpec, dwell_ms: int = DEFAULT_DWELL_MS,
                 path_stride_ms: int = 0):
        self.spec = spec
        self.dwell_ms = dwell_ms
        self.path_stride_ms = path_stride_ms
        self.phase = "idle"
        self.t0_ms: Optional[int] = None
        self.dwell_since: Optional[int] = None
        self.dwell_start_ms: Optional[int] = None
        self.path: list = []
        self._last_path_t: Optional[int] = None

    def dwell_elapsed_ms(self, t_ms: int) -> int:
        if self.dwell_since is None:
            return 0
        return t_ms - self.dwell_since

    def _record_path(self, t_ms: int, cursor: float) -> None:
        if self._last_path_t is not None and \
                t_ms - self._last_path_t < self.path_stride_ms:
            return
        self.path.append((t_ms, cursor))
        self._last_path_t = t_ms

    def update(self, t_ms: int, cursor: float, key_down: bool = False) -> str:
        if self.phase == "complete":
            return self.phase
        if self.phase == "idle":
            if key_down:
                self.phase = "armed"
                self.t0_ms = t_ms
            return self.phase
        self._record_path(t_ms, cursor)
        inside = abs(cursor - self.spec.target_center) <= self.spec.width / 2.0
        if inside:
            if self.dwell_since is None:
                self.dwell_since = t_ms
            if t_ms - self.dwell_since >= self.dwell_ms:
                self.phase = "complete"
                self.dwell_start_ms = self.dwell_since
            else:
                self.phase = "dwell"
        else:
            self.dwell_since = None
            self.phase = "moving"
        return self.phase

    def result(self) -> TargetingTrial:
        completed = self.phase == "complete"
        mt = None
        if completed:
            mt = (self.dwell_start_ms - self.t0_ms) / 1000.0
        return TargetingTrial(
            amplitude_A=self.spec.amplitude, width_W=self.spec.width,
            start_pos=self.spec.start_pos, direction=self.spec.direction,
            mt=mt, id_bits=self.spec.id_bits, path=self.path,
            completed=completed, t0_ms=self.t0_ms,
            dwell_start_ms=self.dwell_start_ms)


def run_targeting_trial(spec: TargetSpec,
                        stream: Iterable[tuple]) -> TargetingTrial:
    """Drive the trial state machine from (t_ms, cursor_px, key_down) samples.

    Timestamps must be monotone. A stream that ends before completion
    yields an incomplete trial (excluded from throughput).
    """
    sm = TargetingStateMachine(spec)
    last_t = None
    for t_ms, cursor, key_down in stream:
        if last_t is not None and t_ms < last_t:
            raise ValueError("input stream timestamps must be monotone")
        last_t = t_ms
        if sm.update(int(t_ms), float(cursor), bool(key_down)) == "complete":
            break
    return sm.result()


def throughput(trials: Sequence[TargetingTrial]) -> float:
    """Mean of per-trial ID/MT, bits/s (mean-of-trials convention)."""
    if not trials:
        raise ValueError("throughput needs at least one completed trial")
    if any(not t.completed for t in trials):
        raise ValueError("throughput is defined over completed trials only")
    return float(np.mean([t.tp for t in trials]))


# ---------------------------------------------------------------------------
# tracking

def periods_for_frequency(freq: float) -> int:
    """Whole oscillation periods per segment: 4 at low, 8 at high frequency."""
    return 4 if freq <= 0.5 else 8


@dataclass
class TrackingSegmentSpec:
    frequency: float     # Hz (nominal)
    amplitude: float     # px about the screen center
    periods: int

    @property
    def duration_ms(self) -> int:
        # rounded to the millisecond grid; the reference completes exactly
        # `periods` whole cycles over this duration, so it starts and ends at 0
        return int(round(1000.0 * self.periods / self.frequency))

    def ref(self, t_local_ms) -> np.ndarray:
        t = np.asarray(t_local_ms, dtype=float)
        return self.amplitude * np.sin(
            2.0 * math.pi * self.periods * t / self.duration_ms)


@dataclass
class TrackingSegment:
    frequency: float
    amplitude: float
    periods: int
    ref_series: np.ndarray
    cursor_series: np.ndarray
    mean_abs_error: Optional[float] = None


def tracking_error(segment: TrackingSegment) -> float:
    """Mean absolute reference-minus-cursor error over the segment grid."""
    ref = np.asarray(segment.ref_series, dtype=float)
    cur = np.asarray(segment.cursor_series, dtype=float)
    if ref.shape != cur.shape:
        raise ValueError("ref and cursor series must share one time grid")
    return float(np.mean(np.abs(ref - cur)))


@dataclass
class TrackingPlan:
    test: list[TrackingSegmentSpec]
    training: list[TrackingSegmentSpec]


def make_tracking_plan(amps: Sequence[float],
                       freqs: Sequence[float] = TRACKING_FREQUENCIES,
                       seed: int = 0, training_reps: int = 4) -> TrackingPlan:
    """All amplitude x frequency combinations, seeded order.

    The test block holds each combination exactly once; training holds each
    training_reps times (4 by default). The test order is re-drawn until it
    differs from the first four training segments, so the two orders never
    coincide.
    """
    amps = tuple(float(a) for a in amps)
    if len(set(amps)) != len(amps) or any(a <= 0 for a in amps):
        raise ValueError("amplitudes must be distinct and positive")
    if training_reps < 1:
        raise ValueError("training_reps must be >= 1")
    combos = [(f, a) for f in freqs for a in amps]
    rng = np.random.default_rng((seed, 7))
    training = combos * training_reps
    order = rng.permutation(len(training))
    training = [training[i] for i in order]
    test = list(combos)
    test_order = rng.permutation(len(test))
    test = [test[i] for i in test_order]
    while test == training[:len(test)]:
        test_order = rng.permutation(len(combos))
        test = [combos[i] for i in test_order]

    def to_spec(pairs):
        return [TrackingSegmentSpec(frequency=f, amplitude=a,
                                    periods=periods_for_frequency(f))
                for f, a in pairs]

    return TrackingPlan(test=to_spec(test), training=to_spec(training))


# ---------------------------------------------------------------------------
# session plan

@dataclass
class SessionPlan:
    participant_id: int
    seed: int = 0
    condition_order: Optional[tuple] = None
    targeting_training: int = 30
    targeting_test: int = 60
    tracking_training: int = 16
    tracking_test: int = 4
    target_amplitudes: tuple = DEFAULT_TARGET_AMPLITUDES
    target_widths: tuple = DEFAULT_TARGET_WIDTHS
    tracking_amplitudes: tuple = DEFAULT_TRACKING_AMPLITUDES
    screen_width: float = DEFAULT_SCREEN_WIDTH

    def __post_init__(self):
        if self.condition_order is None:
            # counterbalanced across participants by id parity
            self.condition_order = (("handheld", "knob")
                                    if self.participant_id % 2 == 0
                                    else ("knob", "handheld"))
        self.condition_order = tuple(self.condition_order)
        if sorted(self.condition_order) != sorted(CONDITIONS):
            raise ValueError("condition_order must contain handheld and knob once each")
        combos = len(self.tracking_amplitudes) * len(TRACKING_FREQUENCIES)
        if self.tracking_test != combos:
            raise ValueError(
                f"tracking_test must cover each amplitude/frequency combination "
                f"exactly once ({combos})")
        if self.tracking_training < combos or self.tracking_training % combos:
            raise ValueError(
                f"tracking_training must be a positive multiple of {combos}")

    def to_json_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "seed": self.seed,
            "condition_order": list(self.condition_order),
            "targeting_training": self.targeting_training,
            "targeting_test": self.targeting_test,
            "tracking_training": self.tracking_training,
            "tracking_test": self.tracking_test,
            "target_amplitudes": list(self.target_amplitudes),
            "target_widths": list(self.target_widths),
            "tracking_amplitudes": list(self.tracking_amplitudes),
            "screen_width": self.screen_width,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SessionPlan":
        d = dict(d)
        for key in ("condition_order", "target_amplitudes", "target_widths",
                    "tracking_amplitudes"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def targeting_specs(plan: SessionPlan, condition: str,
                    phase: str) -> list[TargetSpec]:
    """Deterministic trial list for one condition/phase.

    The full amplitude x width x direction crossing is replicated as many
    whole times as fits, topped up with a seeded sample without
    replacement, then shuffled.
    """
    count = plan.targeting_training if phase == "training" else plan.targeting_test
    cond_i = CONDITIONS.index(condition)
    phase_i = 0 if phase == "training" else 1
    rng = np.random.default_rng((plan.seed, 11, cond_i, phase_i))
    start = plan.screen_width / 2.0
    combos = [TargetSpec(amplitude=a, width=w, start_pos=start, direction=d)
              for a in plan.target_amplitudes
              for w in plan.target_widths
              for d in (-1, 1)]
    reps, rem = divmod(count, len(combos))
    specs = combos * reps
    if rem:
        specs += [combos[i] for i in rng.choice(len(combos), size=rem,
                                                replace=False)]
    order = rng.permutation(len(specs))
    return [specs[i] for i in order]


def tracking_specs(plan: SessionPlan, condition: str) -> TrackingPlan:
    cond_i = CONDITIONS.index(condition)
    combos = len(plan.tracking_amplitudes) * len(TRACKING_FREQUENCIES)
    return make_tracking_plan(plan.tracking_amplitudes,
                              TRACKING_FREQUENCIES,
                              seed=plan.seed * 4 + 2 + cond_i,
                              training_reps=plan.tracking_training // combos)


# ---------------------------------------------------------------------------
# synthetic operator

@dataclass
class OperatorParams:
    gain: float                 # deflection units per px of error
    max_deflection: float       # deflection units
    delay_s: float = 0.15
    noise_sd: float = 0.0       # deflection units
    sample_period_ms: int = 8
    reaction_ms: tuple = (300, 600)   # idle time before pressing start

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError("delay must be >= 0")
        if self.gain <= 0 or self.max_deflection <= 0:
            raise ValueError("gain and max_deflection must be > 0")


def default_operator_params(condition: str) -> OperatorParams:
    if condition == "handheld":
        return OperatorParams(gain=0.16, max_deflection=7.5, noise_sd=0.02)
    if condition == "knob":
        return OperatorParams(gain=0.03, max_deflection=1.5, noise_sd=0.004)
    raise ValueError(f"unknown condition {condition!r}")


class SyntheticOperator:
    """Delayed proportional tracker standing in for a participant.

    Emits deflection samples at a fixed cadence: a pure-delay copy of the
    task error scaled by `gain`, clamped to the deflection range, plus
    seeded Gaussian motor noise. Presses the start key after a seeded
    reaction time whenever the task is waiting for one.
    """

    def __init__(self, params: OperatorParams, seed: int = 0):
        self.params = params
        self.rng = np.random.default_rng((seed, 23))
        self.delay_samples = int(round(
            params.delay_s * 1000.0 / params.sample_period_ms))
        self._errors: list[float] = []
        self._idle_count = 0
        self._reaction_target: Optional[int] = None

    def reset_history(self) -> None:
        self._errors.clear()

    def sample(self, phase: str, error_px: Optional[float]) -> tuple:
        """One operator sample: (deflection_command, key_down)."""
        p = self.params
        if phase == "idle":
            self._errors.clear()
            if self._reaction_target is None:
                lo, hi = p.reaction_ms
                react = int(self.rng.integers(lo, hi + 1))
                self._reaction_target = max(1, react // p.sample_period_ms)
                self._idle_count = 0
            self._idle_count += 1
            if self._idle_count >= self._reaction_target:
                self._reaction_target = None
                return 0.0, True
            return 0.0, False
        self._reaction_target = None
        self._errors.append(0.0 if error_px is None else float(error_px))
        if len(self._errors) > self.delay_samples:
            delayed = self._errors[-1 - self.delay_samples]
        else:
            delayed = 0.0
        u = p.gain * delayed
        if p.noise_sd > 0:
            u += self.rng.normal(0.0, p.noise_sd)
        return float(min(max(u, -p.max_deflection), p.max_deflection)), False
