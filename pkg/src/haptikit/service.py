"""Session engine, persistence, deterministic replay, and headless runs.

The engine advances on an integer-millisecond tick grid driven purely by
ingested sample timestamps, so a live session, a synthetic session and a
replay of either all follow the same code path tick for tick. Every
reported metric is recomputable from the raw sample log alone.

Log format: JSON lines, one object per record, schema version 1. Records:
header, block, sample, display, trial, segment, questionnaire, control,
end. Numbers are serialized with ``repr`` round-tripping, so identical
runs produce byte-identical logs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .controller import ImpedanceConfig, overlay_for_condition
from .device import DeviceParams, StictionProfile, UserLoad
from .harness import (CONDITIONS, MappingConfig, OperatorParams, SessionPlan,
                      SyntheticOperator, TargetSpec, TargetingStateMachine,
                      TrackingSegmentSpec, RATE_GAIN_HANDHELD, RATE_GAIN_KNOB,
                      default_operator_params, targeting_specs, tracking_specs)
from .stats import ParticipantSummary, build_report

LOG_SCHEMA_VERSION = 1
DISPLAY_STRIDE_MS = 16
SAMPLE_PERIOD_MS = 8          # nominal operator/UI cadence (125 Hz)
TRIAL_TIMEOUT_MS = 15000

SESSION_CONFIG_NAME = "session.config.json"
SESSION_LOG_NAME = "session.log.jsonl"
REPORT_NAME = "report.json"


def default_knob_device() -> DeviceParams:
    """Stand-in parameters for the rotary comparison device.

    Only its overlay stiffness is documented; inertia matches the trigger
    device, the handle radius and travel give +/-1.5 rad of rotation, and
    friction is a light constant breakaway.
    """
    return DeviceParams(
        inertia_J=7.91e-4, radius_r=10.0, stroke=30.0, viscous_b=5e-3,
        stiction_profile=StictionProfile.constant(0.3),
        user_load=UserLoad(mass_kg=0.005, stiffness_n_per_mm=0.5,
                           damping_n_per_mm_s=0.01))


def default_handheld_device() -> DeviceParams:
    """Trigger device with a fingertip impedance attached for the study."""
    return DeviceParams(user_load=UserLoad(mass_kg=0.02,
                                           stiffness_n_per_mm=8.0,
                                           damping_n_per_mm_s=0.05))


@dataclass
class ConditionSetup:
    device: DeviceParams
    overlay: ImpedanceConfig
    mapping: MappingConfig

    @property
    def deflection_gain(self) -> float:
        """Measured deflection per shaft radian (signed).

        Handheld deflection is mm of upper-trigger depression: pressing the
        upper trigger drives theta negative, so the gain is -radius. The
        knob reports its angle directly.
        """
        if self.mapping.mode == "handheld":
            return -self.device.radius_r
        return 1.0

    @property
    def deflection_unit(self) -> str:
        return "mm" if self.mapping.mode == "handheld" else "rad"

    @property
    def max_deflection(self) -> float:
        return self.device.theta_limit * abs(self.deflection_gain)


@dataclass
class SessionConfig:
    plan: SessionPlan
    device: DeviceParams = field(default_factory=default_handheld_device)
    overlay: object = "handheld"          # ImpedanceConfig or condition name
    mapping: Optional[MappingConfig] = None
    knob_device: DeviceParams = field(default_factory=default_knob_device)
    knob_overlay: object = "knob"
    knob_mapping: Optional[MappingConfig] = None
    seed: int = 0
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.mapping is None:
            self.mapping = MappingConfig(mode="handheld",
                                         rate_gain=RATE_GAIN_HANDHELD,
                                         screen_width=self.plan.screen_width)
        if self.knob_mapping is None:
            self.knob_mapping = MappingConfig(mode="knob",
                                              rate_gain=RATE_GAIN_KNOB,
                                              screen_width=self.plan.screen_width)

    def _overlay_for(self, condition: str) -> ImpedanceConfig:
        raw = self.overlay if condition == "handheld" else self.knob_overlay
        if isinstance(raw, ImpedanceConfig):
            return raw
        device = self.device if condition == "handheld" else self.knob_device
        return overlay_for_condition(str(raw), radius_mm=device.radius_r,
                                     torque_limit=device.torque_limit)

    def condition_setup(self, condition: str) -> ConditionSetup:
        if condition == "handheld":
            return ConditionSetup(self.device, self._overlay_for(condition),
                                  self.mapping)
        if condition == "knob":
            return ConditionSetup(self.knob_device, self._overlay_for(condition),
                                  self.knob_mapping)
        raise ValueError(f"unknown condition {condition!r}")

    def to_json_dict(self) -> dict:
        def overlay_json(o):
            return o.to_json_dict() if isinstance(o, ImpedanceConfig) else o
        return {
            "plan": self.plan.to_json_dict(),
            "device": self.device.to_json_dict(),
            "overlay": overlay_json(self.overlay),
            "mapping": self.mapping.to_json_dict(),
            "knob_device": self.knob_device.to_json_dict(),
            "knob_overlay": overlay_json(self.knob_overlay),
            "knob_mapping": self.knob_mapping.to_json_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SessionConfig":
        def overlay_parse(o):
            return ImpedanceConfig.from_json_dict(o) if isinstance(o, dict) else o
        return cls(
            plan=SessionPlan.from_json_dict(d["plan"]),
            device=DeviceParams.from_json_dict(d["device"]),
            overlay=overlay_parse(d.get("overlay", "handheld")),
            mapping=(MappingConfig.from_json_dict(d["mapping"])
                     if d.get("mapping") else None),
            knob_device=(DeviceParams.from_json_dict(d["knob_device"])
                         if d.get("knob_device") else default_knob_device()),
            knob_overlay=overlay_parse(d.get("knob_overlay", "knob")),
            knob_mapping=(MappingConfig.from_json_dict(d["knob_mapping"])
                          if d.get("knob_mapping") else None),
            seed=int(d.get("seed", 0)),
            output_dir=d.get("output_dir"),
        )


def default_session_config(participant_id: int, seed: int = 0,
                           output_dir: Optional[str] = None,
                           **plan_overrides) -> SessionConfig:
    plan = SessionPlan(participant_id=participant_id, seed=seed, **plan_overrides)
    return SessionConfig(plan=plan, seed=seed, output_dir=output_dir)


# ---------------------------------------------------------------------------
# log writer / reader

def dumps_record(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class LogWriter:
    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        self._fh = open(self.path, "a" if append else "w", encoding="utf-8")

    def write(self, obj: dict) -> None:
        self._fh.write(dumps_record(obj))
        self._fh.write("\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_log(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(
                    f"corrupt log at line {i + 1}; last valid record is "
                    f"#{len(records)}") from exc
    if not records or records[0].get("type") != "header":
        raise ValueError("log has no header record")
    schema = records[0].get("schema")
    if schema != LOG_SCHEMA_VERSION:
        raise ValueError(f"unsupported log schema {schema!r}; "
                         f"this reader handles {LOG_SCHEMA_VERSION}")
    return records


# ---------------------------------------------------------------------------
# session engine

@dataclass
class Block:
    index: int
    task: str          # 'targeting' | 'tracking'
    condition: str


class SessionEngine:
    """Deterministic tick-grid session logic shared by live, synthetic and
    replay runs.

    Time advances only through :meth:`advance_to`; the active input sample
    is the newest one with a timestamp strictly below the tick being
    computed (zero-order hold, latency at most one sample period).
    """

    def __init__(self, config: SessionConfig, writer: Optional[LogWriter] = None,
                 collect: bool = False):
        self.config = config
        self.writer = writer
        self.collect = collect
        self.collected: list[dict] = []

        plan = config.plan
        self.blocks: list[Block] = []
        i = 0
        for task in ("targeting", "tracking"):
            for condition in plan.condition_order:
                self.blocks.append(Block(index=i, task=task, condition=condition))
                i += 1

        self.cur_t = 0
        self.block_idx = -1
        self.done = False
        self.aborted = False
        self.dropped_samples = 0
        self.trial_count = 0
        self.segment_count = 0
        self.last_display_record: Optional[dict] = None

        self._pending: list[tuple] = []      # (t, u, buttons) not yet active
        self._active_u = 0.0
        self._active_buttons = 0

        self._setup: Optional[ConditionSetup] = None
        self._state = np.zeros(kernels.STATE_SIZE)
        self._cursor_buf = np.empty(4096)

        # targeting bookkeeping
        self._trials: list[tuple] = []       # (phase_name, TargetSpec)
        self._trial_idx = 0
        self._machine: Optional[TargetingStateMachine] = None

        # tracking bookkeeping
        self._segments: list[tuple] = []     # (phase_name, spec, offset, duration)
        self._stream_len = 0
        self._stream_phase: Optional[str] = None   # 'training' | 'test'
        self._stream_queue: list[str] = []
        self._stream_start_t = 0
        self._seg_idx = 0
        self._seg_err_sum = 0.0

        self._phase = "idle"
        self._pending_quest: list[str] = []  # e.g. ['tlx', 'sus']

        if self.writer is not None:
            self._emit({"type": "header", "schema": LOG_SCHEMA_VERSION,
                        "config": config.to_json_dict()})
        self._next_block()

    # -- record plumbing ----------------------------------------------------

    def _emit(self, rec: dict) -> None:
        if self.writer is not None:
            self.writer.write(rec)
        if self.collect and rec["type"] != "sample":
            self.collected.append(rec)

    # -- block / phase management -------------------------------------------

    @property
    def block(self) -> Optional[Block]:
        if 0 <= self.block_idx < len(self.blocks):
            return self.blocks[self.block_idx]
        return None

    @property
    def phase(self) -> str:
        if self.done:
            return "done"
        if self._pending_quest:
            return "questionnaire"
        return self._phase

    @property
    def current_condition(self) -> Optional[str]:
        b = self.block
        return b.condition if b else None

    @property
    def pending_questionnaire(self) -> Optional[str]:
        return self._pending_quest[0] if self._pending_quest else None

    def _next_block(self) -> None:
        self.block_idx += 1
        if self.block_idx >= len(self.blocks):
            self.done = True
            return
        b = self.blocks[self.block_idx]
        self._setup = self.config.condition_setup(b.condition)
        plan = self.config.plan
        self._emit({"type": "block", "t": self.cur_t, "index": b.index,
                    "task": b.task, "condition": b.condition})
        if b.task == "targeting":
            self._trials = ([("training", s) for s in
                             targeting_specs(plan, b.condition, "training")]
                            + [("test", s) for s in
                               targeting_specs(plan, b.condition, "test")])
            self._trial_idx = 0
            self._machine = None
        else:
            self._segments = []
            self._stream_phase = None
            self._stream_queue = ["training", "test"]
        self._phase = "idle"
        self._reset_sim()

    def _reset_sim(self) -> None:
        self._state[:] = 0.0
        self._state[kernels.S_STICKING] = 1.0
        self._state[kernels.S_THETA_HAT_PREV] = math.nan
        self._state[kernels.S_CURSOR] = self._start_cursor()

    def _start_cursor(self) -> float:
        b = self.block
        if b is None:
            return self.config.plan.screen_width / 2.0
        if b.task == "targeting" and self._trial_idx < len(self._trials):
            return self._trials[self._trial_idx][1].start_pos
        return self.config.plan.screen_width / 2.0

    def _build_stream(self, phase_name: str) -> None:
        """Lay out a continuous run of tracking segments (no gaps)."""
        tp = tracking_specs(self.config.plan, self.block.condition)
        specs = tp.training if phase_name == "training" else tp.test
        self._segments = []
        offset = 0
        for s in specs:
            self._segments.append((phase_name, s, offset, s.duration_ms))
            offset += s.duration_ms
        self._stream_len = offset
        self._stream_phase = phase_name
        self._seg_idx = 0
        self._seg_err_sum = 0.0

    # -- ingestion ----------------------------------------------------------

    def ingest_sample(self, t_ms: int, u: float, buttons: int = 0) -> None:
        """Queue one input sample; logged before it can affect trial state."""
        t_ms = int(t_ms)
        rec = {"type": "sample", "t": t_ms, "u": float(u), "buttons": int(buttons)}
        self._emit(rec)
        if t_ms <= self.cur_t or (self._pending and t_ms <= self._pending[-1][0]):
            self.dropped_samples += 1
            return
        self._pending.append((t_ms, float(u), int(buttons)))

    def ingest_questionnaire(self, kind: str, items: list) -> dict:
        """Score and record a questionnaire submission for the current block."""
        from .stats import sus_score, tlx_raw
        if not self._pending_quest:
            raise ValueError("no questionnaire is pending")
        expected = self._pending_quest[0]
        if kind != expected:
            raise ValueError(f"expected questionnaire {expected!r}, got {kind!r}")
        score = (tlx_raw(items) if kind == "tlx" else sus_score(items))
        b = self.block
        rec = {"type": "questionnaire", "t": self.cur_t, "task": b.task,
               "condition": b.condition, "kind": kind,
               "items": [float(v) for v in items], "score": score.value}
        self._emit(rec)
        self._pending_quest.pop(0)
        if not self._pending_quest:
            self._next_block()
        # a submission changes the session state without advancing time;
        # emit the new state right away so clients learn e.g. a condition
        # switch (replay reproduces this display identically)
        self._emit_display(self.cur_t)
        return rec

    def abort_current_trial(self, reason: str = "abort") -> None:
        """External abort (client disconnect): current trial goes incomplete."""
        self._emit({"type": "control", "t": self.cur_t, "action": "abort_trial",
                    "reason": reason})
        self._apply_abort()

    def _apply_abort(self) -> None:
        b = self.block
        if b is None or self.done:
            return
        if b.task == "targeting" and self._machine is not None:
            self._finish_trial(self.cur_t)
        elif b.task == "tracking" and self._phase == "tracking":
            # drop the in-flight stream; the same phase reruns in full on the
            # next key press (its earlier segment records are superseded)
            self._segments = []
            self._stream_phase = None
            self._phase = "idle"
            self._reset_sim()

    # -- observation (for operators / UI) -------------------------------------

    def observe(self) -> dict:
        """Task view at the current tick: phase plus the tracking/targeting error."""
        out = {"t": self.cur_t, "phase": self.phase, "condition": self.current_condition,
               "cursor": float(self._state[kernels.S_CURSOR]), "error": None}
        b = self.block
        if b is None or self.done or self.phase == "questionnaire":
            return out
        if b.task == "targeting":
            if self._trial_idx < len(self._trials):
                spec = self._trials[self._trial_idx][1]
                out["error"] = spec.target_center - out["cursor"]
        elif self._phase == "tracking":
            tl = self.cur_t - self._stream_start_t
            ref = self._ref_at(tl)
            if ref is not None:
                out["error"] = (self.config.plan.screen_width / 2.0 + ref) - out["cursor"]
        return out

    def _ref_at(self, tl: int) -> Optional[float]:
        for _phase, spec, offset, duration in self._segments[self._seg_idx:]:
            if tl <= offset:
                return 0.0
            if tl <= offset + duration:
                return float(spec.ref(tl - offset))
        return None

    # -- display -------------------------------------------------------------

    def _display_view(self, t: int) -> dict:
        b = self.block
        if self.done:
            return {"kind": "done"}
        if self.phase == "questionnaire":
            return {"kind": "questionnaire", "quest": self.pending_questionnaire,
                    "task": b.task, "condition": b.condition}
        if b.task == "targeting":
            if self._trial_idx < len(self._trials):
                spec = self._trials[self._trial_idx][1]
                dwell = 0
                if self._machine is not None:
                    dwell = self._machine.dwell_elapsed_ms(t)
                return {"kind": "target", "center": spec.target_center,
                        "width": spec.width, "dwell_ms": dwell}
            return {"kind": "idle"}
        tl = t - self._stream_start_t if self._phase == "tracking" else 0
        ref = self._ref_at(tl) if self._phase == "tracking" else 0.0
        center = self.config.plan.screen_width / 2.0
        return {"kind": "tracking",
                "ref_px": center + (ref if ref is not None else 0.0)}

    def _emit_display(self, t: int) -> dict:
        b = self.block
        rec = {"type": "display", "t": t,
               "cursor": float(self._state[kernels.S_CURSOR]),
               "phase": self.phase,
               "condition": b.condition if b else None,
               "trial": (self._trial_idx if (b and b.task == "targeting") else
                         self._seg_idx),
               "view": self._display_view(t)}
        self._emit(rec)
        self.last_display_record = rec
        return rec

    # -- core tick processing -------------------------------------------------

    def advance_to(self, t_target: int) -> list[dict]:
        """Process ticks up to and including t_target; returns display records."""
        t_target = int(t_target)
        displays: list[dict] = []
        while self.cur_t < t_target:
            while self._pending and self._pending[0][0] <= self.cur_t:
                _, self._active_u, self._active_buttons = self._pending.pop(0)
            chunk_end = t_target
            if self._pending:
                chunk_end = min(chunk_end, self._pending[0][0])
            self._process_ticks(self.cur_t + 1, chunk_end, displays)
        return displays

    def _process_ticks(self, t_from: int, t_to: int, displays: list) -> None:
        t = t_from
        while t <= t_to:
            if self.done or self.phase in ("questionnaire",):
                t = self._coast(t, t_to, displays)
            elif self.block.task == "targeting":
                t = self._targeting_ticks(t, t_to, displays)
            else:
                t = self._tracking_ticks(t, t_to, displays)
        self.cur_t = t_to

    def _coast(self, t_from: int, t_to: int, displays: list) -> int:
        """Idle/questionnaire/done: no simulation, cursor pinned, displays only."""
        for t in range(t_from, t_to + 1):
            if t % DISPLAY_STRIDE_MS == 0:
                displays.append(self._emit_display(t))
        return t_to + 1

    def _run_kernel(self, n_ticks: int) -> np.ndarray:
        setup = self._setup
        dev = setup.device
        prof = dev.stiction_profile
        if n_ticks > self._cursor_buf.shape[0]:
            self._cursor_buf = np.empty(n_ticks)
        anchor = self._active_u / setup.deflection_gain
        kernels.run_session_chunk(
            self._state, n_ticks, anchor, 1e-3, 10,
            dev.effective_inertia(), dev.effective_damping(),
            dev.user_spring_rotational(), dev.coulomb_ratio,
            dev.velocity_deadband, dev.theta_limit,
            prof.theta_knots, prof.torque_knots, dev.encoder_quantum,
            setup.overlay.stiffness_K, setup.overlay.damping_B,
            setup.overlay.center, setup.overlay.torque_limit,
            setup.overlay.filter_alpha,
            setup.deflection_gain, setup.mapping.rate_gain,
            setup.mapping.deadzone, setup.mapping.screen_width,
            self._cursor_buf)
        return self._cursor_buf

    # -- targeting ------------------------------------------------------------

    def _targeting_ticks(self, t_from: int, t_to: int, displays: list) -> int:
        if self._trial_idx >= len(self._trials):
            return self._coast(t_from, t_to, displays)
        if self._machine is None:
            if self._active_buttons & 1:
                phase_name, spec = self._trials[self._trial_idx]
                self._machine = TargetingStateMachine(spec, path_stride_ms=DISPLAY_STRIDE_MS)
                self._machine.update(t_from, spec.start_pos, key_down=True)
                self._phase = "armed"
                if t_from % DISPLAY_STRIDE_MS == 0:
                    displays.append(self._emit_display(t_from))
                return t_from + 1
            return self._coast(t_from, t_to, displays)

        # trial running: simulate the whole chunk, then walk its ticks
        n = t_to - t_from + 1
        cursor = self._run_kernel(n)
        for i in range(n):
            t = t_from + i
            phase = self._machine.update(t, float(cursor[i]))
            self._phase = phase
            if t % DISPLAY_STRIDE_MS == 0:
                displays.append(self._emit_display(t))
            timeout = (t - self._machine.t0_ms) >= TRIAL_TIMEOUT_MS
            if phase == "complete" or timeout:
                self._finish_trial(t)
                return t + 1
        return t_to + 1

    def _finish_trial(self, t: int) -> None:
        phase_name, spec = self._trials[self._trial_idx]
        trial = self._machine.result()
        rec = {"type": "trial", "t": t, "task": "targeting",
               "condition": self.block.condition, "phase": phase_name,
               "index": self._trial_idx,
               "amplitude": spec.amplitude, "width": spec.width,
               "start_pos": spec.start_pos, "direction": spec.direction,
               "id_bits": spec.id_bits, "completed": trial.completed,
               "t0": trial.t0_ms, "dwell_start": trial.dwell_start_ms,
               "mt_ms": (trial.dwell_start_ms - trial.t0_ms
                         if trial.completed else None),
               "tp": (trial.tp if trial.completed else None)}
        self._emit(rec)
        self.trial_count += 1
        self._trial_idx += 1
        self._machine = None
        self._phase = "idle"
        if self._trial_idx >= len(self._trials):
            self._pending_quest = ["tlx", "sus"]
        self._reset_sim()

    # -- tracking ---------------------------------------------------------------

    def _tracking_ticks(self, t_from: int, t_to: int, displays: list) -> int:
        if self._phase != "tracking":
            if (self._active_buttons & 1) and self._stream_queue:
                self._build_stream(self._stream_queue[0])
                self._stream_start_t = t_from
                self._phase = "tracking"
                self._reset_sim()
                if t_from % DISPLAY_STRIDE_MS == 0:
                    displays.append(self._emit_display(t_from))
                return t_from + 1
            return self._coast(t_from, t_to, displays)

        # cap the chunk at the end of the stream
        stream_end_t = self._stream_start_t + self._stream_len
        t_hi = min(t_to, stream_end_t)
        n = t_hi - t_from + 1
        if n > 0:
            cursor = self._run_kernel(n)
            center = self.config.plan.screen_width / 2.0
            for i in range(n):
                t = t_from + i
                tl = t - self._stream_start_t
                _ph, spec, offset, duration = self._segments[self._seg_idx]
                ref = center + float(spec.ref(tl - offset))
                self._seg_err_sum += abs(ref - float(cursor[i]))
                if t % DISPLAY_STRIDE_MS == 0:
                    displays.append(self._emit_display(t))
                if tl >= offset + duration:
                    self._finish_segment(t)
                    if self._phase != "tracking":
                        return t + 1
            return t_hi + 1
        return t_to + 1

    def _finish_segment(self, t: int) -> None:
        phase_name, spec, offset, duration = self._segments[self._seg_idx]
        err = self._seg_err_sum / duration
        rec = {"type": "segment", "t": t, "task": "tracking",
               "condition": self.block.condition, "phase": phase_name,
               "index": self._seg_idx, "frequency": spec.frequency,
               "amplitude": spec.amplitude, "periods": spec.periods,
               "duration_ms": duration, "mean_abs_error": err}
        self._emit(rec)
        self.segment_count += 1
        self._seg_idx += 1
        self._seg_err_sum = 0.0
        if self._seg_idx >= len(self._segments):
            self._stream_queue.pop(0)
            if not self._stream_queue:
                self._pending_quest = ["tlx", "sus"]
            self._phase = "idle"

    # -- finalize ----------------------------------------------------------------

    def finalize(self) -> None:
        self._emit({"type": "end", "t": self.cur_t, "aborted": self.aborted,
                    "dropped_samples": self.dropped_samples,
                    "trials": self.trial_count, "segments": self.segment_count})
        if self.writer is not None:
            self.writer.flush()

# ---------------------------------------------------------------------------
# synthetic (headless) sessions

def _synthesize_questionnaire(kind: str, seed_key: tuple) -> list[float]:
    rng = np.random.default_rng(seed_key)
    if kind == "tlx":
        return [float(np.clip(round(v, 1), 0.0, 100.0))
                for v in rng.normal(40.0, 12.0, 6)]
    items = []
    for i in range(10):
        if i % 2 == 0:
            items.append(float(rng.integers(4, 6)))   # odd items: agree
        else:
            items.append(float(rng.integers(1, 3)))   # even items: disagree
    return items


def simulate_session(config: SessionConfig, output_dir,
                     operator_params: Optional[dict] = None,
                     max_sim_seconds: float = 3600.0) -> Path:
    """Run a full session with the synthetic operator; returns the log path.

    The operator emits one sample every SAMPLE_PERIOD_MS on the engine's
    own clock, so identical configs and seeds give byte-identical logs.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / SESSION_CONFIG_NAME
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump(config.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    log_path = out / SESSION_LOG_NAME
    writer = LogWriter(log_path)
    engine = SessionEngine(config, writer=writer)

    operators = {}
    for i, cond in enumerate(CONDITIONS):
        params = default_operator_params(cond)
        if operator_params and cond in operator_params:
            params = operator_params[cond]
        operators[cond] = SyntheticOperator(params,
                                            seed=(config.seed * 131 + 17 + i))

    quest_counter = 0
    t = 0
    limit = int(max_sim_seconds * 1000)
    while not engine.done and t < limit:
        t += SAMPLE_PERIOD_MS
        obs = engine.observe()
        op = operators[engine.current_condition or "handheld"]
        op_phase = "idle" if obs["phase"] in ("idle", "questionnaire") else "active"
        u, key = op.sample(op_phase, obs["error"])
        engine.ingest_sample(t, u, 1 if key else 0)
        engine.advance_to(t)
        while engine.phase == "questionnaire":
            kind = engine.pending_questionnaire
            items = _synthesize_questionnaire(
                kind, (config.seed, engine.block.index, quest_counter, 41))
            engine.ingest_questionnaire(kind, items)
            quest_counter += 1
    if not engine.done:
        engine.aborted = True
    engine.finalize()
    writer.close()
    return log_path


# ---------------------------------------------------------------------------
# replay

@dataclass
class ReplayResult:
    log_path: str
    records: int
    recomputed: int
    mismatches: list
    aborted: bool

    @property
    def ok(self) -> bool:
        return not self.mismatches


_REPLAYED_TYPES = ("block", "display", "trial", "segment", "questionnaire")


def replay_records(records: list[dict]) -> tuple[SessionEngine, list[dict]]:
    """Drive a fresh engine with the logged inputs; returns recomputed records."""
    config = SessionConfig.from_json_dict(records[0]["config"])
    engine = SessionEngine(config, writer=None, collect=True)
    for rec in records[1:]:
        typ = rec["type"]
        if typ == "sample":
            engine.ingest_sample(rec["t"], rec["u"], rec.get("buttons", 0))
            engine.advance_to(rec["t"])
        elif typ == "questionnaire":
            engine.ingest_questionnaire(rec["kind"], rec["items"])
        elif typ == "control" and rec.get("action") == "abort_trial":
            engine.advance_to(rec["t"])
            engine.abort_current_trial(rec.get("reason", "abort"))
    return engine, engine.collected


def replay_log(path) -> ReplayResult:
    """Recompute all trial state from the raw samples and diff the log.

    Every block/display/trial/segment/questionnaire record must be
    reproduced exactly; any edit to a logged sample or outcome flags the
    records it touches.
    """
    records = read_log(path)
    engine, recomputed = replay_records(records)
    logged = [r for r in records if r.get("type") in _REPLAYED_TYPES]
    # the replay engine also re-emits control records; drop non-logged types
    recomputed = [r for r in recomputed if r.get("type") in _REPLAYED_TYPES]

    mismatches = []
    for i, (a, b) in enumerate(zip(logged, recomputed)):
        if a != b:
            mismatches.append({"index": i, "logged": a, "recomputed": b})
    if len(logged) != len(recomputed):
        mismatches.append({"index": min(len(logged), len(recomputed)),
                           "logged": f"{len(logged)} records",
                           "recomputed": f"{len(recomputed)} records"})
    aborted = bool(records[-1].get("aborted", False)) \
        if records[-1].get("type") == "end" else True
    return ReplayResult(log_path=str(path), records=len(records),
                        recomputed=len(recomputed), mismatches=mismatches,
                        aborted=aborted)


def resume_session(log_path) -> tuple[SessionEngine, LogWriter]:
    """Rebuild engine state from an interrupted log and reopen it for append.

    The log must not have an end record. The returned engine continues
    exactly where the samples left off (deterministic recomputation).
    """
    records = read_log(log_path)
    if records[-1].get("type") == "end":
        raise ValueError("session already finalized; nothing to resume")
    engine, _ = replay_records(records)
    writer = LogWriter(log_path, append=True)
    engine.writer = writer
    engine.collect = False
    engine.collected = []
    return engine, writer


# ---------------------------------------------------------------------------
# analysis over session logs

def _freq_level(freq: float) -> str:
    return "low" if freq <= 0.5 else "high"


def extract_participant(path) -> ParticipantSummary:
    """Reduce one session log to the report inputs.

    Test trials/segments only; reruns of an aborted tracking stream
    supersede earlier records with the same identity.
    """
    records = read_log(path)
    config = SessionConfig.from_json_dict(records[0]["config"])
    plan = config.plan
    amps = sorted(plan.tracking_amplitudes)
    amp_level = {amps[0]: "low", amps[-1]: "high"}

    summary = ParticipantSummary(participant_id=plan.participant_id)
    tps: dict = {c: [] for c in CONDITIONS}
    segs: dict = {}
    for rec in records:
        typ = rec.get("type")
        if typ == "trial" and rec["phase"] == "test" and rec["completed"]:
            tps[rec["condition"]].append(rec["tp"])
        elif typ == "segment" and rec["phase"] == "test":
            key = (rec["condition"], _freq_level(rec["frequency"]),
                   amp_level.get(rec["amplitude"], "high"))
            segs[key] = rec["mean_abs_error"]   # last occurrence wins
        elif typ == "questionnaire":
            key = (rec["task"], rec["condition"])
            if rec["kind"] == "tlx":
                summary.tlx[key] = rec["score"]
            else:
                summary.sus[key] = rec["score"]
    for c in CONDITIONS:
        if tps[c]:
            summary.throughput[c] = float(np.mean(tps[c]))
    summary.tracking_errors = segs
    return summary


def analyze_sessions(session_dir, out_path=None):
    """Build the stats report from every session log under session_dir."""
    session_dir = Path(session_dir)
    logs = sorted(session_dir.rglob("*.jsonl"))
    if not logs:
        raise FileNotFoundError(f"no .jsonl session logs under {session_dir}")
    participants = [extract_participant(p) for p in logs]
    report = build_report(participants)
    if out_path is not None:
        from .stats import report_to_json_dict, report_to_text
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report_to_json_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        txt = out_path.with_suffix(".txt")
        with open(txt, "w", encoding="utf-8") as fh:
            fh.write(report_to_text(report))
    return report
