/**
 * Input capture: turns keys or gamepad analog triggers into signed
 * deflection samples at a fixed cadence, heartbeats included.
 *
 * Handheld emulation: two analog triggers (or two keys) produce a net
 * deflection in mm of upper-trigger depression; pressing both equally
 * cancels, like the mechanically coupled pair. The knob maps a wheel or
 * the same keys onto shaft radians. Key mode ramps the deflection while
 * held and spring-returns on release, standing in visually for the
 * centering overlay a browser cannot render as force.
 */

export type InputDevice = "gamepad" | "keys";

export interface InputConfig {
  device: InputDevice;
  unit: "mm" | "rad";
  /** full-scale deflection in `unit` (7.5 mm triggers, 1.5 rad knob) */
  maxDeflection: number;
  /** key mode: deflection gained per second while a key is held */
  rampPerSecond: number;
  /** key mode: return rate toward zero once released */
  springPerSecond: number;
  samplePeriodMs: number;
  /** linear gain on gamepad trigger values (calibration) */
  gamepadScale: number;
}

export function handheldInputConfig(device: InputDevice): InputConfig {
  return {
    device,
    unit: "mm",
    maxDeflection: 7.5,
    rampPerSecond: 30.0,
    springPerSecond: 60.0,
    samplePeriodMs: 8,
    gamepadScale: 1.0,
  };
}

export function knobInputConfig(device: InputDevice): InputConfig {
  return {
    device,
    unit: "rad",
    maxDeflection: 1.5,
    rampPerSecond: 6.0,
    springPerSecond: 12.0,
    samplePeriodMs: 8,
    gamepadScale: 1.0,
  };
}

export interface InputSample {
  tMs: number;
  value: number;
  buttons: number;
}

export class InputCapture {
  private upperHeld = false;
  private lowerHeld = false;
  private upperAnalog = 0;
  private lowerAnalog = 0;
  private startPressed = false;
  private deflection = 0;
  private lastTickMs: number | null = null;

  constructor(readonly config: InputConfig) {}

  /** Key state, e.g. ArrowRight/ArrowLeft or the two bumper keys. */
  setKey(which: "upper" | "lower", down: boolean): void {
    if (which === "upper") this.upperHeld = down;
    else this.lowerHeld = down;
  }

  /** Analog trigger positions in [0, 1]; upper drives the cursor right. */
  setGamepadTriggers(upper: number, lower: number): void {
    this.upperAnalog = Math.min(Math.max(upper, 0), 1);
    this.lowerAnalog = Math.min(Math.max(lower, 0), 1);
  }

  pressStart(): void {
    this.startPressed = true;
  }

  get currentDeflection(): number {
    return this.deflection;
  }

  /**
   * Advance to `tMs` and emit one sample. Call once per sample period;
   * emits even at zero deflection so the server always has a heartbeat.
   */
  tick(tMs: number): InputSample {
    const dtS =
      this.lastTickMs === null
        ? this.config.samplePeriodMs / 1000
        : Math.max(tMs - this.lastTickMs, 0) / 1000;
    this.lastTickMs = tMs;

    const cfg = this.config;
    if (cfg.device === "gamepad") {
      const net = (this.upperAnalog - this.lowerAnalog) * cfg.gamepadScale;
      this.deflection = net * cfg.maxDeflection;
    } else {
      const drive = (this.upperHeld ? 1 : 0) - (this.lowerHeld ? 1 : 0);
      if (drive !== 0) {
        this.deflection += drive * cfg.rampPerSecond * dtS;
      } else if (this.deflection !== 0) {
        const back = cfg.springPerSecond * dtS;
        this.deflection =
          Math.abs(this.deflection) <= back
            ? 0
            : this.deflection - Math.sign(this.deflection) * back;
      }
      this.deflection = Math.min(
        Math.max(this.deflection, -cfg.maxDeflection),
        cfg.maxDeflection,
      );
    }

    const buttons = this.startPressed ? 1 : 0;
    this.startPressed = false;
    return { tMs, value: this.deflection, buttons };
  }
}

/** Median gap between consecutive sample timestamps, for cadence checks. */
export function medianGapMs(timestamps: number[]): number {
  if (timestamps.length < 2) return NaN;
  const gaps = timestamps.slice(1).map((t, i) => t - timestamps[i]);
  gaps.sort((a, b) => a - b);
  const mid = Math.floor(gaps.length / 2);
  return gaps.length % 2 ? gaps[mid] : (gaps[mid - 1] + gaps[mid]) / 2;
}
