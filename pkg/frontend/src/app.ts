/**
 * Session state machine for the task runner.
 *
 * Holds connection status, the latest server display, the input capture,
 * and the questionnaire form in flight. Contains no trial logic: every
 * metric-bearing decision arrives in Display messages; this layer only
 * samples input, forwards it, and renders. Disabling rendering must not
 * change anything the server logs.
 */

import { Connection } from "./connection.js";
import { InputCapture, InputConfig, handheldInputConfig, knobInputConfig } from "./input.js";
import {
  Condition,
  DisplayMessage,
  ServerMessage,
  makeSample,
} from "./protocol.js";
import { QuestionnaireForm, newForm, submission, canSubmit } from "./questionnaire.js";
import { TracePoint, pushTrace } from "./render.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface AppConfig {
  inputDevice: "gamepad" | "keys";
  samplePeriodMs: number;
}

export class UiSession {
  status: ConnectionStatus = "connecting";
  condition: Condition | null = null;
  screenWidth = 1200;
  latestDisplay: DisplayMessage | null = null;
  form: QuestionnaireForm | null = null;
  trace: TracePoint[] = [];
  input: InputCapture | null = null;
  finished = false;
  renderingEnabled = true;

  constructor(
    readonly conn: Connection,
    readonly config: AppConfig,
  ) {}

  private inputConfigFor(condition: Condition): InputConfig {
    const cfg =
      condition === "handheld"
        ? handheldInputConfig(this.config.inputDevice)
        : knobInputConfig(this.config.inputDevice);
    cfg.samplePeriodMs = this.config.samplePeriodMs;
    return cfg;
  }

  /** Handle one parsed server frame. */
  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.status = "open";
        this.condition = msg.condition;
        this.screenWidth = msg.screen_width;
        this.input = new InputCapture(this.inputConfigFor(msg.condition));
        break;
      case "display": {
        this.latestDisplay = msg;
        if (msg.condition && msg.condition !== this.condition) {
          // block switch: new device, new deflection unit and capture
          this.condition = msg.condition;
          this.input = new InputCapture(this.inputConfigFor(msg.condition));
        }
        const view = msg.view;
        if (view.kind === "tracking") {
          pushTrace(this.trace, {
            tMs: msg.t_ms,
            ref: view.ref_px,
            cursor: msg.cursor_px,
          });
        } else if (view.kind === "questionnaire") {
          if (this.form === null || this.form.kind !== view.quest) {
            this.form = newForm(view.quest);
          }
        }
        if (view.kind !== "questionnaire") {
          this.form = null;
        }
        break;
      }
      case "questionnaire_ack":
        this.form = null;
        break;
      case "done":
        this.finished = true;
        break;
    }
  }

  /**
   * Emit one input sample (heartbeats included). The server ignores
   * samples whose unit does not match the active condition.
   */
  sampleTick(tMs: number): void {
    if (this.input === null || this.condition === null || this.finished) return;
    const s = this.input.tick(tMs);
    const unit = this.condition === "handheld" ? "mm" : "rad";
    this.conn.sendSample(makeSample(s.tMs, s.value, unit, s.buttons),
      this.config.samplePeriodMs);
  }

  submitQuestionnaire(): boolean {
    if (this.form === null || !canSubmit(this.form)) return false;
    this.conn.sendControl(submission(this.form));
    return true;
  }
}
