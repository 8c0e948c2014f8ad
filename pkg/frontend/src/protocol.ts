/**
 * Wire messages spoken with the session service (see docs/protocol.md).
 * Newline-free JSON over a WebSocket; all timestamps are integer
 * milliseconds since session start. The client renders what the server
 * sends and never runs trial logic of its own.
 */

export type DeflectionUnit = "mm" | "rad";
export type Condition = "handheld" | "knob";
export type Phase =
  | "idle"
  | "armed"
  | "moving"
  | "dwell"
  | "tracking"
  | "questionnaire"
  | "done";

export interface SampleMessage {
  type: "sample";
  t_ms: number;
  deflection: { value: number; unit: DeflectionUnit };
  buttons: number;
}

export interface TargetView {
  kind: "target";
  center: number;
  width: number;
  dwell_ms: number;
}

export interface TrackingView {
  kind: "tracking";
  ref_px: number;
}

export interface QuestionnaireView {
  kind: "questionnaire";
  quest: "tlx" | "sus";
  task: string;
  condition: Condition;
}

export interface IdleView {
  kind: "idle";
}

export interface DoneView {
  kind: "done";
}

export type DisplayView =
  | TargetView
  | TrackingView
  | QuestionnaireView
  | IdleView
  | DoneView;

export interface DisplayMessage {
  type: "display";
  t_ms: number;
  cursor_px: number;
  phase: Phase;
  /** active input condition; null once the session is done */
  condition: Condition | null;
  trial_id: number;
  view: DisplayView;
}

export interface HelloMessage {
  type: "hello";
  phase: Phase;
  t_ms: number;
  condition: Condition;
  participant: number;
  screen_width: number;
}

export interface DoneMessage {
  type: "done";
  t_ms: number;
  trials: number;
  segments: number;
}

export interface QuestionnaireAckMessage {
  type: "questionnaire_ack";
  kind: "tlx" | "sus";
  score: number;
}

export type ControlMessage =
  | { type: "control"; action: "start_trial"; t_ms?: number }
  | { type: "control"; action: "abort" }
  | {
      type: "control";
      action: "questionnaire_submit";
      kind: "tlx" | "sus";
      items: number[];
    };

export type ServerMessage =
  | HelloMessage
  | DisplayMessage
  | DoneMessage
  | QuestionnaireAckMessage;

const isNum = (v: unknown): v is number =>
  typeof v === "number" && Number.isFinite(v);

function isView(v: unknown): v is DisplayView {
  if (typeof v !== "object" || v === null) return false;
  const view = v as Record<string, unknown>;
  switch (view.kind) {
    case "target":
      return isNum(view.center) && isNum(view.width) && isNum(view.dwell_ms);
    case "tracking":
      return isNum(view.ref_px);
    case "questionnaire":
      return (
        (view.quest === "tlx" || view.quest === "sus") &&
        typeof view.task === "string" &&
        (view.condition === "handheld" || view.condition === "knob")
      );
    case "idle":
    case "done":
      return true;
    default:
      return false;
  }
}

/** Parse one server frame; returns null for anything malformed. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "display":
      if (
        isNum(msg.t_ms) &&
        isNum(msg.cursor_px) &&
        typeof msg.phase === "string" &&
        isNum(msg.trial_id) &&
        isView(msg.view)
      ) {
        return msg as unknown as DisplayMessage;
      }
      return null;
    case "hello":
      if (
        isNum(msg.t_ms) &&
        isNum(msg.screen_width) &&
        (msg.condition === "handheld" || msg.condition === "knob")
      ) {
        return msg as unknown as HelloMessage;
      }
      return null;
    case "done":
      return isNum(msg.t_ms) ? (msg as unknown as DoneMessage) : null;
    case "questionnaire_ack":
      return isNum(msg.score) ? (msg as unknown as QuestionnaireAckMessage) : null;
    default:
      return null;
  }
}

export function makeSample(
  t_ms: number,
  value: number,
  unit: DeflectionUnit,
  buttons = 0,
): SampleMessage {
  return { type: "sample", t_ms, deflection: { value, unit }, buttons };
}

/** Serialize for the wire; server requires newline-free frames. */
export function serialize(msg: SampleMessage | ControlMessage): string {
  const text = JSON.stringify(msg);
  if (text.includes("\n")) {
    throw new Error("wire frames must be newline-free");
  }
  return text;
}
