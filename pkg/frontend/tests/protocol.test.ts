import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ControlMessage,
  DisplayMessage,
  SampleMessage,
  makeSample,
  parseServerMessage,
  serialize,
} from "../src/protocol.js";

const GOLDEN = join(__dirname, "golden");

function golden(name: string): unknown {
  return JSON.parse(readFileSync(join(GOLDEN, name), "utf-8"));
}

describe("golden message schemas", () => {
  it("accepts every golden display frame", () => {
    for (const name of [
      "display_target.json",
      "display_tracking.json",
      "display_questionnaire.json",
    ]) {
      const msg = parseServerMessage(JSON.stringify(golden(name)));
      expect(msg, name).not.toBeNull();
      expect(msg!.type).toBe("display");
      const display = msg as DisplayMessage;
      // 16 ms cadence plus state pushes at questionnaire submissions
      expect(Number.isInteger(display.t_ms) && display.t_ms >= 0).toBe(true);
      expect(display.condition === "handheld" || display.condition === "knob").toBe(true);
    }
  });

  it("sample goldens round-trip through our serializer", () => {
    for (const name of ["sample_handheld.json", "sample_knob.json"]) {
      const raw = golden(name) as SampleMessage;
      const mine = makeSample(
        raw.t_ms,
        raw.deflection.value,
        raw.deflection.unit,
        raw.buttons,
      );
      expect(JSON.parse(serialize(mine))).toEqual(raw);
    }
  });

  it("control goldens round-trip through our serializer", () => {
    for (const name of ["control_start.json", "control_tlx.json",
                        "control_sus.json", "control_abort.json"]) {
      const raw = golden(name) as ControlMessage;
      expect(JSON.parse(serialize(raw))).toEqual(raw);
    }
  });

  it("accepts hello/done/questionnaire_ack goldens", () => {
    for (const name of ["hello.json", "done.json", "questionnaire_ack.json"]) {
      expect(parseServerMessage(JSON.stringify(golden(name))), name).not.toBeNull();
    }
  });

  it("covers every golden file in this suite", () => {
    const known = new Set([
      "display_target.json", "display_tracking.json",
      "display_questionnaire.json", "sample_handheld.json", "sample_knob.json",
      "control_start.json", "control_tlx.json", "control_sus.json",
      "control_abort.json", "hello.json", "done.json", "questionnaire_ack.json",
    ]);
    for (const f of readdirSync(GOLDEN)) {
      expect(known.has(f), `golden file ${f} lacks a schema test`).toBe(true);
    }
  });
});

describe("parse validation", () => {
  it("rejects malformed frames instead of guessing", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('{"type": "display"}')).toBeNull();
    expect(parseServerMessage('{"type": "mystery", "t_ms": 1}')).toBeNull();
    expect(
      parseServerMessage(
        '{"type": "display", "t_ms": 16, "cursor_px": "wat", "phase": "idle", "trial_id": 0, "view": {"kind": "idle"}}',
      ),
    ).toBeNull();
    expect(
      parseServerMessage(
        '{"type": "display", "t_ms": 16, "cursor_px": 1, "phase": "idle", "trial_id": 0, "view": {"kind": "blob"}}',
      ),
    ).toBeNull();
  });

  it("serializes newline-free frames", () => {
    const text = serialize(makeSample(8, 0.25, "mm"));
    expect(text.includes("\n")).toBe(false);
  });
});
