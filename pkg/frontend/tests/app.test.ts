import { describe, expect, it } from "vitest";

import { UiSession } from "../src/app.js";
import { Connection } from "../src/connection.js";
import { serialize } from "../src/protocol.js";

class FakeSocket {
  sent: string[] = [];
  send(data: string) {
    this.sent.push(data);
  }
}

function makeSession() {
  const socket = new FakeSocket();
  const conn = new Connection(socket);
  const session = new UiSession(conn, { inputDevice: "gamepad", samplePeriodMs: 8 });
  return { socket, conn, session };
}

const hello = JSON.stringify({
  type: "hello", phase: "idle", t_ms: 0, condition: "handheld",
  participant: 1, screen_width: 1200,
});

function display(tMs: number, condition: string, view: object, phase = "moving") {
  return JSON.stringify({
    type: "display", t_ms: tMs, cursor_px: 600, phase, condition,
    trial_id: 0, view,
  });
}

describe("UiSession", () => {
  it("configures input from hello and emits unit-tagged heartbeats", () => {
    const { socket, conn, session } = makeSession();
    session.handleMessage(conn.receive(hello, 0)!);
    expect(session.condition).toBe("handheld");
    session.sampleTick(8);
    const sent = JSON.parse(socket.sent[0]);
    expect(sent).toEqual({
      type: "sample", t_ms: 8,
      deflection: { value: 0, unit: "mm" }, buttons: 0,
    });
  });

  it("switches deflection unit when the display condition changes", () => {
    const { socket, conn, session } = makeSession();
    session.handleMessage(conn.receive(hello, 0)!);
    session.handleMessage(
      conn.receive(display(16, "knob", { kind: "idle" }, "idle"), 16)!,
    );
    expect(session.condition).toBe("knob");
    session.sampleTick(24);
    const sent = JSON.parse(socket.sent.at(-1)!);
    expect(sent.deflection.unit).toBe("rad");
  });

  it("opens a questionnaire form when the view asks for one", () => {
    const { conn, session } = makeSession();
    session.handleMessage(conn.receive(hello, 0)!);
    session.handleMessage(conn.receive(display(32, "handheld", {
      kind: "questionnaire", quest: "tlx", task: "targeting",
      condition: "handheld",
    }, "questionnaire"), 32)!);
    expect(session.form?.kind).toBe("tlx");
    expect(session.submitQuestionnaire()).toBe(false); // unanswered

    for (let i = 0; i < 6; i++) session.form && (session.form.responses[i] = 35);
    expect(session.submitQuestionnaire()).toBe(true);
  });

  it("keeps a tracking trace and stops sampling when done", () => {
    const { socket, conn, session } = makeSession();
    session.handleMessage(conn.receive(hello, 0)!);
    session.handleMessage(
      conn.receive(display(16, "handheld", { kind: "tracking", ref_px: 640 }, "tracking"), 16)!,
    );
    expect(session.trace).toHaveLength(1);
    session.handleMessage(
      conn.receive(JSON.stringify({ type: "done", t_ms: 64, trials: 1, segments: 8 }), 64)!,
    );
    const before = socket.sent.length;
    session.sampleTick(72);
    expect(socket.sent.length).toBe(before);
  });
});

describe("Connection backpressure and staleness", () => {
  it("drops the oldest samples beyond the queue budget", () => {
    const socket = new FakeSocket();
    let open = false;
    const conn = new Connection(socket, () => open);
    for (let t = 8; t <= 400; t += 8) {
      conn.sendSample(
        { type: "sample", t_ms: t, deflection: { value: 0, unit: "mm" }, buttons: 0 },
        8,
      );
    }
    expect(conn.droppedSamples).toBeGreaterThan(0);
    open = true;
    conn.flush();
    const first = JSON.parse(socket.sent[0]);
    expect(first.t_ms).toBeGreaterThan(8); // oldest were dropped, not hidden
  });

  it("flags staleness after 250 ms without a display", () => {
    const socket = new FakeSocket();
    const conn = new Connection(socket);
    conn.receive(display(16, "handheld", { kind: "idle" }, "idle"), 1000);
    expect(conn.isStale(1100)).toBe(false);
    expect(conn.isStale(1300)).toBe(true);
  });

  it("measures sample gaps instead of hiding them", () => {
    const socket = new FakeSocket();
    const conn = new Connection(socket);
    for (const t of [8, 16, 40]) {
      conn.sendSample(
        { type: "sample", t_ms: t, deflection: { value: 0, unit: "mm" }, buttons: 0 },
        8,
      );
    }
    expect(conn.sampleGapsMs).toEqual([8, 24]);
  });
});

describe("wire hygiene", () => {
  it("all outbound frames are newline-free JSON", () => {
    const { socket, conn, session } = makeSession();
    session.handleMessage(conn.receive(hello, 0)!);
    session.sampleTick(8);
    conn.sendControl({ type: "control", action: "start_trial", t_ms: 16 });
    for (const frame of socket.sent) {
      expect(frame.includes("\n")).toBe(false);
      expect(() => JSON.parse(frame)).not.toThrow();
    }
    expect(() => serialize({ type: "control", action: "abort" })).not.toThrow();
  });
});
