/**
 * WebSocket client wrapper: outbound sample queue with drop-oldest
 * backpressure, staleness tracking for the "connection degraded" banner,
 * and a gap log so sample cadence is measurable, never hidden.
 */

import {
  ControlMessage,
  SampleMessage,
  ServerMessage,
  parseServerMessage,
  serialize,
} from "./protocol.js";

/** Minimal socket surface so tests can substitute a fake. */
export interface SocketLike {
  send(data: string): void;
  readonly bufferedAmount?: number;
}

export const STALE_DISPLAY_MS = 250;
export const MAX_QUEUED_SAMPLE_MS = 200;

export class Connection {
  private queue: SampleMessage[] = [];
  droppedSamples = 0;
  lastDisplayAtMs: number | null = null;
  sampleGapsMs: number[] = [];
  private lastSampleSentMs: number | null = null;

  constructor(
    private socket: SocketLike,
    private sendable: () => boolean = () => true,
  ) {}

  /** Queue a sample; beyond ~200 ms of backlog the oldest are dropped (counted). */
  sendSample(msg: SampleMessage, periodMs: number): void {
    this.queue.push(msg);
    const maxQueued = Math.max(1, Math.floor(MAX_QUEUED_SAMPLE_MS / periodMs));
    while (this.queue.length > maxQueued) {
      this.queue.shift();
      this.droppedSamples += 1;
    }
    this.flush();
  }

  sendControl(msg: ControlMessage): void {
    this.socket.send(serialize(msg));
  }

  flush(): void {
    while (this.queue.length > 0 && this.sendable()) {
      const msg = this.queue.shift()!;
      if (this.lastSampleSentMs !== null) {
        this.sampleGapsMs.push(msg.t_ms - this.lastSampleSentMs);
      }
      this.lastSampleSentMs = msg.t_ms;
      this.socket.send(serialize(msg));
    }
  }

  /** Parse an inbound frame and update staleness bookkeeping. */
  receive(text: string, nowMs: number): ServerMessage | null {
    const msg = parseServerMessage(text);
    if (msg && msg.type === "display") {
      this.lastDisplayAtMs = nowMs;
    }
    return msg;
  }

  /** True once no display has arrived for STALE_DISPLAY_MS. */
  isStale(nowMs: number): boolean {
    return (
      this.lastDisplayAtMs !== null &&
      nowMs - this.lastDisplayAtMs > STALE_DISPLAY_MS
    );
  }
}
