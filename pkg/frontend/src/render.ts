/**
 * Canvas rendering of the server-authoritative display stream.
 *
 * Targeting: cursor plus the target band of width W with a dwell progress
 * bar. Tracking: the reference trace scrolling left with the current
 * reference point and the cursor. The drawing surface is a narrow subset
 * of CanvasRenderingContext2D so tests can record calls on a stub.
 */

import { DisplayMessage } from "./protocol.js";

export interface DrawContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

export interface ViewportSize {
  width: number;
  height: number;
}

export interface TracePoint {
  tMs: number;
  ref: number;
  cursor: number;
}

const DWELL_TOTAL_MS = 2000;
const TRACE_WINDOW_MS = 5000;

export function renderFrame(
  ctx: DrawContext,
  size: ViewportSize,
  display: DisplayMessage,
  screenWidth: number,
  trace: TracePoint[],
  degraded: boolean,
): void {
  ctx.clearRect(0, 0, size.width, size.height);
  const toX = (px: number) => (px / screenWidth) * size.width;
  const midY = size.height / 2;

  const view = display.view;
  if (view.kind === "target") {
    // target band of width W centered on the goal
    ctx.fillStyle = "#c8e6c9";
    ctx.fillRect(toX(view.center - view.width / 2), midY - 60, Math.max(toX(view.width), 1), 120);
    ctx.strokeStyle = "#2e7d32";
    ctx.lineWidth = 2;
    ctx.strokeRect(toX(view.center - view.width / 2), midY - 60, Math.max(toX(view.width), 1), 120);
    drawCursor(ctx, toX(display.cursor_px), midY);
    if (view.dwell_ms > 0) {
      const frac = Math.min(view.dwell_ms / DWELL_TOTAL_MS, 1);
      ctx.fillStyle = "#1565c0";
      ctx.fillRect(10, 10, (size.width - 20) * frac, 8);
    }
    if (display.phase === "idle") {
      ctx.fillStyle = "#333";
      ctx.font = "16px sans-serif";
      ctx.fillText("press space to begin the trial", 20, size.height - 20);
    }
  } else if (view.kind === "tracking") {
    drawTrace(ctx, size, trace, display.t_ms, toX);
    // current reference marker and cursor
    ctx.fillStyle = "#2e7d32";
    ctx.beginPath();
    ctx.arc(toX(view.ref_px), midY - 40, 6, 0, Math.PI * 2);
    ctx.fill();
    drawCursor(ctx, toX(display.cursor_px), midY);
    if (display.phase === "idle") {
      ctx.fillStyle = "#333";
      ctx.font = "16px sans-serif";
      ctx.fillText("press space to start tracking", 20, size.height - 20);
    }
  } else if (view.kind === "questionnaire") {
    ctx.fillStyle = "#333";
    ctx.font = "18px sans-serif";
    const name = view.quest === "tlx" ? "NASA-TLX" : "SUS";
    ctx.fillText(`${name} for ${view.task} / ${view.condition}`, 20, 40);
  } else if (view.kind === "done") {
    ctx.fillStyle = "#333";
    ctx.font = "20px sans-serif";
    ctx.fillText("session complete, thank you", 20, 40);
  } else {
    ctx.fillStyle = "#333";
    ctx.font = "16px sans-serif";
    ctx.fillText("waiting for the next trial", 20, 40);
  }

  if (degraded) {
    ctx.fillStyle = "#b71c1c";
    ctx.fillRect(0, 0, size.width, 28);
    ctx.fillStyle = "#fff";
    ctx.font = "14px sans-serif";
    ctx.fillText("connection degraded: stale display", 10, 19);
  }
}

function drawCursor(ctx: DrawContext, x: number, midY: number): void {
  ctx.fillStyle = "#d84315";
  ctx.beginPath();
  ctx.moveTo(x, midY - 12);
  ctx.lineTo(x - 8, midY + 10);
  ctx.lineTo(x + 8, midY + 10);
  ctx.fill();
}

function drawTrace(
  ctx: DrawContext,
  size: ViewportSize,
  trace: TracePoint[],
  nowMs: number,
  toX: (px: number) => number,
): void {
  // reference history scrolls upward: y encodes time into the past
  ctx.strokeStyle = "#9e9e9e";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let started = false;
  for (const p of trace) {
    const age = nowMs - p.tMs;
    if (age < 0 || age > TRACE_WINDOW_MS) continue;
    const y = size.height / 2 - 40 - (age / TRACE_WINDOW_MS) * (size.height / 2 - 60);
    const x = toX(p.ref);
    if (!started) {
      ctx.moveTo(x, y);
      started = true;
    } else {
      ctx.lineTo(x, y);
    }
  }
  ctx.stroke();
}

/** Keep the last few seconds of reference/cursor history for the trace. */
export function pushTrace(trace: TracePoint[], point: TracePoint): void {
  trace.push(point);
  const cutoff = point.tMs - TRACE_WINDOW_MS;
  while (trace.length > 0 && trace[0].tMs < cutoff) {
    trace.shift();
  }
}
