/**
 * Browser bootstrap: connects to the session service (host/port/input
 * from the URL query), wires keyboard and gamepad capture, renders at the
 * display rate, and shows the questionnaire forms.
 */

import { UiSession } from "./app.js";
import { Connection } from "./connection.js";
import {
  QuestionnaireForm,
  SUS_ITEMS,
  TLX_SUBSCALES,
  setResponse,
  canSubmit,
} from "./questionnaire.js";
import { renderFrame } from "./render.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

export function start(): void {
  const host = param("host", "127.0.0.1");
  const port = param("port", "8765");
  const device = param("input", "keys") === "gamepad" ? "gamepad" : "keys";

  const canvas = document.getElementById("task") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const formRoot = document.getElementById("questionnaire") as HTMLDivElement;
  const statusEl = document.getElementById("status") as HTMLDivElement;

  const ws = new WebSocket(`ws://${host}:${port}/ws`);
  const conn = new Connection(ws, () => ws.readyState === WebSocket.OPEN);
  const session = new UiSession(conn, { inputDevice: device, samplePeriodMs: 8 });
  let sessionStartWall: number | null = null;
  let renderedForm: QuestionnaireForm | null = null;

  ws.onopen = () => {
    sessionStartWall = performance.now();
    statusEl.textContent = "connected";
  };
  ws.onclose = () => {
    session.status = "closed";
    statusEl.textContent = session.finished ? "session complete" : "disconnected";
  };
  ws.onmessage = (ev) => {
    const msg = conn.receive(String(ev.data), performance.now());
    if (msg) session.handleMessage(msg);
  };

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (ev.code === "ArrowRight" || ev.code === "KeyK") session.input?.setKey("upper", true);
    if (ev.code === "ArrowLeft" || ev.code === "KeyJ") session.input?.setKey("lower", true);
    if (ev.code === "Space") session.input?.pressStart();
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.code === "ArrowRight" || ev.code === "KeyK") session.input?.setKey("upper", false);
    if (ev.code === "ArrowLeft" || ev.code === "KeyJ") session.input?.setKey("lower", false);
  });

  // input sampling on its own timer (>= 120 Hz nominal)
  window.setInterval(() => {
    if (sessionStartWall === null) return;
    if (device === "gamepad") {
      const pad = navigator.getGamepads?.()[0];
      if (pad) {
        // standard mapping: 6/7 are the analog triggers
        session.input?.setGamepadTriggers(
          pad.buttons[7]?.value ?? 0,
          pad.buttons[6]?.value ?? 0,
        );
        if (pad.buttons[0]?.pressed) session.input?.pressStart();
      }
    }
    session.sampleTick(Math.round(performance.now() - sessionStartWall));
  }, session.config.samplePeriodMs);

  const renderForm = (form: QuestionnaireForm | null) => {
    if (form === renderedForm) return;
    renderedForm = form;
    formRoot.innerHTML = "";
    formRoot.style.display = form ? "block" : "none";
    if (!form) return;
    const items = form.kind === "tlx" ? TLX_SUBSCALES : SUS_ITEMS;
    const [lo, hi] = form.kind === "tlx" ? [0, 100] : [1, 5];
    items.forEach((label, i) => {
      const row = document.createElement("label");
      row.textContent = label;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(lo);
      slider.max = String(hi);
      slider.step = form.kind === "tlx" ? "1" : "1";
      slider.addEventListener("input", () => {
        setResponse(form, i, Number(slider.value));
        submit.disabled = !canSubmit(form);
      });
      row.appendChild(slider);
      formRoot.appendChild(row);
    });
    const submit = document.createElement("button");
    submit.textContent = "submit";
    submit.disabled = true;
    submit.addEventListener("click", () => {
      if (session.submitQuestionnaire()) renderForm(null);
    });
    formRoot.appendChild(submit);
  };

  const draw = () => {
    conn.flush();
    renderForm(session.form);
    if (session.latestDisplay && session.renderingEnabled) {
      renderFrame(
        ctx,
        { width: canvas.width, height: canvas.height },
        session.latestDisplay,
        session.screenWidth,
        session.trace,
        conn.isStale(performance.now()),
      );
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

start();
