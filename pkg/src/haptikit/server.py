"""WebSocket endpoint that lets the task-runner UI drive a live session.

One client per session. Time advances on ingested sample timestamps, so
live trial logic follows exactly the same tick path as a replay of the
resulting log. Wire messages are newline-free JSON:

  Sample  {"type": "sample", "t_ms": int, "deflection": {"value": float,
           "unit": "mm"|"rad"}, "buttons": int}
  Display {"type": "display", "t_ms": int, "cursor_px": float,
           "phase": str, "trial_id": int, "view": {...}}
  Control {"type": "control", "action": "start_trial"|"abort"|
           "questionnaire_submit", ...}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .service import (LogWriter, SessionConfig, SessionEngine,
                      SESSION_LOG_NAME, dumps_record, resume_session)

CLOSE_SECOND_CLIENT = 4001
CLOSE_SESSION_DONE = 4000


def display_to_wire(rec: dict) -> dict:
    return {"type": "display", "t_ms": rec["t"], "cursor_px": rec["cursor"],
            "phase": rec["phase"], "condition": rec.get("condition"),
            "trial_id": rec["trial"], "view": rec["view"]}


def sample_from_wire(msg: dict) -> tuple:
    d = msg["deflection"]
    return int(msg["t_ms"]), float(d["value"]), str(d.get("unit", "")), \
        int(msg.get("buttons", 0))


def build_app(config: SessionConfig, output_dir,
              resume: bool = False) -> FastAPI:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / SESSION_LOG_NAME

    app = FastAPI()
    state: dict = {"engine": None, "writer": None, "client_connected": False,
                   "unit_rejects": 0}
    app.state.session = state

    def ensure_engine() -> SessionEngine:
        if state["engine"] is None:
            if resume and log_path.exists():
                engine, writer = resume_session(log_path)
            else:
                writer = LogWriter(log_path)
                engine = SessionEngine(config, writer=writer)
            state["engine"], state["writer"] = engine, writer
        return state["engine"]

    @app.get("/health")
    def health():
        engine = state["engine"]
        return {"ok": True, "log": str(log_path),
                "phase": engine.phase if engine else "not-started",
                "t_ms": engine.cur_t if engine else 0}

    def handle_message(engine: SessionEngine, msg: dict) -> list[dict]:
        out_msgs: list[dict] = []
        typ = msg.get("type")
        if typ == "sample":
            t_ms, value, unit, buttons = sample_from_wire(msg)
            expected = engine.config.condition_setup(
                engine.current_condition or "handheld").deflection_unit
            if unit and unit != expected:
                state["unit_rejects"] += 1
                return out_msgs
            engine.ingest_sample(t_ms, value, buttons)
            for rec in engine.advance_to(t_ms):
                out_msgs.append(display_to_wire(rec))
        elif typ == "control":
            action = msg.get("action")
            if action == "start_trial":
                t = int(msg.get("t_ms", engine.cur_t + 1))
                engine.ingest_sample(t, 0.0, 1)
                for rec in engine.advance_to(t):
                    out_msgs.append(display_to_wire(rec))
            elif action == "questionnaire_submit":
                try:
                    rec = engine.ingest_questionnaire(msg["kind"], msg["items"])
                except ValueError as exc:
                    out_msgs.append({"type": "error", "detail": str(exc)})
                else:
                    out_msgs.append({"type": "questionnaire_ack",
                                     "kind": rec["kind"], "score": rec["score"]})
                    # the submission may have switched blocks (and condition);
                    # push the fresh state so the client re-tags its samples
                    if engine.last_display_record is not None:
                        out_msgs.append(display_to_wire(engine.last_display_record))
            elif action == "abort":
                engine.abort_current_trial("client abort")
        return out_msgs

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        if state["client_connected"]:
            await websocket.close(code=CLOSE_SECOND_CLIENT)
            return
        engine = ensure_engine()
        state["client_connected"] = True
        await websocket.accept()
        await websocket.send_text(dumps_record(
            {"type": "hello", "phase": engine.phase, "t_ms": engine.cur_t,
             "condition": engine.current_condition,
             "participant": config.plan.participant_id,
             "screen_width": config.plan.screen_width}))
        try:
            while not engine.done:
                text = await websocket.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    continue
                for out_msg in handle_message(engine, msg):
                    await websocket.send_text(dumps_record(out_msg))
            engine.finalize()
            state["writer"].flush()
            await websocket.send_text(dumps_record(
                {"type": "done", "t_ms": engine.cur_t,
                 "trials": engine.trial_count,
                 "segments": engine.segment_count}))
            await websocket.close(code=CLOSE_SESSION_DONE)
        except WebSocketDisconnect:
            if not engine.done:
                engine.abort_current_trial("client disconnect")
                state["writer"].flush()
        finally:
            state["client_connected"] = False

    return app


def serve(config: SessionConfig, output_dir, port: int = 8765,
          host: str = "127.0.0.1", resume: bool = False) -> None:
    import uvicorn

    app = build_app(config, output_dir, resume=resume)
    uvicorn.run(app, host=host, port=port, log_level="warning")
