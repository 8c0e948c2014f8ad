import json
from pathlib import Path

import pytest

from haptikit import service as sv
from haptikit.service import (LogWriter, SessionConfig, SessionEngine,
                              default_session_config, dumps_record,
                              extract_participant, read_log, replay_log,
                              resume_session, simulate_session)


def small_config(participant=1, seed=42, **overrides):
    kwargs = dict(targeting_training=1, targeting_test=3,
                  tracking_training=4, tracking_test=4)
    kwargs.update(overrides)
    return default_session_config(participant_id=participant, seed=seed, **kwargs)


@pytest.fixture(scope="module")
def session(tmp_path_factory):
    out = tmp_path_factory.mktemp("sess")
    path = simulate_session(small_config(), out)
    return path, read_log(path)


# -- config -------------------------------------------------------------------

def test_config_json_roundtrip():
    cfg = small_config()
    again = SessionConfig.from_json_dict(cfg.to_json_dict())
    assert again.to_json_dict() == cfg.to_json_dict()


def test_config_condition_setups():
    cfg = small_config()
    hh = cfg.condition_setup("handheld")
    kn = cfg.condition_setup("knob")
    assert hh.deflection_unit == "mm" and kn.deflection_unit == "rad"
    assert hh.overlay.stiffness_K == pytest.approx(22.348)
    assert kn.overlay.stiffness_K == 7.5
    assert hh.deflection_gain == -hh.device.radius_r
    assert kn.deflection_gain == 1.0


# -- synthetic session ----------------------------------------------------------

def test_session_completes_with_expected_records(session):
    _, recs = session
    counts = {}
    for r in recs:
        counts[r["type"]] = counts.get(r["type"], 0) + 1
    assert counts["header"] == 1 and counts["end"] == 1
    assert counts["block"] == 4
    assert counts["trial"] == 2 * (1 + 3)
    assert counts["segment"] == 2 * (4 + 4)
    assert counts["questionnaire"] == 8
    assert recs[-1]["type"] == "end" and not recs[-1]["aborted"]


def test_session_trials_complete_and_in_band(session):
    _, recs = session
    trials = [r for r in recs if r["type"] == "trial"]
    assert all(t["completed"] for t in trials)
    for t in trials:
        if t["completed"]:
            assert 0.5 <= t["tp"] <= 4.0
            assert t["mt_ms"] == t["dwell_start"] - t["t0"]


def test_session_determinism(tmp_path):
    p1 = simulate_session(small_config(), tmp_path / "a")
    p2 = simulate_session(small_config(), tmp_path / "b")
    assert Path(p1).read_bytes() == Path(p2).read_bytes()
    p3 = simulate_session(small_config(seed=43), tmp_path / "c")
    assert Path(p1).read_bytes() != Path(p3).read_bytes()


def test_heartbeat_zero_deflection_logged(session):
    _, recs = session
    samples = [r for r in recs if r["type"] == "sample"]
    assert any(s["u"] == 0.0 for s in samples)
    ts = [s["t"] for s in samples]
    assert all(b - a == sv.SAMPLE_PERIOD_MS for a, b in zip(ts, ts[1:]))


# -- replay ----------------------------------------------------------------------

def test_replay_reproduces_log(session):
    path, _ = session
    result = replay_log(path)
    assert result.ok and result.mismatches == []


def test_replay_flags_tampered_display(session, tmp_path):
    path, recs = session
    tampered = tmp_path / "tampered.jsonl"
    with open(tampered, "w") as fh:
        seen = 0
        for r in recs:
            r = dict(r)
            if r["type"] == "display" and r["phase"] in ("moving", "dwell"):
                seen += 1
                if seen == 5:
                    r["cursor"] = r["cursor"] + 3.0
            fh.write(dumps_record(r) + "\n")
    result = replay_log(tampered)
    assert not result.ok
    assert len(result.mismatches) == 1
    assert result.mismatches[0]["logged"]["type"] == "display"


def test_replay_flags_tampered_sample(session, tmp_path):
    # editing an input changes the recomputation downstream of it
    path, recs = session
    tampered = tmp_path / "tampered2.jsonl"
    with open(tampered, "w") as fh:
        seen = 0
        for r in recs:
            r = dict(r)
            if r["type"] == "sample" and abs(r["u"]) > 0.5:
                seen += 1
                if seen == 3:
                    r["u"] = r["u"] * 2.0
            fh.write(dumps_record(r) + "\n")
    result = replay_log(tampered)
    assert not result.ok


def test_replay_rejects_unknown_schema(tmp_path, session):
    _, recs = session
    bad = tmp_path / "bad.jsonl"
    with open(bad, "w") as fh:
        hdr = dict(recs[0])
        hdr["schema"] = 99
        fh.write(dumps_record(hdr) + "\n")
    with pytest.raises(ValueError, match="schema"):
        read_log(bad)


def test_corrupt_log_reports_last_valid(tmp_path, session):
    _, recs = session
    bad = tmp_path / "corrupt.jsonl"
    with open(bad, "w") as fh:
        for r in recs[:10]:
            fh.write(dumps_record(r) + "\n")
        fh.write('{"type": "sample", "t": \n')
    with pytest.raises(ValueError, match="last valid record is #10"):
        read_log(bad)


# -- engine behaviors ---------------------------------------------------------------

def test_zero_deflection_trial_times_out():
    cfg = small_config()
    engine = SessionEngine(cfg, writer=None, collect=True)
    t = 0
    engine.ingest_sample(8, 0.0, 1)       # press start, then hold still
    for t in range(16, sv.TRIAL_TIMEOUT_MS + 200, 8):
        engine.ingest_sample(t, 0.0, 0)
    engine.advance_to(t)
    trials = [r for r in engine.collected if r["type"] == "trial"]
    assert len(trials) == 1
    assert not trials[0]["completed"] and trials[0]["tp"] is None


def test_stale_samples_dropped():
    engine = SessionEngine(small_config(), writer=None)
    engine.ingest_sample(100, 0.1, 0)
    engine.advance_to(100)
    engine.ingest_sample(50, 0.2, 0)    # timestamp in the simulated past
    engine.ingest_sample(100, 0.2, 0)   # non-monotone duplicate
    assert engine.dropped_samples == 2


def test_sample_batching_invariance():
    # identical (t, value) contents must give identical outcomes no matter
    # how advance_to calls are grouped
    def run(batch):
        engine = SessionEngine(small_config(), writer=None, collect=True)
        samples = [(t, 0.8 if (t // 400) % 2 else -0.5, 1 if t == 8 else 0)
                   for t in range(8, 4001, 8)]
        for t, u, b in samples:
            engine.ingest_sample(t, u, b)
            if t % batch == 0:
                engine.advance_to(t)
        engine.advance_to(4000)
        return engine.collected

    assert run(8) == run(24) == run(1000)


def test_questionnaire_flow_and_validation():
    cfg = small_config(targeting_training=1, targeting_test=1)
    engine = SessionEngine(cfg, writer=None, collect=True)
    with pytest.raises(ValueError):
        engine.ingest_questionnaire("tlx", [50.0] * 6)  # none pending yet


# -- resume ------------------------------------------------------------------------

def test_resume_after_truncation(tmp_path, session):
    path, recs = session
    cut = tmp_path / "cut.jsonl"
    # keep everything up to (not including) the final questionnaire record
    quest_positions = [i for i, r in enumerate(recs) if r["type"] == "questionnaire"]
    cut_at = quest_positions[-1]
    with open(cut, "w") as fh:
        for r in recs[:cut_at]:
            fh.write(dumps_record(r) + "\n")
    engine, writer = resume_session(cut)
    assert not engine.done
    assert engine.phase == "questionnaire"
    last = recs[cut_at]
    engine.ingest_questionnaire(last["kind"], last["items"])
    assert engine.done
    engine.finalize()
    writer.close()
    result = replay_log(cut)
    assert result.ok


def test_resume_refuses_finalized(session):
    path, _ = session
    with pytest.raises(ValueError, match="resume"):
        resume_session(path)


# -- analyze -----------------------------------------------------------------------

def test_extract_participant(session):
    path, _ = session
    summary = extract_participant(path)
    assert summary.missing() == []
    assert set(summary.throughput) == {"handheld", "knob"}
    assert len(summary.tracking_errors) == 8
    assert len(summary.tlx) == 4 and len(summary.sus) == 4


def test_analyze_sessions(tmp_path):
    for pid in range(3):
        simulate_session(small_config(participant=pid, seed=100 + pid),
                         tmp_path / f"p{pid}")
    report = sv.analyze_sessions(tmp_path, tmp_path / "report.json")
    assert report.n_participants == 3
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "report.txt").exists()
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["n_participants"] == 3
    assert len(data["tracking_table"]) == 8


# -- websocket server ---------------------------------------------------------------

def test_server_live_session_smoke(tmp_path):
    from starlette.testclient import TestClient
    from haptikit.server import build_app

    cfg = small_config(targeting_training=1, targeting_test=1)
    app = build_app(cfg, tmp_path)
    client = TestClient(app)

    def sample(t, value, unit, buttons=0):
        return dumps_record({"type": "sample", "t_ms": t,
                             "deflection": {"value": value, "unit": unit},
                             "buttons": buttons})

    with client.websocket_connect("/ws") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "hello"
        unit = "mm" if hello["condition"] == "handheld" else "rad"
        # displays land on the 16 ms grid: one per 16 ms sample
        ws.send_text(sample(16, 0.0, unit, buttons=1))
        ws.send_text(sample(32, 0.0, unit))
        displays = []
        for _ in range(2):
            msg = json.loads(ws.receive_text())
            assert msg["type"] == "display"
            displays.append(msg)
        assert displays[0]["t_ms"] == 16 and displays[1]["t_ms"] == 32
        assert {"cursor_px", "phase", "trial_id", "view"} <= set(displays[0])
    # disconnect mid-trial: the log stays replayable and marks the abort
    log = tmp_path / sv.SESSION_LOG_NAME
    recs = read_log(log)
    assert any(r["type"] == "control" and r["action"] == "abort_trial"
               for r in recs)


def test_server_rejects_second_client(tmp_path):
    from starlette.testclient import TestClient
    from haptikit.server import build_app

    app = build_app(small_config(), tmp_path)
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws1:
        ws1.receive_text()
        # the second concurrent client is refused (close or handshake error)
        refused = False
        try:
            with client.websocket_connect("/ws") as ws2:
                ws2.receive_text()
        except Exception:
            refused = True
        assert refused


# -- wire golden files (shared with the frontend tests) ------------------------------

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "golden"


@pytest.mark.skipif(not GOLDEN_DIR.exists(), reason="frontend goldens not present")
def test_wire_goldens_match_emitters():
    from haptikit.server import display_to_wire

    for name in ("display_target", "display_tracking", "display_questionnaire"):
        wire = json.loads((GOLDEN_DIR / f"{name}.json").read_text())
        assert wire["type"] == "display"
        assert {"t_ms", "cursor_px", "phase", "trial_id", "view"} <= set(wire)
        # wire form is exactly the log record's display projection
        rec = {"type": "display", "t": wire["t_ms"], "cursor": wire["cursor_px"],
               "phase": wire["phase"], "condition": wire["condition"],
               "trial": wire["trial_id"], "view": wire["view"]}
        assert display_to_wire(rec) == wire
    sample = json.loads((GOLDEN_DIR / "sample_handheld.json").read_text())
    assert sample["deflection"]["unit"] == "mm"
    from haptikit.server import sample_from_wire
    t, value, unit, buttons = sample_from_wire(sample)
    assert (t, value, unit, buttons) == (1528, 1.84, "mm", 0)
