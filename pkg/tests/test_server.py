import json
import time

import pytest
from fastapi.testclient import TestClient

from mindloop.engine.server import EngineService, create_app


@pytest.fixture()
def client(tmp_path):
    service = EngineService(tmp_path / "sessions")
    app = create_app(service)
    with TestClient(app) as c:
        c.service = service
        yield c


def wait_idle(client, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if not client.service.active:
            return
        time.sleep(0.05)
    raise TimeoutError("session did not finish")


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_sessions_empty(client):
    assert client.get("/sessions").json() == {"sessions": []}
    assert client.get("/sessions/nope").status_code == 404


def test_training_session_ws_roundtrip(client):
    r = client.post("/session/start", json={
        "mode": "training", "seed": 21, "subject_id": "p9",
        "plan": {"training_s": 2.5}})
    assert r.status_code == 200
    sid = r.json()["session_id"]

    states = []
    phases = []
    sent = 0
    with client.websocket_connect("/ws") as ws:
        first = json.loads(ws.receive_text())
        assert first["type"] == "quality"
        assert first["railed"] == [False] * 8
        t0 = time.monotonic()
        keys_sent = []
        down = False
        while time.monotonic() - t0 < 2.0:
            msg = json.loads(ws.receive_text())
            if msg["type"] == "state":
                states.append(msg)
                if sent < 40 and len(states) % 3 == 0:
                    action = "up" if down else "down"
                    ws.send_text(json.dumps({
                        "v": 1, "type": "key", "key": "left",
                        "action": action, "t_client": time.time()}))
                    keys_sent.append(action)
                    down = not down
                    sent += 1
            elif msg["type"] == "phase":
                phases.append(msg)
    wait_idle(client)

    assert any(p["name"] == "training" for p in phases)
    assert len(states) > 20
    for s in states:
        assert s["v"] == 1
        assert set(s) >= {"t", "bar_x", "box", "score", "streak", "phase",
                          "remaining_s"}

    detail = client.get(f"/sessions/{sid}").json()
    assert detail["subject_id"] == "p9"
    got = [e["action"] for e in detail["key_log"] if e["key"] == "left"]
    # every sent transition appears exactly once, in order
    assert got == keys_sent
    ts = [e["t"] for e in detail["key_log"]]
    assert ts == sorted(ts)
    assert client.get("/sessions").json()["sessions"] == [sid]


def test_second_session_rejected_while_active(client):
    body = {"mode": "training", "seed": 1, "plan": {"training_s": 2.0}}
    assert client.post("/session/start", json=body).status_code == 200
    assert client.post("/session/start", json=body).status_code == 409
    wait_idle(client)


def test_validation_session_rating_lands_in_metrics(client):
    r = client.post("/session/start", json={
        "mode": "validation", "model_kind": "knn", "seed": 33,
        "plan": {"record_s": 6.0, "control_s": 2.0}})
    sid = r.json()["session_id"]
    rated = False
    with client.websocket_connect("/ws") as ws:
        t0 = time.monotonic()
        while time.monotonic() - t0 < 12.0 and not rated:
            msg = json.loads(ws.receive_text())
            if msg["type"] == "state" and msg["phase"] == "control" and \
               msg["remaining_s"] < 0.5:
                ws.send_text(json.dumps({"v": 1, "type": "rating", "value": 4}))
                rated = True
    assert rated
    wait_idle(client)
    detail = client.get(f"/sessions/{sid}").json()
    assert detail["metrics"]["user_rating"] == 4
    assert detail["metrics"]["training_accuracy"] is not None
