"""WebSocket + HTTP service exposing one live session at a time.

Wire schema (one JSON object per text message, schema version 1):
  server->client: state, phase, quality
  client->server: key, rating
Client timestamps are advisory; key events are stamped with the
server's stream clock when they are applied, so the key log and the
feature frames share a single clock.
"""

from __future__ import annotations

import asyncio
import json
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..acquisition import SynthConfig
from ..dataset import load_session, save_session
from ..errors import MindloopError
from ..models import load_model
from .pipeline import PipelineConfig
from .sessions import ExternalDriver, SessionPlan, SessionRunner, open_block_source

SCHEMA_V = 1


class Bulletin:
    """Latest state snapshot plus an ordered event feed for WS senders."""

    def __init__(self):
        self._lock = threading.Lock()
        self._state: dict | None = None
        self._events: list[dict] = []

    def post_state(self, snapshot: dict) -> None:
        with self._lock:
            self._state = snapshot

    def post_event(self, event: dict) -> None:
        with self._lock:
            self._events.append(event)

    def read(self, cursor: int) -> tuple[dict | None, list[dict], int]:
        with self._lock:
            events = self._events[cursor:]
            return self._state, events, len(self._events)


class EngineService:
    """One active session; sessions persist to data_dir as .bcis files."""

    def __init__(self, data_dir: str | Path, pcfg: PipelineConfig | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.pcfg = pcfg or PipelineConfig()
        self.board = Bulletin()
        self.keys = ExternalDriver()
        self.runner: SessionRunner | None = None
        self._thread: threading.Thread | None = None
        self._error: str | None = None

    @property
    def active(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start_session(self, body: dict) -> str:
        if self.active:
            raise HTTPException(status_code=409, detail="a session is already running")
        mode = body.get("mode", "training")
        plan = SessionPlan(**body.get("plan", {}))
        seed = int(body.get("seed", 0))
        subject = body.get("subject_id", "anon")
        source_spec = body.get("source", "synthetic")
        synth = SynthConfig(seed=seed, **body.get("synth", {}))
        source = open_block_source(source_spec, self.pcfg, synth_cfg=synth,
                                   realtime=True)
        self.keys = ExternalDriver()
        runner = SessionRunner(
            self.pcfg, source, seed=seed, subject_id=subject, wall_clock=True,
            on_state=self.board.post_state,
            on_phase=lambda name, dur: self.board.post_event(
                {"v": SCHEMA_V, "type": "phase", "name": name, "duration_s": dur}))
        self.runner = runner
        self._error = None
        model_kind = body.get("model_kind", "knn")
        model_path = body.get("model_path")

        def work():
            try:
                if mode == "training":
                    record = runner.run_training_session(plan, self.keys)
                elif mode == "validation":
                    base = load_model(model_path) if model_path else None
                    _, record, _ = runner.run_validation(
                        model_kind, plan, self.keys, base_model=base,
                        rating_timeout_s=120.0)
                elif mode == "demo":
                    model = load_model(model_path)
                    runner.run_demo(model, plan, self.keys)
                    record = runner._record()
                else:
                    raise MindloopError(f"unknown mode {mode!r}")
                save_session(record, self.data_dir / f"{record.header.session_id}.bcis")
            except BaseException as e:  # surfaced via /health
                self._error = f"{type(e).__name__}: {e}"

        self._thread = threading.Thread(target=work, daemon=True)
        self._thread.start()
        return runner._session_id

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.bcis"))

    def session_detail(self, session_id: str) -> dict:
        path = self.data_dir / f"{session_id}.bcis"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no such session")
        record = load_session(path)
        m = record.metrics
        return {
            "session_id": record.header.session_id,
            "subject_id": record.header.subject_id,
            "start_time": record.header.start_time,
            "seed": record.header.seed,
            "n_frames": len(record.frames),
            "metrics": None if m is None else {
                "boxes_caught": m.boxes_caught,
                "misses": m.misses,
                "max_streak": m.max_streak,
                "user_rating": m.user_rating,
                "training_accuracy": m.training_accuracy,
            },
            "key_log": [{"t": e.t, "key": e.key, "action": e.action}
                        for e in record.key_log.events],
        }


def create_app(service: EngineService) -> FastAPI:
    app = FastAPI(title="mindloop")
    app.state.service = service

    @app.get("/health")
    def health():
        return {"status": "ok", "active": service.active, "error": service._error}

    @app.get("/sessions")
    def sessions():
        return {"sessions": service.session_ids()}

    @app.get("/sessions/{session_id}")
    def session_detail(session_id: str):
        return service.session_detail(session_id)

    @app.post("/session/start")
    def session_start(body: dict):
        return {"session_id": service.start_session(body),
                "tick_rate": service.runner.game_cfg.tick_rate}

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        await websocket.send_text(json.dumps(
            {"v": SCHEMA_V, "type": "quality",
             "railed": list(service.pcfg.montage.railed)}))
        tick = 1.0 / 60.0
        if service.runner is not None:
            tick = 1.0 / service.runner.game_cfg.tick_rate
        stop = False

        async def sender():
            cursor = 0
            last_t = None
            nonlocal stop
            while not stop:
                state, events, cursor = service.board.read(cursor)
                for event in events:
                    await websocket.send_text(json.dumps(event))
                if state is not None and state["t"] != last_t:
                    last_t = state["t"]
                    await websocket.send_text(json.dumps(
                        {"v": SCHEMA_V, "type": "state", **state}))
                await asyncio.sleep(tick)

        async def receiver():
            nonlocal stop
            try:
                while True:
                    msg = json.loads(await websocket.receive_text())
                    if msg.get("type") == "key":
                        if msg.get("key") in ("left", "right") and \
                           msg.get("action") in ("down", "up"):
                            service.keys.push(msg["key"], msg["action"])
                    elif msg.get("type") == "rating":
                        if service.runner is not None:
                            try:
                                service.runner.submit_rating(int(msg.get("value", 0)))
                            except ValueError:
                                pass
            except WebSocketDisconnect:
                stop = True

        send_task = asyncio.create_task(sender())
        try:
            await receiver()
        finally:
            stop = True
            send_task.cancel()

    return app


def serve(bind: str = "127.0.0.1:8323", data_dir: str = "./sessions",
          pcfg: PipelineConfig | None = None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    app = create_app(EngineService(data_dir, pcfg=pcfg))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
