"""Experimental session protocols around the game.

A session runner owns one acquisition source, one signal pipeline, and
one game world, and advances them on a shared stream clock (sample
count / rate). It can run as fast as the CPU allows for headless
verification or paced to the wall clock when a human is attached.

Phases:
  * training: keys drive the game for plan.training_s; frames + key log
    are recorded into a SessionRecord.
  * demo: a trained model drives for plan.demo_s while keys are still
    logged for agreement analysis.
  * validation: plan.record_s of keyed recording, a quick fit (KNN/LDA
    from that recording alone; CNN by retuning a pre-trained model's
    dense layers), then plan.control_s of model control and a 1-5
    responsiveness rating.
"""

from __future__ import annotations

import datetime as _dt
import math
import queue
import threading
import time
from dataclasses import dataclass, replace as _dc_replace

import numpy as np

from ..dataset import (
    KeyLog,
    LabeledExample,
    SessionHeader,
    SessionMetrics,
    SessionRecord,
    balance,
)
from ..errors import SourceLost
from ..labels import ClassLabel
from ..models import TrainedModel, fit_model
from .game import Command, GameConfig, GameState, chase_policy, game_step, new_game
from .pipeline import TRANSIENT_S, FramePredictor, PipelineConfig, SignalPipeline

PHASE_TRAINING = "training"
PHASE_DEMO = "demo"
PHASE_RECORD = "record"
PHASE_CONTROL = "control"


@dataclass(frozen=True)
class SessionPlan:
    training_s: float = 300.0
    demo_s: float = 60.0
    record_s: float = 30.0
    control_s: float = 30.0
    smoothing: int = 3  # majority span for model commands; 1 = raw argmax

    def __post_init__(self):
        for name in ("training_s", "demo_s", "record_s", "control_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class DemoMetrics:
    boxes_caught: int
    misses: int
    max_streak: int
    agreement: float  # fraction of ticks where model command == key intent


@dataclass
class ValidationRow:
    model_kind: str
    training_accuracy: float
    boxes_caught: int
    max_streak: int
    user_rating: int | None
    complete: bool


class ScriptDriver:
    """Intent follows a fixed (start_s, end_s, label) schedule."""

    def __init__(self, segments):
        self.segments = list(segments)

    def desired(self, t: float, state: GameState) -> ClassLabel:
        for start, end, label in self.segments:
            if start <= t < end:
                return ClassLabel(label)
        return ClassLabel.NONE


class PilotDriver:
    """Simulated attentive player: always steers toward the box."""

    def __init__(self, deadband: float = 20.0):
        self.deadband = deadband

    def desired(self, t: float, state: GameState) -> ClassLabel:
        return chase_policy(state, self.deadband)


class ExternalDriver:
    """Key events arriving from a client; server time is stamped on apply."""

    def __init__(self):
        self._events: queue.Queue = queue.Queue()

    def push(self, key: str, action: str) -> None:
        self._events.put((key, action))

    def drain(self):
        out = []
        while True:
            try:
                out.append(self._events.get_nowait())
            except queue.Empty:
                return out


class SampleIterSource:
    """Adapts an iterator of RawSample (pump, replay, wire) to block reads."""

    def __init__(self, cfg, sample_iter):
        self.cfg = cfg
        self._it = iter(sample_iter)

    def take(self, n: int):
        rows = []
        for _ in range(n):
            try:
                rows.append(next(self._it).volts)
            except StopIteration:
                raise SourceLost(
                    f"source ended after {len(rows)} of {n} requested samples")
        return 0, np.vstack(rows)

    def set_label(self, label: ClassLabel) -> None:  # real brains ignore this
        pass


def open_block_source(spec: str, pcfg: PipelineConfig,
                      synth_cfg=None, realtime: bool = False):
    """Source factory for the CLI and the server.

    spec is one of 'synthetic', 'file:PATH', 'tcp:HOST:PORT', or
    'serial:PATH'. Wire and replay sources run behind the bounded
    producer FIFO; realtime additionally paces replay/synthetic streams
    at the nominal rate (live wires pace themselves).
    """
    from ..acquisition import (
        ReplaySource,
        StreamPump,
        SynthConfig,
        SyntheticSource,
        open_serial_source,
        open_tcp_source,
    )
    from ..errors import SourceUnavailable

    rate = pcfg.sampling.sample_rate
    if spec == "synthetic":
        return SyntheticSource(pcfg.sampling, synth_cfg or SynthConfig(),
                               montage=pcfg.montage)
    if spec.startswith("file:"):
        replay = ReplaySource(spec[len("file:"):])
        if realtime:  # pace a recording like a live board for the UI
            pump = StreamPump(replay.samples(), rate, pace=True)
            return SampleIterSource(replay.cfg, pump.read())
        return SampleIterSource(replay.cfg, replay.samples())
    if spec.startswith("tcp:"):
        host, _, port = spec[len("tcp:"):].rpartition(":")
        src = open_tcp_source(host, int(port), pcfg.sampling)
        return SampleIterSource(pcfg.sampling, StreamPump(src.samples(), rate).read())
    if spec.startswith("serial:"):
        src = open_serial_source(spec[len("serial:"):], pcfg.sampling)
        return SampleIterSource(pcfg.sampling, StreamPump(src.samples(), rate).read())
    raise SourceUnavailable(f"unknown source spec {spec!r}")


class SessionRunner:
    """Owns the stream clock, the key state, and the game for one session."""

    def __init__(self, pcfg: PipelineConfig, source, game_cfg: GameConfig | None = None,
                 seed: int = 0, subject_id: str = "anon", wall_clock: bool = False,
                 on_state=None, on_phase=None):
        self.pcfg = pcfg
        self.source = source
        self.game_cfg = game_cfg or GameConfig()
        self.seed = seed
        self.subject_id = subject_id
        self.wall_clock = wall_clock
        self.on_state = on_state
        self.on_phase = on_phase

        self.pipeline = SignalPipeline(pcfg)
        self.rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, 0xBEEF])))
        self.game = new_game(self.game_cfg, self.rng)
        self.key_log = KeyLog()
        self.key_state = {"left": False, "right": False}
        self.frames: list[LabeledExample] = []
        self.command_log: list[tuple[float, Command]] = []
        self._session_id = f"{subject_id}-{seed:08x}"
        self._start_time = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self._tick_count = 0
        self.phase_max_streak = 0
        self._wall_t0: float | None = None
        self._rating: int | None = None
        self._rating_event = threading.Event()
        self.phase: str = "idle"
        self.phase_end_t: float = 0.0

    # -- clock ------------------------------------------------------------

    @property
    def stream_t(self) -> float:
        return self.pipeline.t

    def _samples_to_next_tick(self) -> int:
        rate = self.pcfg.sampling.sample_rate
        next_tick_sample = math.ceil(
            (self._tick_count + 1) * rate / self.game_cfg.tick_rate)
        return max(1, int(next_tick_sample) - self.pipeline.windower._index)

    # -- keys ---------------------------------------------------------------

    @property
    def event_t(self) -> float:
        """Clock for key events: between the last consumed sample and the
        next, so an event can never share an instant with a feature frame
        (events at exactly t take effect at t, which would flip the label
        of a frame ending at the same t on relabel)."""
        return (self.pipeline.windower._index + 0.5) / self.pcfg.sampling.sample_rate

    def _apply_key_event(self, key: str, action: str) -> None:
        if self.key_log.append(self.event_t, key, action):
            self.key_state[key] = action == "down"
            self.source.set_label(self._intent())

    def _intent(self) -> ClassLabel:
        return ClassLabel.from_keys(self.key_state["left"], self.key_state["right"])

    def _steer_to(self, desired: ClassLabel) -> None:
        """Emit the key transitions that morph the current state into desired."""
        want = {"left": desired.includes_left, "right": desired.includes_right}
        for key in ("left", "right"):
            if self.key_state[key] != want[key]:
                self._apply_key_event(key, "down" if want[key] else "up")

    def submit_rating(self, value: int) -> None:
        if not 1 <= int(value) <= 5:
            raise ValueError("rating must be 1..5")
        self._rating = int(value)
        self._rating_event.set()

    # -- main loop ------------------------------------------------------------

    def _run_phase(self, name: str, duration_s: float, keys,
                   predictor: FramePredictor | None = None,
                   collect_frames: bool = True) -> GameState:
        """Advance the world for duration_s of stream time.

        keys drive the game unless a predictor is given, in which case
        the model does and keys are only logged.
        """
        start_t = self.stream_t
        end_t = start_t + duration_s
        self.phase = name
        self.phase_end_t = end_t
        # a streak never spans a phase boundary (control authority changes)
        self.game = _dc_replace(self.game, streak=0)
        self.phase_max_streak = 0
        if self.on_phase:
            self.on_phase(name, duration_s)
        if self.wall_clock and self._wall_t0 is None:
            self._wall_t0 = time.monotonic() - start_t

        start_state = self.game
        model_cmd = Command.none(source="model")
        rate = self.pcfg.sampling.sample_rate
        while self.stream_t < end_t - 1e-9:
            n = self._samples_to_next_tick()
            n = min(n, max(1, int(round((end_t - self.stream_t) * rate))))
            _, block = self.source.take(n)
            for fv in self.pipeline.push_block(block):
                if collect_frames and fv.t >= TRANSIENT_S:
                    self.frames.append(LabeledExample(
                        features=fv, label=self._intent(),
                        session_id=self._session_id, t=fv.t))
                if predictor is not None:
                    model_cmd = predictor.command(fv)

            # tick boundary: ingest key events, then advance the game
            if isinstance(keys, ExternalDriver):
                for key, action in keys.drain():
                    self._apply_key_event(key, action)
            elif keys is not None:
                self._steer_to(keys.desired(self.stream_t, self.game))

            if predictor is not None:
                cmd = model_cmd
            else:
                cmd = Command(label=self._intent(), source="keys")
            self.command_log.append((self.stream_t, cmd))
            dt = self.game_cfg.tick_dt
            self.game = game_step(self.game_cfg, self.game, cmd, dt, self.rng)
            self.phase_max_streak = max(self.phase_max_streak, self.game.streak)
            self._tick_count += 1

            if self.wall_clock:
                due = self._wall_t0 + self.stream_t
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            if self.on_state:
                self.on_state(self.snapshot())
        return start_state

    def snapshot(self) -> dict:
        g = self.game
        return {
            "t": self.stream_t,
            "bar_x": g.bar_x,
            "box": [g.box_x, g.box_y],
            "score": g.score,
            "streak": g.streak,
            "phase": self.phase,
            "remaining_s": max(0.0, self.phase_end_t - self.stream_t),
        }

    def _header(self) -> SessionHeader:
        return SessionHeader(
            session_id=self._session_id, subject_id=self.subject_id,
            start_time=self._start_time, sampling=self.pcfg.sampling,
            montage=self.pcfg.montage,
            filter_summary=self.pipeline.cascade.design_summary,
            window=self.pcfg.window, seed=self.seed)

    def _record(self, training_accuracy: float | None = None) -> SessionRecord:
        g = self.game
        metrics = SessionMetrics(boxes_caught=g.score, misses=g.misses,
                                 max_streak=g.max_streak,
                                 user_rating=self._rating,
                                 training_accuracy=training_accuracy)
        return SessionRecord(header=self._header(), frames=list(self.frames),
                             key_log=self.key_log, metrics=metrics)

    # -- protocols ----------------------------------------------------------

    def run_training_session(self, plan: SessionPlan, keys) -> SessionRecord:
        """Keyed play for plan.training_s; returns the full recording."""
        self._run_phase(PHASE_TRAINING, plan.training_s, keys)
        self.phase = "idle"
        return self._record()

    def run_demo(self, model: TrainedModel, plan: SessionPlan, keys) -> DemoMetrics:
        """Model control for plan.demo_s; keys logged but not driving."""
        predictor = FramePredictor(model, smoothing=plan.smoothing)
        before = self.game
        ticks_before = len(self.command_log)
        self._run_phase(PHASE_DEMO, plan.demo_s, keys, predictor=predictor,
                        collect_frames=False)
        agree = matched = 0
        # agreement: model command label vs logged key intent at each tick
        for t, cmd in self.command_log[ticks_before:]:
            intent = self.key_log.label_at(t)
            matched += 1
            agree += int(cmd.label == intent)
        self.phase = "idle"
        return DemoMetrics(boxes_caught=self.game.score - before.score,
                           misses=self.game.misses - before.misses,
                           max_streak=self.phase_max_streak,
                           agreement=agree / matched if matched else 0.0)

    def run_validation(self, model_kind: str, plan: SessionPlan, keys,
                       base_model: TrainedModel | None = None,
                       rating: int | None = None,
                       rating_timeout_s: float = 0.0,
                       fit_kwargs: dict | None = None,
                       ) -> tuple[ValidationRow, SessionRecord, TrainedModel]:
        """Record plan.record_s keyed, fit, control plan.control_s by model."""
        self._run_phase(PHASE_RECORD, plan.record_s, keys)
        recorded = list(self.frames)
        balanced = balance(recorded, rng_seed=self.seed)
        kwargs = dict(fit_kwargs or {})
        if model_kind == "cnn" and base_model is not None:
            kwargs["base_model"] = base_model
        model, _ = fit_model(model_kind, balanced, seed=self.seed, **kwargs)

        before = self.game
        self._run_phase(PHASE_CONTROL, plan.control_s, keys,
                        predictor=FramePredictor(model, smoothing=plan.smoothing),
                        collect_frames=False)
        self.phase = "rating"
        if rating is not None:
            self.submit_rating(rating)
        elif rating_timeout_s > 0:
            if self.on_phase:
                self.on_phase("rating", rating_timeout_s)
            self._rating_event.wait(rating_timeout_s)
        complete = self._rating is not None
        row = ValidationRow(model_kind=model_kind,
                            training_accuracy=model.meta.training_accuracy,
                            boxes_caught=self.game.score - before.score,
                            max_streak=self.phase_max_streak,
                            user_rating=self._rating, complete=complete)
        record = self._record(training_accuracy=model.meta.training_accuracy)
        self.phase = "idle"
        if not complete:
            record.metrics.user_rating = None
        return row, record, model
