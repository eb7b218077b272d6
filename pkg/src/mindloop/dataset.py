"""Labeled feature frames: labeling, balancing, splitting, persistence.

A session is the unit of storage: header (every knob that shaped the
data), labeled feature frames, the raw key log they were labeled from,
and the behavioral metrics. Frames store raw (un-normalized) magnitudes
so normalization can always be re-fitted without leakage.
"""

from __future__ import annotations

import bisect
import json
import math
import os
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

import numpy as np

from . import __version__ as _software_version
from .acquisition import MontageConfig, SamplingConfig
from .binio import ChecksumReader, ChecksumWriter, check_magic_version
from .errors import EmptyDataset
from .features import FeatureVector, WindowConfig, extract_bands
from .labels import ClassLabel

SESSION_MAGIC = b"BCIS"
SESSION_VERSION = 1

KEY_LEFT, KEY_RIGHT = "left", "right"
ACTION_DOWN, ACTION_UP = "down", "up"


@dataclass(frozen=True)
class KeyEvent:
    t: float
    key: str     # "left" | "right"
    action: str  # "down" | "up"


class KeyLog:
    """Ordered key transitions; per-key down/up strictly alternate.

    append() silently drops events that would break alternation or run
    backwards in time (a client may repeat key-down while held), and
    reports whether the event was kept.
    """

    def __init__(self, events: Iterable[KeyEvent] = ()):
        self.events: list[KeyEvent] = []
        self._down = {KEY_LEFT: False, KEY_RIGHT: False}
        self._timeline: tuple[list[float], list[ClassLabel]] | None = None
        for e in events:
            if not self.append(e.t, e.key, e.action):
                raise ValueError(f"key log violates alternation at t={e.t}")

    def append(self, t: float, key: str, action: str) -> bool:
        if key not in (KEY_LEFT, KEY_RIGHT) or action not in (ACTION_DOWN, ACTION_UP):
            return False
        if self.events and t < self.events[-1].t:
            return False
        want_down = action == ACTION_DOWN
        if self._down[key] == want_down:
            return False
        self._down[key] = want_down
        self.events.append(KeyEvent(t=t, key=key, action=action))
        self._timeline = None
        return True

    def _build_timeline(self) -> tuple[list[float], list[ClassLabel]]:
        if self._timeline is None:
            times, labels = [], []
            left = right = False
            for e in self.events:
                if e.key == KEY_LEFT:
                    left = e.action == ACTION_DOWN
                else:
                    right = e.action == ACTION_DOWN
                times.append(e.t)
                labels.append(ClassLabel.from_keys(left, right))
            self._timeline = (times, labels)
        return self._timeline

    def label_at(self, t: float) -> ClassLabel:
        times, labels = self._build_timeline()
        i = bisect.bisect_right(times, t)
        return labels[i - 1] if i else ClassLabel.NONE

    def __len__(self) -> int:
        return len(self.events)

    def __eq__(self, other) -> bool:
        return isinstance(other, KeyLog) and self.events == other.events


def label_at(key_log: KeyLog, t: float) -> ClassLabel:
    """Key state at time t; events at exactly t take effect at t."""
    return key_log.label_at(t)


@dataclass(frozen=True)
class LabeledExample:
    features: FeatureVector
    label: ClassLabel
    session_id: str
    t: float


@dataclass
class SessionHeader:
    session_id: str
    subject_id: str
    start_time: str  # ISO-8601
    sampling: SamplingConfig
    montage: MontageConfig
    filter_summary: dict
    window: WindowConfig
    seed: int
    software_version: str = _software_version

    def to_json(self) -> str:
        doc = {
            "session_id": self.session_id,
            "subject_id": self.subject_id,
            "start_time": self.start_time,
            "sampling": asdict(self.sampling),
            "montage": {"positions": list(self.montage.positions),
                        "railed": list(self.montage.railed)},
            "filter_summary": self.filter_summary,
            "window": asdict(self.window),
            "seed": self.seed,
            "software_version": self.software_version,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SessionHeader":
        doc = json.loads(text)
        return SessionHeader(
            session_id=doc["session_id"],
            subject_id=doc["subject_id"],
            start_time=doc["start_time"],
            sampling=SamplingConfig(**doc["sampling"]),
            montage=MontageConfig(positions=tuple(doc["montage"]["positions"]),
                                  railed=tuple(doc["montage"]["railed"])),
            filter_summary=doc["filter_summary"],
            window=WindowConfig(**doc["window"]),
            seed=doc["seed"],
            software_version=doc["software_version"],
        )


@dataclass
class SessionMetrics:
    boxes_caught: int = 0
    misses: int = 0
    max_streak: int = 0
    user_rating: int | None = None  # 1..5
    training_accuracy: float | None = None


@dataclass
class SessionRecord:
    header: SessionHeader
    frames: list[LabeledExample]
    key_log: KeyLog
    metrics: SessionMetrics | None = None


# -- dataset operations --------------------------------------------------------


def _rng(seed: int, *extra: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *extra])))


def balance(examples: Sequence[LabeledExample], rng_seed: int) -> list[LabeledExample]:
    """Undersample every present class to the smallest class count.

    Selection is uniform without replacement and deterministic for a
    given seed; output is grouped by class, not input order.
    """
    if not examples:
        raise EmptyDataset("balance() needs at least one example")
    by_class: dict[ClassLabel, list[int]] = {}
    for i, ex in enumerate(examples):
        by_class.setdefault(ex.label, []).append(i)
    m = min(len(v) for v in by_class.values())
    rng = _rng(rng_seed)
    chosen: list[int] = []
    for label in sorted(by_class):
        idx = by_class[label]
        pick = rng.choice(len(idx), size=m, replace=False)
        chosen.extend(idx[j] for j in np.sort(pick))
    return [examples[i] for i in chosen]


def _floor_fraction(fraction: float, n: int) -> int:
    # + tiny nudge so decimal fractions like 0.7 floor exactly (0.7*90
    # rounds to 62.999... in binary, but floor(7*90/10) is 63)
    return int(math.floor(fraction * n + 1e-9))


def split(examples: Sequence[LabeledExample], train_fraction: float = 0.7,
          mode: str = "random", rng_seed: int = 0,
          ) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """70/30-style split. random shuffles first; temporal takes the
    earliest fraction by frame time as the training side."""
    if not examples:
        raise EmptyDataset("split() needs at least one example")
    n = len(examples)
    n_train = _floor_fraction(train_fraction, n)
    if mode == "random":
        order = _rng(rng_seed).permutation(n)
    elif mode == "temporal":
        order = np.argsort([ex.t for ex in examples], kind="stable")
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    train = [examples[i] for i in order[:n_train]]
    test = [examples[i] for i in order[n_train:]]
    return train, test


def consolidate(sessions: Sequence[SessionRecord], fraction: float = 1.0,
                rng_seed: int = 0) -> list[LabeledExample]:
    """Concatenate floor(fraction * |frames|) frames per session.

    fraction 1.0 keeps everything in session-major order; smaller
    fractions sample uniformly without replacement per session (chosen
    frames stay in time order).
    """
    if not sessions:
        raise EmptyDataset("consolidate() needs at least one session")
    out: list[LabeledExample] = []
    for si, session in enumerate(sessions):
        frames = session.frames
        if fraction >= 1.0:
            out.extend(frames)
            continue
        take = _floor_fraction(fraction, len(frames))
        pick = _rng(rng_seed, si).choice(len(frames), size=take, replace=False)
        out.extend(frames[j] for j in np.sort(pick))
    return out


def class_counts(examples: Sequence[LabeledExample]) -> dict[ClassLabel, int]:
    counts = {label: 0 for label in ClassLabel}
    for ex in examples:
        counts[ex.label] += 1
    return counts


# -- session file format ---------------------------------------------------------


def save_session(record: SessionRecord, path: str | os.PathLike) -> None:
    header_text = record.header.to_json().encode()
    n_bins = record.header.window.n_bins
    nch = record.header.sampling.channel_count
    with open(path, "wb") as fh:
        wr = ChecksumWriter(fh)
        wr.write(SESSION_MAGIC)
        wr.write_u16(SESSION_VERSION)
        wr.write_bytes_block(header_text)
        wr.write_u32(len(record.frames))
        for ex in record.frames:
            if ex.features.mags.shape != (nch, n_bins):
                raise ValueError("frame magnitude shape disagrees with header")
            wr.write_f64(ex.t)
            wr.write_u8(int(ex.label))
            wr.write(np.ascontiguousarray(
                ex.features.mags, dtype="<f4").tobytes())
        wr.write_u32(len(record.key_log))
        for e in record.key_log.events:
            wr.write_f64(e.t)
            wr.write_u8(0 if e.key == KEY_LEFT else 1)
            wr.write_u8(0 if e.action == ACTION_DOWN else 1)
        if record.metrics is None:
            wr.write_u8(0)
        else:
            m = record.metrics
            wr.write_u8(1)
            wr.write_u32(m.boxes_caught)
            wr.write_u32(m.misses)
            wr.write_u32(m.max_streak)
            wr.write_u8(0 if m.user_rating is None else m.user_rating)
            wr.write_f64(math.nan if m.training_accuracy is None
                         else m.training_accuracy)
        wr.finish()


def load_session(path: str | os.PathLike) -> SessionRecord:
    with open(path, "rb") as fh:
        rd = ChecksumReader(fh)
        check_magic_version(rd, SESSION_MAGIC, SESSION_VERSION)
        header = SessionHeader.from_json(rd.read_bytes_block().decode())
        rate = header.sampling.sample_rate
        nch = header.sampling.channel_count
        n_bins = header.window.n_bins
        frames = []
        for _ in range(rd.read_u32()):
            t = rd.read_f64()
            label = ClassLabel(rd.read_u8())
            mags = np.frombuffer(rd.read(nch * n_bins * 4),
                                 dtype="<f4").reshape(nch, n_bins).copy()
            fv = FeatureVector(t=t, index=round(t * rate), mags=mags,
                               bands=extract_bands(mags, rate).astype(np.float32))
            frames.append(LabeledExample(features=fv, label=label,
                                         session_id=header.session_id, t=t))
        key_log = KeyLog()
        for _ in range(rd.read_u32()):
            t = rd.read_f64()
            key = KEY_LEFT if rd.read_u8() == 0 else KEY_RIGHT
            action = ACTION_DOWN if rd.read_u8() == 0 else ACTION_UP
            if not key_log.append(t, key, action):
                raise ValueError("stored key log violates alternation")
        metrics = None
        if rd.read_u8():
            boxes = rd.read_u32()
            misses = rd.read_u32()
            streak = rd.read_u32()
            rating = rd.read_u8()
            acc = rd.read_f64()
            metrics = SessionMetrics(
                boxes_caught=boxes, misses=misses, max_streak=streak,
                user_rating=rating or None,
                training_accuracy=None if math.isnan(acc) else acc)
        rd.verify_trailer()
    return SessionRecord(header=header, frames=frames, key_log=key_log,
                         metrics=metrics)
