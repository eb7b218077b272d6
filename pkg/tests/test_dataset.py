import numpy as np
import pytest

from conftest import frames_from_matrix, synth_labeled_frames
from mindloop.acquisition import MontageConfig, SamplingConfig
from mindloop.dataset import (
    KeyLog,
    SessionHeader,
    SessionMetrics,
    SessionRecord,
    balance,
    class_counts,
    consolidate,
    label_at,
    load_session,
    save_session,
    split,
)
from mindloop.errors import CorruptFile, EmptyDataset, FormatVersionMismatch
from mindloop.features import WindowConfig
from mindloop.filters import design_cascade
from mindloop.labels import ClassLabel


def make_examples(counts: dict, dim: int = 6, seed: int = 0,
                  session_id: str = "mat"):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, n in counts.items():
        xs.append(rng.normal(size=(n, dim)))
        ys.append(np.full(n, int(label)))
    return frames_from_matrix(np.vstack(xs), np.concatenate(ys),
                              session_id=session_id)


# -- labeling ------------------------------------------------------------------


def test_label_at_empty_log():
    assert label_at(KeyLog(), 3.0) is ClassLabel.NONE


def test_label_at_single_hold():
    log = KeyLog()
    log.append(1.0, "left", "down")
    log.append(2.0, "left", "up")
    assert label_at(log, 0.5) is ClassLabel.NONE
    assert label_at(log, 1.0) is ClassLabel.LEFT  # effect at exactly t
    assert label_at(log, 1.5) is ClassLabel.LEFT
    assert label_at(log, 2.0) is ClassLabel.NONE


def test_label_at_overlap_both():
    log = KeyLog()
    log.append(1.0, "left", "down")
    log.append(2.0, "right", "down")
    log.append(3.0, "left", "up")
    log.append(4.0, "right", "up")
    assert label_at(log, 2.5) is ClassLabel.BOTH
    assert label_at(log, 3.5) is ClassLabel.RIGHT


def test_key_log_rejects_violations():
    log = KeyLog()
    assert log.append(1.0, "left", "down")
    assert not log.append(1.5, "left", "down")  # repeated down dropped
    assert not log.append(0.5, "left", "up")    # time going backwards
    assert log.append(2.0, "left", "up")
    assert len(log) == 2


# -- balance ---------------------------------------------------------------------


def test_balance_already_balanced():
    ex = make_examples({ClassLabel.NONE: 10, ClassLabel.LEFT: 10,
                        ClassLabel.RIGHT: 10, ClassLabel.BOTH: 10})
    out = balance(ex, rng_seed=1)
    assert len(out) == 40
    assert set(class_counts(out).values()) == {10}


def test_balance_uneven_counts():
    # min class count is 20 -> 20 per class, 80 total
    ex = make_examples({ClassLabel.NONE: 100, ClassLabel.LEFT: 20,
                        ClassLabel.RIGHT: 35, ClassLabel.BOTH: 20})
    out = balance(ex, rng_seed=1)
    counts = class_counts(out)
    assert len(out) == 80
    assert all(counts[c] == 20 for c in ClassLabel)


def test_balance_single_class():
    ex = make_examples({ClassLabel.NONE: 5})
    out = balance(ex, rng_seed=1)
    assert len(out) == 5
    assert all(e.label is ClassLabel.NONE for e in out)


def test_balance_deterministic_and_sampled_without_replacement():
    ex = make_examples({ClassLabel.NONE: 30, ClassLabel.LEFT: 7})
    a = balance(ex, rng_seed=9)
    b = balance(ex, rng_seed=9)
    assert [id(e) for e in a] == [id(e) for e in b]
    assert len({id(e) for e in a}) == len(a)


def test_balance_property_random_multisets():
    rng = np.random.default_rng(42)
    for _ in range(200):
        present = rng.choice(4, size=rng.integers(1, 5), replace=False)
        counts = {ClassLabel(int(c)): int(rng.integers(1, 40)) for c in present}
        out = balance(make_examples(counts), rng_seed=int(rng.integers(1 << 30)))
        got = {k: v for k, v in class_counts(out).items() if v}
        m = min(counts.values())
        assert all(v == m for v in got.values())
        assert set(got) == set(counts)


def test_balance_empty_raises():
    with pytest.raises(EmptyDataset):
        balance([], rng_seed=0)


# -- split -----------------------------------------------------------------------


def test_split_sizes_exact_floor():
    for n in (1, 2, 3, 9, 10, 90, 170, 333):
        ex = make_examples({ClassLabel.NONE: n})
        train, test = split(ex, 0.7, mode="random", rng_seed=0)
        assert len(train) == (7 * n) // 10
        assert len(train) + len(test) == n


def test_split_partition_no_loss():
    ex = make_examples({ClassLabel.NONE: 25, ClassLabel.LEFT: 25})
    train, test = split(ex, 0.7, mode="random", rng_seed=3)
    ids = sorted(id(e) for e in train + test)
    assert ids == sorted(id(e) for e in ex)


def test_split_temporal_ordering():
    ex = make_examples({ClassLabel.NONE: 10})  # t = 0..9 by construction
    train, test = split(ex, 0.7, mode="temporal", rng_seed=0)
    assert sorted(e.t for e in train) == list(range(7))
    assert sorted(e.t for e in test) == [7.0, 8.0, 9.0]
    assert max(e.t for e in train) < min(e.t for e in test)


def test_split_deterministic():
    ex = make_examples({ClassLabel.NONE: 40})
    a = split(ex, 0.7, mode="random", rng_seed=5)
    b = split(ex, 0.7, mode="random", rng_seed=5)
    assert [id(e) for e in a[0]] == [id(e) for e in b[0]]


def test_split_empty_raises():
    with pytest.raises(EmptyDataset):
        split([], 0.7)


# -- consolidate -----------------------------------------------------------------


def _session_with(n_frames: int, session_id: str, seed: int = 0) -> SessionRecord:
    ex = make_examples({ClassLabel.NONE: n_frames}, seed=seed, session_id=session_id)
    header = SessionHeader(
        session_id=session_id, subject_id="p1", start_time="2024-01-01T00:00:00",
        sampling=SamplingConfig(channel_count=1),
        montage=MontageConfig(positions=("Cz",), railed=(False,)),
        filter_summary=design_cascade().design_summary,
        window=WindowConfig(window_len=8, hop=4), seed=seed)
    return SessionRecord(header=header, frames=ex, key_log=KeyLog(), metrics=None)


def test_consolidate_tenth():
    sessions = [_session_with(1000, f"s{i}", seed=i) for i in range(3)]
    out = consolidate(sessions, fraction=0.1, rng_seed=7)
    assert len(out) == 300
    per = {}
    for e in out:
        per[e.session_id] = per.get(e.session_id, 0) + 1
    assert per == {"s0": 100, "s1": 100, "s2": 100}


def test_consolidate_full_order():
    sessions = [_session_with(5, f"s{i}", seed=i) for i in range(2)]
    out = consolidate(sessions, fraction=1.0, rng_seed=7)
    assert [e.session_id for e in out] == ["s0"] * 5 + ["s1"] * 5


def test_consolidate_deterministic():
    sessions = [_session_with(50, "s0")]
    a = consolidate(sessions, fraction=0.1, rng_seed=3)
    b = consolidate(sessions, fraction=0.1, rng_seed=3)
    assert [id(x) for x in a] == [id(x) for x in b]


# -- session files ------------------------------------------------------------------


def _full_record() -> SessionRecord:
    frames = synth_labeled_frames(6.0, seed=77, session_id="case-1")
    log = KeyLog()
    log.append(2.5, "left", "down")
    log.append(3.25, "left", "up")
    log.append(4.0, "right", "down")
    log.append(5.5, "right", "up")
    from mindloop.engine import PipelineConfig
    pcfg = PipelineConfig()
    header = SessionHeader(
        session_id="case-1", subject_id="p2", start_time="2024-05-05T10:00:00",
        sampling=pcfg.sampling, montage=pcfg.montage,
        filter_summary=design_cascade().design_summary, window=pcfg.window,
        seed=99)
    metrics = SessionMetrics(boxes_caught=4, misses=2, max_streak=3,
                             user_rating=4, training_accuracy=0.875)
    return SessionRecord(header=header, frames=frames, key_log=log,
                         metrics=metrics)


def test_session_roundtrip_bit_exact(tmp_path):
    record = _full_record()
    path = tmp_path / "s.bcis"
    save_session(record, path)
    back = load_session(path)
    assert back.header == record.header
    assert back.key_log == record.key_log
    assert back.metrics == record.metrics
    assert len(back.frames) == len(record.frames)
    for a, b in zip(record.frames, back.frames):
        assert a.t == b.t and a.label == b.label and a.session_id == b.session_id
        assert a.features.index == b.features.index
        assert np.array_equal(a.features.mags, b.features.mags)
        assert np.array_equal(a.features.bands, b.features.bands)


def test_session_checksum_detects_corruption(tmp_path):
    record = _full_record()
    path = tmp_path / "s.bcis"
    save_session(record, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptFile):
        load_session(path)


def test_session_version_gate(tmp_path):
    record = _full_record()
    path = tmp_path / "s.bcis"
    save_session(record, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 0x63  # version field
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatVersionMismatch):
        load_session(path)


def test_relabel_from_stored_key_log(tmp_path):
    # label_at over the stored log reproduces stored labels exactly
    from mindloop.acquisition import SynthConfig, SyntheticSource
    from mindloop.engine import PilotDriver, PipelineConfig, SessionPlan, SessionRunner
    pcfg = PipelineConfig()
    src = SyntheticSource(pcfg.sampling, SynthConfig(seed=5), montage=pcfg.montage)
    runner = SessionRunner(pcfg, src, seed=5)
    record = runner.run_training_session(SessionPlan(training_s=10.0), PilotDriver())
    path = tmp_path / "r.bcis"
    save_session(record, path)
    back = load_session(path)
    assert all(back.key_log.label_at(ex.t) == ex.label for ex in back.frames)
    assert all(ex.t >= 2.0 for ex in back.frames)  # transient exclusion
