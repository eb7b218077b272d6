"""Calibrated 8-channel EEG sample streams.

Two families of sources produce the same `RawSample` stream: a bit-exact
decoder for the 33-byte Cyton wire frame (serial device, TCP, or recorded
bytes) and a deterministic synthetic generator whose mu-rhythm amplitude
is modulated by a command-class schedule, which makes the whole pipeline
verifiable without a headset.
"""

from __future__ import annotations

import math
import os
import queue
import re
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Callable, Iterable, Iterator, Sequence

import numpy as np

from .binio import ChecksumReader, ChecksumWriter, check_magic_version
from .errors import (
    BadFooter,
    BadHeader,
    DesyncDetected,
    Overflow,
    ScheduleGap,
    ShortPacket,
    SourceUnavailable,
)
from .labels import ClassLabel

PACKET_LEN = 33
PACKET_HEADER = 0xA0
FOOTER_LO, FOOTER_HI = 0xC0, 0xCF
ADC_FULL_SCALE_UV = 200_000.0  # generous bound; 24-bit @ gain 24 rails at 187500 uV

RAW_MAGIC = b"BCIR"
RAW_VERSION = 1

# 10-20 / 10-10 electrode names: site prefix + hemisphere digit or midline z.
_POSITION_RE = re.compile(
    r"^(Fp|AF|F|FT|FC|C|CP|T|TP|P|PO|O|I)(z|[1-9]|10)$", re.IGNORECASE)


@dataclass(frozen=True)
class SamplingConfig:
    """Board-level acquisition parameters (defaults match the Cyton)."""

    sample_rate: float = 250.0
    channel_count: int = 8
    adc_bits: int = 24
    gain: float = 24.0
    mains_freq: float = 50.0
    reference_volts: float = 4.5

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.channel_count < 1:
            raise ValueError("channel_count must be >= 1")
        if not 12 <= self.adc_bits <= 24:
            raise ValueError("adc_bits must be in 12..24")
        if self.mains_freq not in (50.0, 60.0, 50, 60):
            raise ValueError("mains_freq must be 50 or 60")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate


@dataclass(frozen=True)
class MontageConfig:
    """Electrode position labels plus a per-channel contact-quality flag."""

    positions: tuple[str, ...] = ("Cz", "C1", "C2", "C3", "C4", "Cp1", "Cp2", "Fpz")
    railed: tuple[bool, ...] = (False,) * 8

    def __post_init__(self):
        if len(self.railed) != len(self.positions):
            raise ValueError("railed flags must match positions length")
        for name in self.positions:
            if not _POSITION_RE.match(name):
                raise ValueError(f"{name!r} is not a 10-20/10-10 position label")

    def check_channel_count(self, channel_count: int) -> None:
        if len(self.positions) != channel_count:
            raise ValueError(
                f"montage has {len(self.positions)} positions, stream has "
                f"{channel_count} channels")

    def hemisphere(self, channel: int) -> str:
        """'left', 'right', or 'midline' from the 10-20 odd/even convention."""
        suffix = _POSITION_RE.match(self.positions[channel]).group(2)
        if suffix.lower() == "z":
            return "midline"
        return "left" if int(suffix) % 2 == 1 else "right"

    def motor_channels(self, side: str) -> list[int]:
        """Channel indices over the motor strip (C*/CP*) on the given side."""
        out = []
        for i, name in enumerate(self.positions):
            m = _POSITION_RE.match(name)
            if m.group(1).upper() in ("C", "CP") and self.hemisphere(i) == side:
                out.append(i)
        return out


@dataclass(frozen=True)
class RawSample:
    """One multi-channel voltage reading.

    seq wraps 0-255 like the wire protocol; t is seconds since stream
    start; volts is a channel_count vector in microvolts.
    """

    seq: int
    t: float
    volts: np.ndarray
    index: int = 0  # absolute sample number, never wraps


def counts_to_microvolts(count: int, cfg: SamplingConfig) -> float:
    """ADC counts to microvolts: count * Vref / (gain * (2^23 - 1)).

    Strictly increasing in count and odd-symmetric around zero.
    """
    if not -(1 << 23) <= count < (1 << 23):
        raise ValueError("count outside signed 24-bit range")
    return count * microvolts_per_count(cfg)


def microvolts_per_count(cfg: SamplingConfig) -> float:
    return cfg.reference_volts * 1e6 / (cfg.gain * ((1 << 23) - 1))


def _unpack_counts(payload: bytes) -> list[int]:
    counts = []
    for i in range(0, 24, 3):
        raw = int.from_bytes(payload[i:i + 3], "big", signed=False)
        if raw & 0x800000:
            raw -= 0x1000000
        counts.append(raw)
    return counts


def parse_cyton_packet(block: bytes, cfg: SamplingConfig,
                       t: float = 0.0, index: int = 0) -> RawSample:
    """Decode one 33-byte wire frame into a RawSample.

    Layout: 0xA0, seq, 8 x 3-byte big-endian two's-complement counts,
    6 aux bytes (ignored), stop byte 0xC0-0xCF.
    """
    if len(block) != PACKET_LEN:
        raise ShortPacket(f"packet length {len(block)}, expected {PACKET_LEN}")
    if block[0] != PACKET_HEADER:
        raise BadHeader(f"start byte 0x{block[0]:02X}, expected 0xA0")
    if not FOOTER_LO <= block[-1] <= FOOTER_HI:
        raise BadFooter(f"stop byte 0x{block[-1]:02X} outside 0xC0-0xCF")
    counts = _unpack_counts(block[2:26])
    volts = np.array(counts, dtype=np.float64) * microvolts_per_count(cfg)
    return RawSample(seq=block[1], t=t, volts=volts[:cfg.channel_count], index=index)


def encode_cyton_packet(seq: int, counts: Sequence[int], footer: int = 0xC0) -> bytes:
    """Inverse of parse_cyton_packet; used by replays and wire tests."""
    if len(counts) != 8:
        raise ValueError("Cyton frame carries exactly 8 channel counts")
    out = bytearray([PACKET_HEADER, seq & 0xFF])
    for c in counts:
        out += int(c & 0xFFFFFF).to_bytes(3, "big")
    out += bytes(6)
    out.append(footer)
    return bytes(out)


def microvolts_to_counts(volts_uv: np.ndarray, cfg: SamplingConfig) -> np.ndarray:
    """Quantize microvolts back to ADC counts (round-half-even, clipped)."""
    scale = microvolts_per_count(cfg)
    counts = np.rint(np.asarray(volts_uv, dtype=np.float64) / scale)
    return np.clip(counts, -(1 << 23), (1 << 23) - 1).astype(np.int64)


# -- synthetic EEG ------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the deterministic synthetic subject.

    mu_depth is the fractional mu-rhythm attenuation applied to the
    hemisphere opposite the imagined hand; 0 makes every class look alike.
    """

    seed: int = 0
    noise_amplitude: float = 10.0
    mu_band: tuple[float, float] = (8.0, 13.0)
    mu_depth: float = 0.8
    mu_amplitude: float = 20.0
    mains_leak: float = 5.0
    drift_amplitude: float = 20.0

    def __post_init__(self):
        if not 0.0 <= self.mu_depth <= 1.0:
            raise ValueError("mu_depth must be in [0, 1]")
        for name in ("noise_amplitude", "mu_amplitude", "mains_leak", "drift_amplitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


LabelSchedule = Sequence[tuple[float, float, ClassLabel]]  # (start_s, end_s, label)


class _OctaveNoise:
    """Summed octave-held white noise, a cheap deterministic 1/f shape.

    Octave k redraws every 2**k samples. Values are a pure function of the
    absolute sample index and the seed, so chunk boundaries never change
    the stream.
    """

    def __init__(self, seed_seq: np.random.SeedSequence, octaves: int, sigma: float):
        self.octaves = octaves
        self.sigma = sigma / math.sqrt(octaves)
        self._rngs = [np.random.Generator(np.random.PCG64(s))
                      for s in seed_seq.spawn(octaves)]
        self._drawn = [0] * octaves          # block values drawn so far
        self._last = [0.0] * octaves

    def block(self, start: int, n: int) -> np.ndarray:
        total = np.zeros(n)
        for k in range(self.octaves):
            size = 1 << k
            jlo, jhi = start >> k, (start + n - 1) >> k
            vals = []
            if jlo < self._drawn[k]:
                vals.append(self._last[k])
                first_new = self._drawn[k]
            else:
                first_new = jlo
            need = jhi - first_new + 1
            if need > 0:
                draws = self._rngs[k].standard_normal(need)
                vals.extend(draws.tolist())
                self._drawn[k] = jhi + 1
                self._last[k] = float(draws[-1])
            stretched = np.repeat(np.asarray(vals), size)
            off = start - (jlo << k)
            total += stretched[off:off + n]
        return total * self.sigma


class SyntheticSource:
    """Deterministic synthetic EEG stream.

    Per channel: octave noise + slow drift + mains-frequency leak + a
    mu-band oscillation. The oscillation is attenuated by mu_depth on
    left-motor channels while the label includes RIGHT, and on
    right-motor channels while it includes LEFT; BOTH attenuates both
    sides, NONE neither.

    The label either follows a fixed (start, end, label) schedule or, in
    live mode, tracks `set_label(...)` calls between `take()` chunks.
    """

    def __init__(self, cfg: SamplingConfig, scfg: SynthConfig,
                 montage: MontageConfig | None = None,
                 schedule: LabelSchedule | None = None):
        montage = montage or MontageConfig()
        montage.check_channel_count(cfg.channel_count)
        self.cfg = cfg
        self.scfg = scfg
        self.montage = montage
        self.schedule = list(schedule) if schedule is not None else None
        self._label = ClassLabel.NONE
        self._index = 0
        nch = cfg.channel_count
        root = np.random.SeedSequence([int(scfg.seed) & 0xFFFFFFFFFFFFFFFF])
        noise_seq, phase_seq = root.spawn(2)
        self._noise = [_OctaveNoise(s, octaves=7, sigma=scfg.noise_amplitude)
                       for s in noise_seq.spawn(nch)]
        prng = np.random.Generator(np.random.PCG64(phase_seq))
        self._mu_phase = prng.uniform(0, 2 * math.pi, nch)
        self._mains_phase = prng.uniform(0, 2 * math.pi, nch)
        self._drift_phase = prng.uniform(0, 2 * math.pi, (2, nch))
        self._mu_freq = 0.5 * (scfg.mu_band[0] + scfg.mu_band[1])
        self._left_motor = np.array(montage.motor_channels("left"), dtype=int)
        self._right_motor = np.array(montage.motor_channels("right"), dtype=int)

    @property
    def index(self) -> int:
        return self._index

    @property
    def t(self) -> float:
        return self._index / self.cfg.sample_rate

    def set_label(self, label: ClassLabel) -> None:
        """Live-mode intent; ignored when a fixed schedule was given."""
        self._label = label

    def _label_at(self, t: float) -> ClassLabel:
        if self.schedule is None:
            return self._label
        for start, end, label in self.schedule:
            if start <= t < end:
                return label
        raise ScheduleGap(f"no label covers t={t:.4f}s")

    def _attenuation(self, labels: np.ndarray) -> np.ndarray:
        """(n, channels) multiplicative factor on the mu oscillation."""
        n = len(labels)
        att = np.ones((n, self.cfg.channel_count))
        depth = self.scfg.mu_depth
        right_on = np.isin(labels, (ClassLabel.RIGHT, ClassLabel.BOTH))
        left_on = np.isin(labels, (ClassLabel.LEFT, ClassLabel.BOTH))
        if self._left_motor.size:
            att[np.ix_(right_on, self._left_motor)] = 1.0 - depth
        if self._right_motor.size:
            att[np.ix_(left_on, self._right_motor)] = 1.0 - depth
        return att

    def take(self, n: int) -> tuple[int, np.ndarray]:
        """Next n samples as (start_index, volts[n, channels]) in microvolts."""
        cfg, scfg = self.cfg, self.scfg
        start = self._index
        idx = np.arange(start, start + n)
        t = idx / cfg.sample_rate
        if self.schedule is None:
            labels = np.full(n, int(self._label))
        else:
            labels = np.array([int(self._label_at(ti)) for ti in t])
        out = np.empty((n, cfg.channel_count))
        mu = np.sin(2 * math.pi * self._mu_freq * t[:, None] + self._mu_phase[None, :])
        mu *= scfg.mu_amplitude * self._attenuation(labels)
        mains = scfg.mains_leak * np.sin(
            2 * math.pi * cfg.mains_freq * t[:, None] + self._mains_phase[None, :])
        drift = (scfg.drift_amplitude / 2.0) * (
            np.sin(2 * math.pi * 0.08 * t[:, None] + self._drift_phase[0][None, :])
            + np.sin(2 * math.pi * 0.21 * t[:, None] + self._drift_phase[1][None, :]))
        for ch in range(cfg.channel_count):
            out[:, ch] = self._noise[ch].block(start, n)
        out += mu + mains + drift
        self._index += n
        return start, out

    def samples(self, duration_s: float | None = None,
                chunk: int = 250) -> Iterator[RawSample]:
        """RawSample view of the stream; bounded when duration_s is given."""
        limit = None if duration_s is None else round(duration_s * self.cfg.sample_rate)
        while limit is None or self._index < limit:
            n = chunk if limit is None else min(chunk, limit - self._index)
            start, block = self.take(n)
            for i in range(n):
                ix = start + i
                yield RawSample(seq=ix % 256, t=ix / self.cfg.sample_rate,
                                volts=block[i], index=ix)


def synth_stream(cfg: SamplingConfig, scfg: SynthConfig,
                 schedule: LabelSchedule,
                 montage: MontageConfig | None = None) -> Iterator[RawSample]:
    """Deterministic labeled stream covering the schedule's full extent."""
    if not schedule:
        raise ScheduleGap("empty schedule")
    duration = max(end for _, end, _ in schedule)
    src = SyntheticSource(cfg, scfg, montage=montage, schedule=schedule)
    return src.samples(duration_s=duration)


# -- raw recording file (replay format) ---------------------------------------


def write_raw_recording(path: str | os.PathLike, cfg: SamplingConfig,
                        volts: np.ndarray) -> None:
    """BCIR file: magic, version, sampling header, f32 microvolt rows."""
    volts = np.asarray(volts)
    if volts.ndim != 2 or volts.shape[1] != cfg.channel_count:
        raise ValueError("volts must be (n_samples, channel_count)")
    with open(path, "wb") as fh:
        wr = ChecksumWriter(fh)
        wr.write(RAW_MAGIC)
        wr.write_u16(RAW_VERSION)
        header = (f"sample_rate={cfg.sample_rate!r}\nchannel_count={cfg.channel_count}\n"
                  f"adc_bits={cfg.adc_bits}\ngain={cfg.gain!r}\n"
                  f"mains_freq={cfg.mains_freq!r}\n").encode()
        wr.write_bytes_block(header)
        wr.write_u32(volts.shape[0])
        wr.write_array(volts.astype(np.float32))
        wr.finish()


def read_raw_recording(path: str | os.PathLike) -> tuple[SamplingConfig, np.ndarray]:
    with open(path, "rb") as fh:
        rd = ChecksumReader(fh)
        check_magic_version(rd, RAW_MAGIC, RAW_VERSION)
        fields = dict(line.split("=", 1)
                      for line in rd.read_bytes_block().decode().splitlines())
        cfg = SamplingConfig(sample_rate=float(fields["sample_rate"]),
                             channel_count=int(fields["channel_count"]),
                             adc_bits=int(fields["adc_bits"]),
                             gain=float(fields["gain"]),
                             mains_freq=float(fields["mains_freq"]))
        n = rd.read_u32()
        volts = rd.read_array()
        rd.verify_trailer()
    if volts.shape != (n, cfg.channel_count):
        raise ValueError("sample block shape disagrees with header")
    return cfg, volts.astype(np.float64)


class ReplaySource:
    """Replays a BCIR raw recording as a sample stream."""

    def __init__(self, path: str | os.PathLike):
        try:
            self.cfg, self._volts = read_raw_recording(path)
        except FileNotFoundError as e:
            raise SourceUnavailable(str(e)) from e

    def samples(self) -> Iterator[RawSample]:
        rate = self.cfg.sample_rate
        for i in range(self._volts.shape[0]):
            yield RawSample(seq=i % 256, t=i / rate, volts=self._volts[i], index=i)


# -- wire-format byte sources --------------------------------------------------


class FrameScanner:
    """Aligns a raw byte stream to valid 33-byte frames.

    Bytes that cannot start a valid frame are skipped and counted, which
    recovers sync after torn TCP reads or serial garbage.
    """

    def __init__(self, cfg: SamplingConfig):
        self.cfg = cfg
        self._buf = bytearray()
        self.skipped_bytes = 0
        self.gap_count = 0
        self._last_seq: int | None = None
        self._index = 0

    def push(self, data: bytes) -> list[RawSample]:
        self._buf += data
        out = []
        while True:
            start = self._buf.find(bytes([PACKET_HEADER]))
            if start < 0:
                self.skipped_bytes += len(self._buf)
                self._buf.clear()
                break
            if start > 0:
                self.skipped_bytes += start
                del self._buf[:start]
            if len(self._buf) < PACKET_LEN:
                break
            candidate = bytes(self._buf[:PACKET_LEN])
            if not FOOTER_LO <= candidate[-1] <= FOOTER_HI:
                self.skipped_bytes += 1
                del self._buf[:1]
                continue
            del self._buf[:PACKET_LEN]
            sample = parse_cyton_packet(candidate, self.cfg)
            if self._last_seq is not None:
                gap = (sample.seq - self._last_seq - 1) % 256
                if gap > 32:
                    raise DesyncDetected(f"sequence gap of {gap} frames")
                self.gap_count += gap
                self._index += gap
            self._last_seq = sample.seq
            out.append(replace(sample, t=self._index / self.cfg.sample_rate,
                               index=self._index))
            self._index += 1
        return out


class ByteStreamSource:
    """Common driver for anything that yields raw Cyton frame bytes."""

    def __init__(self, cfg: SamplingConfig, reader: Callable[[], bytes]):
        self.cfg = cfg
        self.scanner = FrameScanner(cfg)
        self._reader = reader

    @property
    def gap_count(self) -> int:
        return self.scanner.gap_count

    def samples(self) -> Iterator[RawSample]:
        while True:
            data = self._reader()
            if not data:
                return
            yield from self.scanner.push(data)


def open_tcp_source(host: str, port: int, cfg: SamplingConfig | None = None) -> ByteStreamSource:
    """Raw concatenated frames over TCP, no extra framing."""
    cfg = cfg or SamplingConfig()
    try:
        sock = socket.create_connection((host, port), timeout=10.0)
    except OSError as e:
        raise SourceUnavailable(f"tcp {host}:{port}: {e}") from e
    return ByteStreamSource(cfg, lambda: sock.recv(4096))


def open_serial_source(path: str, cfg: SamplingConfig | None = None) -> ByteStreamSource:
    """Reads a serial device node (or FIFO) as a plain byte stream.

    Line configuration (baud etc.) is assumed done out of band.
    """
    cfg = cfg or SamplingConfig()
    try:
        fh: BinaryIO = open(path, "rb", buffering=0)
    except OSError as e:
        raise SourceUnavailable(f"serial {path}: {e}") from e
    return ByteStreamSource(cfg, lambda: fh.read(4096))


# -- bounded producer/consumer pump -------------------------------------------


class StreamPump:
    """Runs a source on a producer thread behind a bounded FIFO.

    Capacity defaults to two seconds of samples. If the consumer falls
    behind, the producer stops and the consumer sees Overflow once the
    backlog drains.
    """

    def __init__(self, sample_iter: Iterable[RawSample], sample_rate: float,
                 capacity_s: float = 2.0, pace: bool = False):
        self._queue: queue.Queue = queue.Queue(
            maxsize=max(1, int(capacity_s * sample_rate)))
        self._rate = sample_rate
        self._pace = pace
        self._overflowed = False
        self._error: BaseException | None = None
        self._done = threading.Event()
        self._thread = threading.Thread(
            target=self._run, args=(iter(sample_iter),), daemon=True)
        self._thread.start()

    def _run(self, it: Iterator[RawSample]) -> None:
        t0 = time.monotonic()
        try:
            for sample in it:
                if self._pace:
                    due = t0 + sample.index / self._rate
                    delay = due - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                try:
                    self._queue.put_nowait(sample)
                except queue.Full:
                    self._overflowed = True
                    return
        except BaseException as e:  # surfaced on the consumer side
            self._error = e
        finally:
            self._done.set()

    def read(self, timeout: float = 5.0) -> Iterator[RawSample]:
        """Drain samples; raises Overflow/producer errors at the tail."""
        while True:
            try:
                yield self._queue.get(timeout=0.05)
            except queue.Empty:
                if self._done.is_set():
                    if self._queue.qsize():
                        continue
                    if self._error is not None:
                        raise self._error
                    if self._overflowed:
                        raise Overflow("consumer slower than nominal sample rate")
                    return
                timeout -= 0.05
                if timeout <= 0:
                    raise SourceUnavailable("source produced no samples in time")
