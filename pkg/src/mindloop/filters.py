"""Streaming per-channel IIR filtering.

The cleanup chain is a cascade of three second-order sections: a
Butterworth high-pass for DC and electrode drift, a Butterworth low-pass
for out-of-band noise, and a notch at the mains frequency. Coefficients
come from the bilinear transform with frequency pre-warping; each stage
runs the usual direct-form difference equation with two delay registers
per channel, so a block of samples is processed one recursion step at a
time exactly as it would be live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBand, UnstableDesign


@dataclass
class FilterStage:
    """One biquad: y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2].

    a0 is normalized to 1. State is kept per channel in transposed
    direct-form II (two registers), which computes the same recursion.
    """

    b: tuple[float, float, float]
    a: tuple[float, float]  # a1, a2
    label: str = ""
    _s1: np.ndarray = field(default=None, repr=False)
    _s2: np.ndarray = field(default=None, repr=False)

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a[0], self.a[1]])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def reset(self, channel_count: int) -> None:
        self._s1 = np.zeros(channel_count)
        self._s2 = np.zeros(channel_count)

    def step(self, x: np.ndarray) -> np.ndarray:
        b0, b1, b2 = self.b
        a1, a2 = self.a
        y = b0 * x + self._s1
        self._s1 = b1 * x - a1 * y + self._s2
        self._s2 = b2 * x - a2 * y
        return y

    def step_channel(self, channel: int, x: float) -> float:
        """Advance a single channel's recursion by one sample."""
        b0, b1, b2 = self.b
        a1, a2 = self.a
        y = b0 * x + self._s1[channel]
        self._s1[channel] = b1 * x - a1 * y + self._s2[channel]
        self._s2[channel] = b2 * x - a2 * y
        return y

    def response(self, freqs: np.ndarray, sample_rate: float) -> np.ndarray:
        """Complex frequency response at the given frequencies in Hz."""
        z = np.exp(-2j * math.pi * np.asarray(freqs, dtype=float) / sample_rate)
        b0, b1, b2 = self.b
        a1, a2 = self.a
        return (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)


def _bilinear_pair(w0: float, q: float, kind: str) -> tuple[tuple, tuple]:
    """Biquad coefficients from the pre-warped analog prototype.

    These are the closed forms of the bilinear transform applied to the
    second-order low-pass/high-pass/notch prototypes with quality q,
    expressed through w0 = 2*pi*f0/fs.
    """
    cw = math.cos(w0)
    alpha = math.sin(w0) / (2.0 * q)
    if kind == "lowpass":
        b = ((1 - cw) / 2, 1 - cw, (1 - cw) / 2)
    elif kind == "highpass":
        b = ((1 + cw) / 2, -(1 + cw), (1 + cw) / 2)
    elif kind == "notch":
        b = (1.0, -2 * cw, 1.0)
    else:
        raise ValueError(kind)
    a0 = 1 + alpha
    a = (a0, -2 * cw, 1 - alpha)
    return tuple(x / a0 for x in b), (a[1] / a0, a[2] / a0)


@dataclass
class FilterCascade:
    """Ordered second-order sections plus the design record that produced them."""

    stages: list[FilterStage]
    sample_rate: float
    design_summary: dict

    def __post_init__(self):
        self._channels: int | None = None

    def reset(self, channel_count: int) -> None:
        for st in self.stages:
            st.reset(channel_count)
        self._channels = channel_count

    def _ensure_state(self, channel_count: int) -> None:
        if self._channels != channel_count:
            self.reset(channel_count)

    def step(self, x: np.ndarray) -> np.ndarray:
        """Advance every stage by one sample for all channels at once."""
        y = x
        for st in self.stages:
            y = st.step(y)
        return y

    def process_block(self, block: np.ndarray,
                      nan_counter: list | None = None) -> np.ndarray:
        """Filter (n, channels); NaN inputs poison only their own sample.

        A NaN is counted, emitted as NaN, and replaced by zero before it
        can enter the recursion state, so one bad reading cannot corrupt
        the rest of the stream.
        """
        block = np.asarray(block, dtype=np.float64)
        n, channels = block.shape
        self._ensure_state(channels)
        out = np.empty_like(block)
        for i in range(n):
            x = block[i]
            bad = np.isnan(x)
            if bad.any():
                if nan_counter is not None:
                    nan_counter[0] += int(bad.sum())
                x = np.where(bad, 0.0, x)
                y = self.step(x)
                out[i] = np.where(bad, np.nan, y)
            else:
                out[i] = self.step(x)
        return out

    def response(self, freqs: np.ndarray) -> np.ndarray:
        """Analytic cascade transfer function at the given frequencies (Hz)."""
        h = np.ones(np.shape(freqs), dtype=complex)
        for st in self.stages:
            h = h * st.response(freqs, self.sample_rate)
        return h

    def impulse_response(self, n: int) -> np.ndarray:
        """Single-channel impulse response of length n (state is reset)."""
        saved = self._channels
        self.reset(1)
        x = np.zeros((n, 1))
        x[0, 0] = 1.0
        y = self.process_block(x)[:, 0]
        self.reset(saved if saved else 1)
        return y


def design_cascade(sample_rate: float = 250.0, hp_cutoff: float = 0.5,
                   lp_cutoff: float = 45.0, notch_freq: float = 50.0,
                   notch_q: float = 30.0) -> FilterCascade:
    """Design the default high-pass + low-pass + notch chain.

    The Butterworth sections use q = 1/sqrt(2); all three biquads come
    from the pre-warped bilinear transform, so the -3 dB points land on
    the requested cutoffs.
    """
    nyquist = sample_rate / 2.0
    if not 0 < hp_cutoff < lp_cutoff < nyquist:
        raise InvalidBand(
            f"need 0 < hp ({hp_cutoff}) < lp ({lp_cutoff}) < Nyquist ({nyquist})")
    if not 0 < notch_freq < nyquist:
        raise InvalidBand(f"notch {notch_freq} outside (0, {nyquist})")
    if notch_q <= 0:
        raise InvalidBand("notch_q must be positive")

    butter_q = 1.0 / math.sqrt(2.0)
    stages = []
    for f0, q, kind in ((hp_cutoff, butter_q, "highpass"),
                        (lp_cutoff, butter_q, "lowpass"),
                        (notch_freq, notch_q, "notch")):
        w0 = 2.0 * math.pi * f0 / sample_rate
        b, a = _bilinear_pair(w0, q, kind)
        stages.append(FilterStage(b=b, a=a, label=kind))
    for st in stages:
        if not st.is_stable():
            raise UnstableDesign(f"{st.label} stage has |pole| >= 1")
    summary = {
        "sample_rate": sample_rate,
        "hp_cutoff": hp_cutoff,
        "lp_cutoff": lp_cutoff,
        "notch_freq": notch_freq,
        "notch_q": notch_q,
        "stages": [
            {"label": st.label,
             "b": [repr(c) for c in st.b],
             "a": [repr(c) for c in st.a]}
            for st in stages
        ],
    }
    cascade = FilterCascade(stages=stages, sample_rate=sample_rate,
                            design_summary=summary)
    cascade.reset(1)
    return cascade


def filter_step(cascade: FilterCascade, channel: int, x: float) -> float:
    """One recursion step for one channel; state must be initialized first."""
    y = x
    for st in cascade.stages:
        y = st.step_channel(channel, y)
    return y


def filter_frame(cascade: FilterCascade, sample) -> "RawSample":
    """Filter one RawSample, preserving its timing metadata."""
    from .acquisition import RawSample
    cascade._ensure_state(len(sample.volts))
    return RawSample(seq=sample.seq, t=sample.t,
                     volts=cascade.step(np.asarray(sample.volts, dtype=np.float64)),
                     index=sample.index)
