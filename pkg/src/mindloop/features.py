"""FFT feature extraction from filtered sample windows.

Each feature frame is the one-sided magnitude spectrum of the most
recent window per channel, plus the four canonical band powers (delta,
theta, alpha, beta) as diagnostic side outputs. Classifier inputs are
the full magnitude matrix after log-scale z-normalization fitted on
training data only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrainingSet

BAND_EDGES_HZ = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}
BAND_NAMES = tuple(BAND_EDGES_HZ)


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 256
    hop: int = 32
    window_fn: str = "hann"  # or "rectangular"

    def __post_init__(self):
        if self.window_len < 2 or self.window_len & (self.window_len - 1):
            raise ValueError("window_len must be a power of two")
        if not 0 < self.hop <= self.window_len:
            raise ValueError("hop must be in 1..window_len")
        if self.window_fn not in ("hann", "rectangular"):
            raise ValueError(f"unknown window_fn {self.window_fn!r}")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2


@dataclass(frozen=True)
class FeatureVector:
    """One spectral frame.

    mags is (channels, window_len/2) nonnegative; bin k is centered at
    k * sample_rate / window_len Hz. t is the window END time and index
    the absolute sample count at that instant, so consecutive frames are
    exactly hop samples apart.
    """

    t: float
    index: int
    mags: np.ndarray
    bands: np.ndarray  # (channels, 4): delta, theta, alpha, beta


def window_weights(cfg: WindowConfig) -> np.ndarray:
    if cfg.window_fn == "rectangular":
        return np.ones(cfg.window_len)
    n = np.arange(cfg.window_len)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.window_len)


def fft_magnitude(window: np.ndarray, window_fn: str = "hann") -> np.ndarray:
    """One-sided magnitude spectrum, bins 0..N/2-1.

    Works on a single window (N,) or a stack (channels, N). An on-bin
    cosine of amplitude 1 under the rectangular window lands at
    magnitude N/2 in its bin.
    """
    window = np.asarray(window, dtype=np.float64)
    n = window.shape[-1]
    cfg = WindowConfig(window_len=n, hop=n, window_fn=window_fn)
    spec = np.fft.rfft(window * window_weights(cfg), axis=-1)
    return np.abs(spec[..., : n // 2])


def bin_frequencies(window_len: int, sample_rate: float) -> np.ndarray:
    return np.arange(window_len // 2) * (sample_rate / window_len)


def extract_bands(mags: np.ndarray, sample_rate: float) -> np.ndarray:
    """Band powers: sums of squared magnitudes over each band's bins.

    Bands follow BAND_EDGES_HZ, half-open [lo, hi). Accepts (bins,) or
    (channels, bins); returns (4,) or (channels, 4) in band order.
    """
    mags = np.asarray(mags)
    n_bins = mags.shape[-1]
    freqs = bin_frequencies(2 * n_bins, sample_rate)
    power = mags.astype(np.float64) ** 2
    out = np.empty(mags.shape[:-1] + (len(BAND_NAMES),))
    for i, name in enumerate(BAND_NAMES):
        lo, hi = BAND_EDGES_HZ[name]
        mask = (freqs >= lo) & (freqs < hi)
        out[..., i] = power[..., mask].sum(axis=-1)
    return out


def make_feature(windows: np.ndarray, t: float, index: int,
                 sample_rate: float, window_fn: str = "hann") -> FeatureVector:
    """Assemble per-channel spectra into one frame.

    Magnitudes are stored as float32 (the on-disk precision) and band
    powers are derived from those stored values, so a saved and reloaded
    frame reproduces bit-identical fields.
    """
    mags = fft_magnitude(windows, window_fn).astype(np.float32)
    bands = extract_bands(mags, sample_rate).astype(np.float32)
    return FeatureVector(t=t, index=index, mags=mags, bands=bands)


class Windower:
    """Ring buffer turning a filtered sample stream into feature frames.

    Emits one FeatureVector per hop once the first full window has been
    seen. Single consumer; feed blocks in stream order.
    """

    def __init__(self, cfg: WindowConfig, channel_count: int, sample_rate: float):
        self.cfg = cfg
        self.sample_rate = sample_rate
        self._buf = np.zeros((cfg.window_len, channel_count))
        self._filled = 0
        self._since_emit = 0
        self._index = 0  # absolute count of samples consumed

    def push_block(self, block: np.ndarray) -> list[FeatureVector]:
        out = []
        for row in np.asarray(block):
            fv = self._push_row(row)
            if fv is not None:
                out.append(fv)
        return out

    def _push_row(self, row: np.ndarray) -> FeatureVector | None:
        cfg = self.cfg
        self._buf[self._index % cfg.window_len] = row
        self._index += 1
        self._filled = min(self._filled + 1, cfg.window_len)
        self._since_emit += 1
        if self._filled < cfg.window_len or self._since_emit < cfg.hop:
            return None
        self._since_emit = 0
        start = self._index % cfg.window_len
        window = np.vstack((self._buf[start:], self._buf[:start])).T
        return make_feature(window, t=self._index / self.sample_rate,
                            index=self._index, sample_rate=self.sample_rate,
                            window_fn=cfg.window_fn)


@dataclass(frozen=True)
class NormStats:
    """Per-feature mean/std of log(1 + magnitude), fitted on training data.

    Features whose training variance is zero are recorded in `dropped`
    and map to zero after normalization.
    """

    mean: np.ndarray  # (channels, bins)
    std: np.ndarray   # (channels, bins); 1.0 where dropped
    dropped: np.ndarray  # boolean (channels, bins)

    @property
    def n_dropped(self) -> int:
        return int(self.dropped.sum())


def fit_norm(train: list[FeatureVector]) -> NormStats:
    if not train:
        raise EmptyTrainingSet("cannot fit normalization on an empty set")
    logs = np.stack([np.log1p(fv.mags.astype(np.float64)) for fv in train])
    mean = logs.mean(axis=0)
    std = logs.std(axis=0)
    dropped = std == 0.0
    std = np.where(dropped, 1.0, std)
    return NormStats(mean=mean, std=std, dropped=dropped)


def apply_norm(fv: FeatureVector, stats: NormStats) -> FeatureVector:
    z = (np.log1p(fv.mags.astype(np.float64)) - stats.mean) / stats.std
    z[stats.dropped] = 0.0
    return FeatureVector(t=fv.t, index=fv.index, mags=z, bands=fv.bands)


def normalized_matrix(frames: list[FeatureVector], stats: NormStats) -> np.ndarray:
    """(n, channels, bins) float64 normalized magnitude stack."""
    return np.stack([apply_norm(fv, stats).mags for fv in frames])
