import numpy as np
import pytest

from mindloop.errors import EmptyTrainingSet
from mindloop.features import (
    BAND_NAMES,
    NormStats,
    WindowConfig,
    Windower,
    apply_norm,
    bin_frequencies,
    extract_bands,
    fft_magnitude,
    fit_norm,
    make_feature,
)

FS = 250.0


def test_zero_window_zero_magnitudes():
    assert np.all(fft_magnitude(np.zeros(256), "rectangular") == 0.0)
    assert np.all(fft_magnitude(np.zeros(256), "hann") == 0.0)


def test_onbin_cosine_rectangular():
    # closed form: DFT of cos(2 pi k n / N) has magnitude N/2 at bin k
    n = 256
    x = np.cos(2 * np.pi * 10 * np.arange(n) / n)
    mags = fft_magnitude(x, "rectangular")
    assert mags.argmax() == 10
    assert mags[10] == pytest.approx(n / 2, rel=1e-12)
    assert np.delete(mags, 10).max() < 1e-9


def test_parseval_random_input():
    rng = np.random.default_rng(5)
    n = 256
    x = rng.normal(size=n)
    mags = fft_magnitude(x, "rectangular")
    nyq = abs(np.sum(x * (-1.0) ** np.arange(n)))  # bin N/2, computed directly
    spectral = mags[0] ** 2 + 2 * np.sum(mags[1:] ** 2) + nyq**2
    time_energy = np.sum(x**2)
    assert spectral / n == pytest.approx(time_energy, rel=1e-6)


def test_time_reversal_preserves_energy():
    rng = np.random.default_rng(6)
    x = rng.normal(size=256)
    a = fft_magnitude(x, "rectangular")
    b = fft_magnitude(x[::-1], "rectangular")
    assert np.sum(a**2) == pytest.approx(np.sum(b**2), rel=1e-9)


def test_band_edges():
    freqs = bin_frequencies(256, FS)
    assert freqs[1] == pytest.approx(FS / 256)
    mags = np.zeros(128)
    mags[10] = 2.0  # 10*250/256 = 9.77 Hz -> alpha
    powers = extract_bands(mags, FS)
    assert BAND_NAMES == ("delta", "theta", "alpha", "beta")
    assert powers[2] == pytest.approx(4.0)
    assert powers[0] == powers[1] == powers[3] == 0.0


def test_onbin_alpha_tone_isolated():
    n = 256
    x = np.cos(2 * np.pi * 10 * np.arange(n) / n)  # 9.77 Hz
    powers = extract_bands(fft_magnitude(x, "rectangular"), FS)
    assert powers[2] > 0
    for i in (0, 1, 3):
        assert powers[i] < 1e-9 * powers[2]


def test_zero_mags_zero_bands():
    assert np.all(extract_bands(np.zeros(128), FS) == 0.0)


def test_white_noise_band_power_tracks_bin_count():
    # Monte-Carlo oracle: flat spectrum -> power proportional to bin count
    rng = np.random.default_rng(7)
    binc = {}
    freqs = bin_frequencies(256, FS)
    from mindloop.features import BAND_EDGES_HZ
    for i, name in enumerate(BAND_NAMES):
        lo, hi = BAND_EDGES_HZ[name]
        binc[i] = ((freqs >= lo) & (freqs < hi)).sum()
    total = np.zeros(4)
    for _ in range(100):
        x = rng.normal(size=256)
        total += extract_bands(fft_magnitude(x, "rectangular"), FS)
    share = total / total.sum()
    want = np.array([binc[i] for i in range(4)], dtype=float)
    want /= want.sum()
    assert np.abs(share - want).max() < 0.05


def test_peak_bin_within_one_for_offbin_tone():
    rng = np.random.default_rng(8)
    for _ in range(25):
        f = rng.uniform(3.0, 40.0)
        x = np.cos(2 * np.pi * f * np.arange(256) / FS)
        mags = fft_magnitude(x, "hann")
        assert abs(int(mags.argmax()) - round(f * 256 / FS)) <= 1


def test_make_feature_float32_and_band_consistency():
    rng = np.random.default_rng(9)
    windows = rng.normal(size=(8, 256))
    fv = make_feature(windows, t=1.024, index=256, sample_rate=FS)
    assert fv.mags.dtype == np.float32
    assert fv.mags.shape == (8, 128)
    assert fv.bands.shape == (8, 4)
    redo = extract_bands(fv.mags, FS).astype(np.float32)
    assert np.array_equal(redo, fv.bands)


def test_windower_timeline_exact_hop():
    cfg = WindowConfig(window_len=256, hop=32)
    w = Windower(cfg, channel_count=2, sample_rate=FS)
    rng = np.random.default_rng(10)
    frames = []
    for _ in range(10):
        frames.extend(w.push_block(rng.normal(size=(100, 2))))
    assert frames[0].index == 256
    for a, b in zip(frames, frames[1:]):
        assert b.index - a.index == 32
        assert b.t == b.index / FS


def test_windower_window_content():
    cfg = WindowConfig(window_len=8, hop=4, window_fn="rectangular")
    w = Windower(cfg, channel_count=1, sample_rate=8.0)
    ramp = np.arange(20, dtype=float).reshape(-1, 1)
    frames = w.push_block(ramp)
    # emitted at indices 8, 12, 16, 20; spectrum of the LAST 8 samples
    assert [f.index for f in frames] == [8, 12, 16, 20]
    last = fft_magnitude(np.arange(12, 20, dtype=float), "rectangular")
    assert np.allclose(frames[-1].mags[0], last)


def test_norm_fit_apply_roundtrip():
    rng = np.random.default_rng(11)
    frames = [make_feature(rng.normal(size=(2, 64)) * 10, t=i, index=i,
                           sample_rate=FS) for i in range(50)]
    stats = fit_norm([f for f in frames])
    z = np.stack([apply_norm(f, stats).mags for f in frames])
    assert np.abs(z.mean(axis=0)).max() < 1e-9
    assert np.abs(z.std(axis=0) - 1.0).max() < 1e-6


def test_norm_drops_constant_features():
    rng = np.random.default_rng(12)
    frames = []
    for i in range(20):
        mags = np.abs(rng.normal(size=(1, 16))).astype(np.float32)
        mags[0, 3] = 2.5  # constant feature
        frames.append(make_feature_like(mags, i))
    stats = fit_norm([f for f in frames])
    assert stats.dropped[0, 3]
    assert stats.n_dropped == 1
    z = apply_norm(frames[0], stats).mags
    assert z[0, 3] == 0.0


def make_feature_like(mags, i):
    from mindloop.features import FeatureVector, extract_bands
    return FeatureVector(t=float(i), index=i, mags=mags,
                         bands=extract_bands(mags, FS).astype(np.float32))


def test_norm_transfers_to_disjoint_set():
    rng = np.random.default_rng(13)

    def batch(seed):
        r = np.random.default_rng(seed)
        return [make_feature(r.normal(size=(2, 64)) * 5 + 3, t=i, index=i,
                             sample_rate=FS) for i in range(800)]

    stats = fit_norm(batch(1))
    z = np.stack([apply_norm(f, stats).mags for f in batch(2)])
    assert np.abs(z.mean(axis=0)).max() < 0.2


def test_norm_stats_identity():
    stats = NormStats(mean=np.zeros((1, 4)), std=np.ones((1, 4)),
                      dropped=np.zeros((1, 4), dtype=bool))
    fv = make_feature_like(np.zeros((1, 4), dtype=np.float32), 0)
    assert np.all(apply_norm(fv, stats).mags == 0.0)


def test_fit_norm_empty_raises():
    with pytest.raises(EmptyTrainingSet):
        fit_norm([])


def test_window_config_validation():
    with pytest.raises(ValueError):
        WindowConfig(window_len=100)
    with pytest.raises(ValueError):
        WindowConfig(hop=0)
    with pytest.raises(ValueError):
        WindowConfig(window_fn="hamming")
