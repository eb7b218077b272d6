#!/usr/bin/env python3
"""Walk through the cleanup filter: design, response, and what it does
to a mains-contaminated synthetic stream."""

import numpy as np

from mindloop.acquisition import SamplingConfig, SynthConfig, SyntheticSource
from mindloop.filters import design_cascade
from mindloop.labels import ClassLabel

cfg = SamplingConfig()
cascade = design_cascade(sample_rate=cfg.sample_rate)

print("stages:")
for stage in cascade.stages:
    print(f"  {stage.label:9s} b={np.round(stage.b, 6)} a={np.round(stage.a, 6)}")

freqs = np.array([0.1, 0.5, 1, 5, 10, 20, 30, 40, 45, 47, 50, 53, 60, 100])
mags = np.abs(cascade.response(freqs))
print("\nfrequency response:")
for f, m in zip(freqs, mags):
    db = 20 * np.log10(m) if m > 0 else float("-inf")
    print(f"  {f:6.1f} Hz  |H| = {m:8.5f}  ({db:7.2f} dB)")

# feed it ten seconds of synthetic EEG with a strong 50 Hz leak
src = SyntheticSource(cfg, SynthConfig(seed=0, mains_leak=30.0),
                      schedule=[(0.0, 10.0, ClassLabel.NONE)])
_, raw = src.take(2500)
cascade.reset(cfg.channel_count)
clean = cascade.process_block(raw)


def line_power(x):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x)))) ** 2
    f = np.arange(len(spec)) * cfg.sample_rate / len(x)
    return spec[(f > 48) & (f < 52)].sum()


before = line_power(raw[500:, 0])
after = line_power(clean[500:, 0])
print(f"\n50 Hz line power, channel 0: {before:.1f} -> {after:.4f} "
      f"({10 * np.log10(after / before):.1f} dB)")
