#!/usr/bin/env python3
"""One synthetic subject, start to finish: labeled stream -> filtered
FFT features -> balance/split -> KNN and LDA accuracy. (The CNN path is
the same but slower; see the acceptance suite for its numbers.)"""

import numpy as np

from mindloop.acquisition import SynthConfig, SyntheticSource
from mindloop.dataset import LabeledExample, balance, class_counts, split
from mindloop.engine import PipelineConfig, SignalPipeline, TRANSIENT_S
from mindloop.labels import ClassLabel
from mindloop.models import fit_model

DURATION = 120.0
pcfg = PipelineConfig()

# 3-second blocks cycling through all four command classes
labels = [ClassLabel.NONE, ClassLabel.LEFT, ClassLabel.RIGHT, ClassLabel.BOTH]
schedule = [(t, t + 3.0, labels[int(t // 3) % 4])
            for t in np.arange(0.0, DURATION, 3.0)]

source = SyntheticSource(pcfg.sampling, SynthConfig(seed=42, mu_depth=0.8),
                         montage=pcfg.montage, schedule=schedule)
pipeline = SignalPipeline(pcfg)

frames = []
done = 0
while done < DURATION * pcfg.sampling.sample_rate:
    _, block = source.take(250)
    done += 250
    for fv in pipeline.push_block(block):
        if fv.t < TRANSIENT_S:
            continue  # filter warm-up
        lab = next(l for s, e, l in schedule if s <= fv.t <= e)
        frames.append(LabeledExample(features=fv, label=lab,
                                     session_id="demo", t=fv.t))

print(f"{len(frames)} frames; class counts:",
      {k.name: v for k, v in class_counts(frames).items()})

balanced = balance(frames, rng_seed=42)
train, test = split(balanced, 0.7, mode="random", rng_seed=42)
print(f"balanced {len(balanced)} -> train {len(train)} / test {len(test)}")

for kind in ("knn", "lda"):
    model, test_eval = fit_model(kind, train, test, seed=42)
    print(f"{kind}: train accuracy {model.meta.training_accuracy:.3f}, "
          f"test accuracy {test_eval.accuracy:.3f}")
    print("  confusion (rows = truth):")
    for row in test_eval.confusion:
        print("   ", " ".join(f"{v:4d}" for v in row))
