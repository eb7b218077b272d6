import numpy as np
import pytest

from mindloop.acquisition import SynthConfig, SyntheticSource
from mindloop.dataset import LabeledExample
from mindloop.engine import PipelineConfig, SignalPipeline, TRANSIENT_S
from mindloop.features import FeatureVector
from mindloop.labels import ClassLabel


def synth_labeled_frames(duration_s: float, seed: int, mu_depth: float = 0.8,
                         block_s: float = 3.0,
                         session_id: str = "synth") -> list[LabeledExample]:
    """Run the real pipeline over a synthetic stream with a cycling
    label schedule; the ground-truth label is the schedule itself."""
    labels = [ClassLabel.NONE, ClassLabel.LEFT, ClassLabel.RIGHT, ClassLabel.BOTH]
    schedule = []
    t = 0.0
    i = 0
    while t < duration_s:
        schedule.append((t, min(t + block_s, duration_s), labels[i % 4]))
        t += block_s
        i += 1
    pcfg = PipelineConfig()
    src = SyntheticSource(pcfg.sampling, SynthConfig(seed=seed, mu_depth=mu_depth),
                          montage=pcfg.montage, schedule=schedule)
    pipe = SignalPipeline(pcfg)
    out = []

    def label_at(t):
        for start, end, lab in schedule:
            if start <= t <= end:
                return lab
        return ClassLabel.NONE

    n_total = round(duration_s * pcfg.sampling.sample_rate)
    done = 0
    while done < n_total:
        n = min(250, n_total - done)
        _, block = src.take(n)
        done += n
        for fv in pipe.push_block(block):
            if fv.t >= TRANSIENT_S:
                out.append(LabeledExample(features=fv, label=label_at(fv.t),
                                          session_id=session_id, t=fv.t))
    return out


@pytest.fixture(scope="session")
def labeled_frames_90s():
    """Shared medium corpus: ~685 frames over 90 s, 4 classes."""
    return synth_labeled_frames(90.0, seed=1234)


def gaussian_examples(n_per_class: int, dim: int, spread: float, seed: int):
    """(x, y) from 4 well-separated Gaussians; independent of the pipeline."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(4, dim))
    xs, ys = [], []
    for c in range(4):
        xs.append(centers[c] + rng.normal(size=(n_per_class, dim)))
        ys.append(np.full(n_per_class, c))
    return np.vstack(xs), np.concatenate(ys)


def frames_from_matrix(x: np.ndarray, y: np.ndarray, channels: int = 1,
                       session_id: str = "mat") -> list[LabeledExample]:
    """Wrap plain vectors as LabeledExamples (mags >= 0 not required by
    the model layer, which sees normalized values anyway)."""
    out = []
    for i, (row, label) in enumerate(zip(x, y)):
        mags = np.asarray(row, dtype=np.float32).reshape(channels, -1)
        fv = FeatureVector(t=float(i), index=i, mags=mags,
                           bands=np.zeros((channels, 4), dtype=np.float32))
        out.append(LabeledExample(features=fv, label=ClassLabel(int(label)),
                                  session_id=session_id, t=float(i)))
    return out
