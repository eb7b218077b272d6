"""Streaming glue: filtered samples -> feature frames -> commands.

The pipeline consumes raw sample blocks, runs the per-channel filter
cascade and the windower, and hands out feature frames stamped with the
stream clock. A predictor wrapper turns frames into smoothed commands
for the control phases.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from ..acquisition import MontageConfig, SamplingConfig
from ..features import FeatureVector, WindowConfig, Windower, apply_norm
from ..filters import FilterCascade, design_cascade
from ..labels import ClassLabel
from .game import Command

TRANSIENT_S = 2.0  # filter warm-up; frames before this are never trained on


@dataclass
class PipelineConfig:
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    montage: MontageConfig = field(default_factory=MontageConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    hp_cutoff: float = 0.5
    lp_cutoff: float = 45.0
    notch_q: float = 30.0

    def build_cascade(self) -> FilterCascade:
        return design_cascade(sample_rate=self.sampling.sample_rate,
                              hp_cutoff=self.hp_cutoff, lp_cutoff=self.lp_cutoff,
                              notch_freq=self.sampling.mains_freq,
                              notch_q=self.notch_q)


class SignalPipeline:
    """Single-consumer stream processor; feed blocks in order."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.cascade = cfg.build_cascade()
        self.cascade.reset(cfg.sampling.channel_count)
        self.windower = Windower(cfg.window, cfg.sampling.channel_count,
                                 cfg.sampling.sample_rate)
        self.nan_count = [0]

    def push_block(self, volts: np.ndarray) -> list[FeatureVector]:
        """volts (n, channels) in stream order; returns frames ending here."""
        filtered = self.cascade.process_block(volts, nan_counter=self.nan_count)
        return self.windower.push_block(filtered)

    @property
    def t(self) -> float:
        return self.windower._index / self.cfg.sampling.sample_rate


class CommandSmoother:
    """Majority vote over the last s predicted labels; cuts control jitter.

    Ties resolve to the lowest class index, so an undecided window says
    NONE. s=1 disables smoothing (paper-faithful raw argmax).
    """

    def __init__(self, s: int = 3):
        if s < 1:
            raise ValueError("smoothing span must be >= 1")
        self._recent: deque[ClassLabel] = deque(maxlen=s)

    def push(self, label: ClassLabel) -> ClassLabel:
        self._recent.append(label)
        counts = Counter(self._recent)
        best = max(counts.values())
        return min(lab for lab, c in counts.items() if c == best)


def command_from_prediction(probabilities: np.ndarray,
                            smoother: CommandSmoother | None = None) -> Command:
    """Argmax class as a model-sourced command; ties to the lowest index."""
    label = ClassLabel(int(np.argmax(probabilities)))
    if smoother is not None:
        label = smoother.push(label)
    return Command(label=label, source="model")


class FramePredictor:
    """Applies a trained model's normalization + prediction to live frames."""

    def __init__(self, model, smoothing: int = 3):
        self.model = model
        self.smoother = CommandSmoother(smoothing) if smoothing > 1 else None

    def command(self, frame: FeatureVector) -> Command:
        normalized = apply_norm(frame, self.model.norm)
        probs = self.model.predict_proba(normalized.mags)
        return command_from_prediction(probs, self.smoother)
