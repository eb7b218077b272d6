"""mindloop: a closed-loop motor-imagery EEG engine.

Acquisition (wire-protocol or synthetic) -> streaming IIR filtering ->
FFT features -> labeled datasets -> KNN/LDA/CNN training -> live game
control, with deterministic seeds end to end.
"""

__version__ = "0.1.0"

from .labels import ClassLabel, N_CLASSES  # noqa: E402
