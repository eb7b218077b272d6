"""Accuracy and confusion reporting shared by every classifier family."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import N_CLASSES


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # (true, predicted) counts, 4x4

    def __str__(self) -> str:
        lines = [f"accuracy {self.accuracy:.4f}"]
        for i, row in enumerate(self.confusion):
            lines.append(f"  true {i}: " + " ".join(f"{int(v):5d}" for v in row))
        return "\n".join(lines)


def evaluate(predicted: np.ndarray, truth: np.ndarray) -> EvalResult:
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape or predicted.size == 0:
        raise ValueError("predictions and labels must be equal-length, nonempty")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    return EvalResult(accuracy=float((predicted == truth).mean()),
                      confusion=confusion)
