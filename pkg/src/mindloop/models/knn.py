"""Brute-force k-nearest-neighbours classifier.

Training is storage; prediction scans every stored example with
squared-Euclidean distance. Vote ties break by the smaller summed
distance among the tied classes, then by the lower class index, so
predictions are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDataset, KTooLarge
from ..labels import N_CLASSES, ClassLabel


@dataclass
class KnnModel:
    k: int
    x: np.ndarray  # (n, d) float64 stored examples
    y: np.ndarray  # (n,) int labels


def knn_train(x: np.ndarray, y: np.ndarray, k: int = 5) -> KnnModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyDataset("knn_train needs a nonempty (n, d) matrix")
    if not 1 <= k:
        raise ValueError("k must be >= 1")
    if k > x.shape[0]:
        raise KTooLarge(f"k={k} exceeds {x.shape[0]} stored examples")
    return KnnModel(k=k, x=x, y=y)


def _vote(labels: np.ndarray, dists: np.ndarray) -> int:
    counts = np.bincount(labels, minlength=N_CLASSES)
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if len(tied) == 1:
        return int(tied[0])
    sums = np.array([dists[labels == c].sum() for c in tied])
    # lowest summed distance wins; np.argmin takes the first (lowest
    # class index) on exact ties
    return int(tied[np.argmin(sums)])


def knn_predict(model: KnnModel, query: np.ndarray) -> ClassLabel:
    return knn_predict_batch(model, np.asarray(query)[None, :])[0]


def _nearest(model: KnnModel, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # per-query difference keeps distances exact for integer-valued
    # inputs (tie handling must not depend on dot-product rounding);
    # stable sort makes the k-th-place tie break on store order
    row = ((model.x - q[None, :]) ** 2).sum(axis=1)
    return np.argsort(row, kind="stable")[: model.k], row


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> list[ClassLabel]:
    queries = np.asarray(queries, dtype=np.float64)
    out = []
    for q in queries:
        nearest, row = _nearest(model, q)
        out.append(ClassLabel(_vote(model.y[nearest], row[nearest])))
    return out


def knn_vote_fractions(model: KnnModel, query: np.ndarray) -> np.ndarray:
    """Vote shares over the 4 classes, nudged so argmax matches knn_predict."""
    query = np.asarray(query, dtype=np.float64)
    nearest, row = _nearest(model, query)
    fractions = np.bincount(model.y[nearest], minlength=N_CLASSES) / model.k
    winner = _vote(model.y[nearest], row[nearest])
    fractions[winner] += 1e-9
    return fractions / fractions.sum()
