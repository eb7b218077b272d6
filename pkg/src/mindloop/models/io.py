"""Unified trained-model handle and its on-disk format.

A model file carries the classifier kind, hyperparameters, every
parameter block (including the feature-normalization statistics the
model was trained behind), and training metadata, so live control can
reproduce the exact training-time feature transform.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..binio import ChecksumReader, ChecksumWriter, check_magic_version
from ..errors import CorruptFile
from ..features import NormStats
from .cnn import CnnParams, CnnSpec
from .knn import KnnModel
from .lda import LdaModel

MODEL_MAGIC = b"BCIM"
MODEL_VERSION = 1

KINDS = ("knn", "lda", "cnn")


@dataclass
class TrainMeta:
    seed: int = 0
    train_size: int = 0
    epochs: int = 0
    training_accuracy: float = 0.0
    test_accuracy: float | None = None
    wall_seconds: float = 0.0


@dataclass
class TrainedModel:
    kind: str  # "knn" | "lda" | "cnn"
    hyperparameters: dict
    norm: NormStats
    meta: TrainMeta
    knn: KnnModel | None = None
    lda: LdaModel | None = None
    cnn_spec: CnnSpec | None = None
    cnn_params: CnnParams | None = None

    def predict_proba(self, frame_mags: np.ndarray) -> np.ndarray:
        """Probability-like scores over the 4 classes for one normalized frame.

        frame_mags is the (channels, bins) normalized matrix; KNN and LDA
        see it flattened. Argmax matches each family's own tie rules.
        """
        from .knn import knn_vote_fractions
        from .lda import lda_scores
        from .cnn import cnn_forward

        if self.kind == "knn":
            return knn_vote_fractions(self.knn, frame_mags.reshape(-1))
        if self.kind == "lda":
            scores = lda_scores(self.lda, frame_mags.reshape(1, -1))[0]
            full = np.full(4, -np.inf)
            full[self.lda.classes] = scores
            shifted = full - full.max()
            e = np.exp(shifted)
            return e / e.sum()
        probs = cnn_forward(self.cnn_spec, self.cnn_params,
                            frame_mags[None, :, :], mode="infer")
        return probs[0]


def _write_blocks(wr: ChecksumWriter, blocks: dict[str, np.ndarray]) -> None:
    wr.write_u32(len(blocks))
    for name in sorted(blocks):
        wr.write_bytes_block(name.encode())
        wr.write_array(blocks[name])


def _read_blocks(rd: ChecksumReader) -> dict[str, np.ndarray]:
    return {rd.read_bytes_block().decode(): rd.read_array()
            for _ in range(rd.read_u32())}


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    blocks: dict[str, np.ndarray] = {
        "norm.mean": model.norm.mean,
        "norm.std": model.norm.std,
        "norm.dropped": model.norm.dropped.astype(np.uint8),
    }
    if model.kind == "knn":
        blocks["knn.x"] = model.knn.x
        blocks["knn.y"] = model.knn.y.astype(np.int64)
    elif model.kind == "lda":
        blocks["lda.classes"] = model.lda.classes.astype(np.int64)
        blocks["lda.means"] = model.lda.means
        blocks["lda.weights"] = model.lda.weights
        blocks["lda.biases"] = model.lda.biases
    elif model.kind == "cnn":
        for name, arr in model.cnn_params.arrays.items():
            blocks["cnn." + name] = arr
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")

    doc = {
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "meta": {
            "seed": model.meta.seed,
            "train_size": model.meta.train_size,
            "epochs": model.meta.epochs,
            "training_accuracy": model.meta.training_accuracy,
            "test_accuracy": model.meta.test_accuracy,
            "wall_seconds": model.meta.wall_seconds,
        },
        "frozen": sorted(model.cnn_params.frozen) if model.kind == "cnn" else [],
    }
    with open(path, "wb") as fh:
        wr = ChecksumWriter(fh)
        wr.write(MODEL_MAGIC)
        wr.write_u16(MODEL_VERSION)
        wr.write_bytes_block(json.dumps(doc, indent=1, sort_keys=True).encode())
        _write_blocks(wr, blocks)
        wr.finish()


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path, "rb") as fh:
        rd = ChecksumReader(fh)
        check_magic_version(rd, MODEL_MAGIC, MODEL_VERSION)
        doc = json.loads(rd.read_bytes_block().decode())
        blocks = _read_blocks(rd)
        rd.verify_trailer()

    norm = NormStats(mean=blocks["norm.mean"], std=blocks["norm.std"],
                     dropped=blocks["norm.dropped"].astype(bool))
    meta = TrainMeta(**doc["meta"])
    kind = doc["kind"]
    hp = doc["hyperparameters"]
    model = TrainedModel(kind=kind, hyperparameters=hp, norm=norm, meta=meta)
    if kind == "knn":
        model.knn = KnnModel(k=hp["k"], x=blocks["knn.x"], y=blocks["knn.y"])
    elif kind == "lda":
        model.lda = LdaModel(classes=blocks["lda.classes"],
                             means=blocks["lda.means"],
                             weights=blocks["lda.weights"],
                             biases=blocks["lda.biases"],
                             shrinkage=hp["shrinkage"])
    elif kind == "cnn":
        arrays = {name[len("cnn."):]: arr for name, arr in blocks.items()
                  if name.startswith("cnn.")}
        model.cnn_params = CnnParams(arrays, frozen=set(doc["frozen"]))
        model.cnn_spec = CnnSpec(
            n_convs=hp["n_convs"], dense_len=hp["dense_len"],
            input_channels=hp["input_channels"], input_bins=hp["input_bins"],
            conv_filters=hp.get("conv_filters", 50),
            kernel_size=hp.get("kernel_size", 4))
    else:
        raise CorruptFile(f"unknown model kind {kind!r}")
    return model
