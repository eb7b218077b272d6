"""End-to-end training entry: labeled frames in, TrainedModel out.

Normalization statistics are always fitted on the training side only,
then baked into the returned handle so live prediction applies the
identical transform.
"""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from ..dataset import LabeledExample
from ..features import NormStats, fit_norm, normalized_matrix
from .cnn import TrainConfig, cnn_build, cnn_predict_batch, cnn_train
from .evaluate import EvalResult, evaluate
from .io import TrainMeta, TrainedModel
from .knn import knn_predict_batch, knn_train
from .lda import lda_fit, lda_predict_batch


def design_matrices(train: Sequence[LabeledExample],
                    test: Sequence[LabeledExample],
                    ) -> tuple[NormStats, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fit normalization on train, return (stats, x_train, y_train, x_test, y_test)."""
    stats = fit_norm([ex.features for ex in train])
    x_train = normalized_matrix([ex.features for ex in train], stats)
    y_train = np.array([int(ex.label) for ex in train], dtype=np.int64)
    if test:
        x_test = normalized_matrix([ex.features for ex in test], stats)
        y_test = np.array([int(ex.label) for ex in test], dtype=np.int64)
    else:
        x_test = np.zeros((0,) + x_train.shape[1:])
        y_test = np.zeros(0, dtype=np.int64)
    return stats, x_train, y_train, x_test, y_test


def fit_model(kind: str, train: Sequence[LabeledExample],
              test: Sequence[LabeledExample] = (), *,
              seed: int = 0, k: int = 5, shrinkage: float = 1e-3,
              n_convs: int = 2, dense_len: int = 200,
              train_cfg: TrainConfig | None = None,
              base_model: TrainedModel | None = None,
              ) -> tuple[TrainedModel, EvalResult | None]:
    """Train one classifier family on labeled frames.

    For kind 'cnn' with a base_model, dense layers are retuned on the new
    data while convolutional and batch-norm layers stay frozen (and the
    base model's normalization statistics are reused, since the frozen
    layers expect inputs in that space).
    """
    t0 = time.monotonic()
    if base_model is not None and kind == "cnn":
        stats = base_model.norm
        x_train = normalized_matrix([ex.features for ex in train], stats)
        y_train = np.array([int(ex.label) for ex in train], dtype=np.int64)
        x_test = (normalized_matrix([ex.features for ex in test], stats)
                  if test else np.zeros((0,) + x_train.shape[1:]))
        y_test = np.array([int(ex.label) for ex in test], dtype=np.int64)
    else:
        stats, x_train, y_train, x_test, y_test = design_matrices(train, test)

    channels, bins = x_train.shape[1], x_train.shape[2]
    flat_train = x_train.reshape(len(x_train), channels * bins)
    flat_test = x_test.reshape(len(x_test), channels * bins)

    if kind == "knn":
        knn = knn_train(flat_train, y_train, k=k)
        model = TrainedModel(kind="knn", hyperparameters={"k": k},
                             norm=stats, meta=TrainMeta(seed=seed), knn=knn)
        train_pred = np.array([int(v) for v in knn_predict_batch(knn, flat_train)])
    elif kind == "lda":
        lda = lda_fit(flat_train, y_train, shrinkage=shrinkage)
        model = TrainedModel(kind="lda", hyperparameters={"shrinkage": shrinkage},
                             norm=stats, meta=TrainMeta(seed=seed), lda=lda)
        train_pred = np.array([int(v) for v in lda_predict_batch(lda, flat_train)])
    elif kind == "cnn":
        cfg = train_cfg or TrainConfig(seed=seed)
        if base_model is not None:
            from .cnn import cnn_transfer
            spec = base_model.cnn_spec
            params, history = cnn_transfer(spec, base_model.cnn_params,
                                           x_train, y_train, cfg)
        else:
            spec, params = cnn_build(n_convs, dense_len, (channels, bins), seed=seed)
            params, history = cnn_train(spec, params, x_train, y_train, cfg)
        hp = {"n_convs": spec.n_convs, "dense_len": spec.dense_len,
              "input_channels": channels, "input_bins": bins,
              "conv_filters": spec.conv_filters, "kernel_size": spec.kernel_size,
              "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size}
        model = TrainedModel(kind="cnn", hyperparameters=hp, norm=stats,
                             meta=TrainMeta(seed=seed, epochs=cfg.epochs),
                             cnn_spec=spec, cnn_params=params)
        train_pred = cnn_predict_batch(spec, params, x_train)
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    train_eval = evaluate(train_pred, y_train)
    model.meta.train_size = len(train)
    model.meta.training_accuracy = train_eval.accuracy
    test_eval = None
    if len(y_test):
        test_eval = evaluate(predict_labels(model, x_test), y_test)
        model.meta.test_accuracy = test_eval.accuracy
    model.meta.wall_seconds = time.monotonic() - t0
    return model, test_eval


def predict_labels(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Labels for a stack of normalized (channels, bins) frames."""
    if model.kind == "cnn":
        return cnn_predict_batch(model.cnn_spec, model.cnn_params, x)
    flat = x.reshape(len(x), -1)
    if model.kind == "knn":
        return np.array([int(v) for v in knn_predict_batch(model.knn, flat)])
    return np.array([int(v) for v in lda_predict_batch(model.lda, flat)])
