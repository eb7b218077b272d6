import numpy as np
import pytest

from conftest import gaussian_examples, frames_from_matrix
from mindloop.errors import CorruptFile
from mindloop.features import NormStats
from mindloop.models import (
    TrainConfig,
    TrainMeta,
    TrainedModel,
    cnn_build,
    cnn_forward,
    cnn_train,
    fit_model,
    knn_train,
    lda_fit,
    load_model,
    predict_labels,
    save_model,
)


def _norm(d):
    return NormStats(mean=np.zeros((1, d)), std=np.ones((1, d)),
                     dropped=np.zeros((1, d), dtype=bool))


def test_knn_model_roundtrip(tmp_path):
    x, y = gaussian_examples(30, 8, 5.0, seed=0)
    model = TrainedModel(kind="knn", hyperparameters={"k": 3}, norm=_norm(8),
                         meta=TrainMeta(seed=1, train_size=120),
                         knn=knn_train(x, y, k=3))
    path = tmp_path / "m.bcim"
    save_model(model, path)
    back = load_model(path)
    assert back.kind == "knn"
    assert back.knn.k == 3
    assert np.array_equal(back.knn.x, model.knn.x)
    assert np.array_equal(back.knn.y, model.knn.y)
    assert back.meta.train_size == 120


def test_lda_model_roundtrip(tmp_path):
    x, y = gaussian_examples(30, 8, 5.0, seed=1)
    lda = lda_fit(x, y)
    model = TrainedModel(kind="lda", hyperparameters={"shrinkage": 1e-3},
                         norm=_norm(8), meta=TrainMeta(), lda=lda)
    path = tmp_path / "m.bcim"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.lda.weights, lda.weights)
    assert np.array_equal(back.lda.biases, lda.biases)
    assert np.array_equal(back.lda.classes, lda.classes)


def test_cnn_model_roundtrip_preserves_predictions(tmp_path):
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 2, 32))
    y = rng.integers(0, 4, size=20)
    spec, params = cnn_build(1, 8, (2, 32), seed=4)
    trained, _ = cnn_train(spec, params, x, y, TrainConfig(epochs=2, seed=0))
    model = TrainedModel(
        kind="cnn", norm=_norm(32), meta=TrainMeta(),
        hyperparameters={"n_convs": 1, "dense_len": 8, "input_channels": 2,
                         "input_bins": 32, "conv_filters": 50, "kernel_size": 4},
        cnn_spec=spec, cnn_params=trained)
    path = tmp_path / "m.bcim"
    save_model(model, path)
    back = load_model(path)
    want = cnn_forward(spec, trained, x)
    got = cnn_forward(back.cnn_spec, back.cnn_params, x)
    assert np.array_equal(want, got)


def test_model_checksum(tmp_path):
    x, y = gaussian_examples(10, 4, 5.0, seed=3)
    model = TrainedModel(kind="knn", hyperparameters={"k": 1}, norm=_norm(4),
                         meta=TrainMeta(), knn=knn_train(x, y, k=1))
    path = tmp_path / "m.bcim"
    save_model(model, path)
    blob = bytearray(path.read_bytes())
    blob[-3] ^= 0x10
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptFile):
        load_model(path)


def test_fit_model_end_to_end_and_reload(tmp_path):
    rng = np.random.default_rng(5)
    centers = rng.normal(scale=8.0, size=(4, 16))
    x = np.vstack([centers[c] + rng.normal(size=(40, 16)) for c in range(4)])
    y = np.repeat(np.arange(4), 40)
    examples = frames_from_matrix(np.abs(x), y)  # mags must be >= 0
    train, test = examples[::2], examples[1::2]
    for kind in ("knn", "lda"):
        model, test_eval = fit_model(kind, train, test, seed=0)
        assert model.meta.training_accuracy > 0.9
        assert test_eval.accuracy > 0.9
        path = tmp_path / f"{kind}.bcim"
        save_model(model, path)
        back = load_model(path)
        from mindloop.features import normalized_matrix
        xt = normalized_matrix([e.features for e in test], back.norm)
        yt = np.array([int(e.label) for e in test])
        assert (predict_labels(back, xt) == yt).mean() == test_eval.accuracy
