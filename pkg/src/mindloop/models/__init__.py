"""Classifier families (KNN, LDA, CNN), training, persistence, and sweeps."""

from .cnn import (
    CONV_GRID,
    DENSE_GRID,
    CnnParams,
    CnnSpec,
    TrainConfig,
    cnn_build,
    cnn_forward,
    cnn_loss_and_grads,
    cnn_predict_batch,
    cnn_train,
    cnn_transfer,
)
from .evaluate import EvalResult, evaluate
from .io import TrainMeta, TrainedModel, load_model, save_model
from .knn import KnnModel, knn_predict, knn_predict_batch, knn_train, knn_vote_fractions
from .lda import LdaModel, lda_fit, lda_predict, lda_predict_batch, lda_scores
from .sweep import REFERENCE_BASELINES, SweepGrid, cell_seed, run_sweep, write_report
from .train import design_matrices, fit_model, predict_labels

__all__ = [name for name in dir() if not name.startswith("_")]
