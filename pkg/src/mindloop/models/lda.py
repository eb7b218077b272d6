"""Linear discriminant classifier with covariance shrinkage.

Fits per-class means and a pooled within-class covariance blended
toward its own diagonal, (1-lam)*S + lam*diag(S), which keeps the
solve well-posed when features outnumber examples (FFT features easily
reach d ~ 1000 while a 30-second recording yields a few hundred frames).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularCovariance, TooFewClasses
from ..labels import ClassLabel


@dataclass
class LdaModel:
    classes: np.ndarray    # sorted class indices present at fit time
    means: np.ndarray      # (C, d)
    weights: np.ndarray    # (C, d) rows are Sigma^-1 mu_c
    biases: np.ndarray     # (C,) -0.5 mu_c^T Sigma^-1 mu_c + log prior_c
    shrinkage: float


def lda_fit(x: np.ndarray, y: np.ndarray, shrinkage: float = 1e-3) -> LdaModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise TooFewClasses(f"need >= 2 classes, got {len(classes)}")
    n, d = x.shape
    if n - len(classes) < 1:
        raise SingularCovariance("no residual degrees of freedom for covariance")

    means = np.stack([x[y == c].mean(axis=0) for c in classes])
    scatter = np.zeros((d, d))
    for c, mu in zip(classes, means):
        xc = x[y == c] - mu
        scatter += xc.T @ xc
    cov = scatter / (n - len(classes))
    shrunk = (1.0 - shrinkage) * cov + shrinkage * np.diag(np.diag(cov))

    try:
        chol = np.linalg.cholesky(shrunk)
    except np.linalg.LinAlgError as e:
        raise SingularCovariance(
            "pooled covariance not positive definite after shrinkage") from e
    # Sigma^-1 mu_c via two triangular solves
    tmp = np.linalg.solve(chol, means.T)
    weights = np.linalg.solve(chol.T, tmp).T

    priors = np.array([(y == c).sum() / n for c in classes])
    biases = -0.5 * np.einsum("cd,cd->c", means, weights) + np.log(priors)
    return LdaModel(classes=classes, means=means, weights=weights,
                    biases=biases, shrinkage=shrinkage)


def lda_scores(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """(n, C) discriminant scores; higher is more likely."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return x @ model.weights.T + model.biases[None, :]


def lda_predict(model: LdaModel, x: np.ndarray) -> ClassLabel:
    scores = lda_scores(model, x)[0]
    # argmax takes the first maximum, i.e. the lowest class index on ties
    return ClassLabel(int(model.classes[np.argmax(scores)]))


def lda_predict_batch(model: LdaModel, x: np.ndarray) -> list[ClassLabel]:
    scores = lda_scores(model, x)
    return [ClassLabel(int(model.classes[i])) for i in np.argmax(scores, axis=1)]
