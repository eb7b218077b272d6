"""From-scratch convolutional network over spectral frames.

Architecture: n repeated blocks of [1-D convolution (50 filters, kernel
4) -> batch norm -> sigmoid -> max pool (2)], then flatten, a dense
layer of configurable width with sigmoid, and a 4-way softmax output.
Convolution runs along the frequency axis with the EEG channels as
input depth. Everything - forward, backprop (including batch-norm and
pool routing), SGD with momentum, and layer freezing for transfer -
is implemented here in double-precision numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DivergenceDetected, ShapeMismatch, ShapeUnderflow

BN_EPS = 1e-5
BN_MOMENTUM = 0.9  # running = m*running + (1-m)*batch

DENSE_GRID = (100, 200, 400, 800, 1600, 3200)
CONV_GRID = (1, 2, 3, 4)


@dataclass(frozen=True)
class CnnSpec:
    n_convs: int
    dense_len: int
    input_channels: int
    input_bins: int
    conv_filters: int = 50
    kernel_size: int = 4
    pool_size: int = 2
    n_classes: int = 4

    def __post_init__(self):
        if not 1 <= self.n_convs <= 4:
            raise ValueError("n_convs must be 1..4")
        if self.dense_len < 1:
            raise ValueError("dense_len must be positive")
        self.spatial_chain()  # raises ShapeUnderflow if the net collapses

    def spatial_chain(self) -> list[int]:
        """Spatial lengths after each conv and pool, starting at the input."""
        chain = [self.input_bins]
        length = self.input_bins
        for _ in range(self.n_convs):
            if length < self.kernel_size:
                raise ShapeUnderflow(
                    f"length {length} shorter than kernel {self.kernel_size}")
            length = length - self.kernel_size + 1
            chain.append(length)
            length = length // self.pool_size
            if length < 1:
                raise ShapeUnderflow("pooling collapsed the spatial axis")
            chain.append(length)
        return chain

    @property
    def flatten_len(self) -> int:
        return self.conv_filters * self.spatial_chain()[-1]


class CnnParams:
    """All trainable tensors plus batch-norm running statistics.

    arrays maps names like 'conv0.w' / 'bn0.gamma' / 'dense1.b' to
    float64 ndarrays; frozen layers take no gradient updates and keep
    their running statistics untouched.
    """

    def __init__(self, arrays: dict[str, np.ndarray], frozen: set[str] | None = None):
        self.arrays = arrays
        self.frozen = set(frozen or ())

    def layer_names(self) -> list[str]:
        return sorted({name.split(".")[0] for name in self.arrays})

    def is_frozen(self, name: str) -> bool:
        return name.split(".")[0] in self.frozen

    def trainable_names(self) -> list[str]:
        skip = ("running_mean", "running_var")
        return [n for n in sorted(self.arrays)
                if not self.is_frozen(n) and not n.endswith(skip)]

    def copy(self) -> "CnnParams":
        return CnnParams({k: v.copy() for k, v in self.arrays.items()},
                         frozen=set(self.frozen))

    def layer_bytes(self, layer: str) -> bytes:
        return b"".join(self.arrays[n].tobytes()
                        for n in sorted(self.arrays) if n.startswith(layer + "."))


def _glorot(rng: np.random.Generator, shape: tuple[int, ...],
            fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def cnn_build(n_convs: int, dense_len: int, input_shape: tuple[int, int],
              seed: int = 0, conv_filters: int = 50,
              kernel_size: int = 4) -> tuple[CnnSpec, CnnParams]:
    """Fresh spec and Glorot-initialized parameters, deterministic in seed."""
    channels, bins = input_shape
    spec = CnnSpec(n_convs=n_convs, dense_len=dense_len,
                   input_channels=channels, input_bins=bins,
                   conv_filters=conv_filters, kernel_size=kernel_size)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    arrays: dict[str, np.ndarray] = {}
    depth = channels
    for i in range(n_convs):
        k = spec.kernel_size
        f = spec.conv_filters
        arrays[f"conv{i}.w"] = _glorot(rng, (f, depth, k), depth * k, f * k)
        arrays[f"conv{i}.b"] = np.zeros(f)
        arrays[f"bn{i}.gamma"] = np.ones(f)
        arrays[f"bn{i}.beta"] = np.zeros(f)
        arrays[f"bn{i}.running_mean"] = np.zeros(f)
        arrays[f"bn{i}.running_var"] = np.ones(f)
        depth = f
    flat = spec.flatten_len
    arrays["dense1.w"] = _glorot(rng, (flat, dense_len), flat, dense_len)
    arrays["dense1.b"] = np.zeros(dense_len)
    arrays["dense2.w"] = _glorot(rng, (dense_len, spec.n_classes),
                                 dense_len, spec.n_classes)
    arrays["dense2.b"] = np.zeros(spec.n_classes)
    return spec, CnnParams(arrays)


# -- layer primitives ----------------------------------------------------------


def _conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x (B, C, L), w (F, C, K) -> (B, F, L-K+1), valid padding, stride 1
    windows = sliding_window_view(x, w.shape[2], axis=2)  # (B, C, Lout, K)
    out = np.einsum("bclk,fck->bfl", windows, w, optimize=True)
    return out + b[None, :, None]


def _conv1d_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray):
    k = w.shape[2]
    windows = sliding_window_view(x, k, axis=2)
    dw = np.einsum("bfl,bclk->fck", dout, windows, optimize=True)
    db = dout.sum(axis=(0, 2))
    pad = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1)))
    dwin = sliding_window_view(pad, k, axis=2)  # (B, F, Lin, K)
    dx = np.einsum("bflk,fck->bcl", dwin, w[:, :, ::-1], optimize=True)
    return dx, dw, db


def _bn_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                running_mean: np.ndarray, running_var: np.ndarray,
                training: bool):
    # normalize per filter over (batch, spatial)
    if training:
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
    else:
        mean, var = running_mean, running_var
    ivar = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None]) * ivar[None, :, None]
    out = gamma[None, :, None] * xhat + beta[None, :, None]
    cache = (xhat, ivar, gamma, training)
    return out, (mean, var), cache


def _bn_backward(dout: np.ndarray, cache):
    xhat, ivar, gamma, training = cache
    dgamma = (dout * xhat).sum(axis=(0, 2))
    dbeta = dout.sum(axis=(0, 2))
    dxhat = dout * gamma[None, :, None]
    if not training:
        return dxhat * ivar[None, :, None], dgamma, dbeta
    m = dout.shape[0] * dout.shape[2]
    sum_dxhat = dxhat.sum(axis=(0, 2))[None, :, None]
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2))[None, :, None]
    dx = (ivar[None, :, None] / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _pool_forward(x: np.ndarray, size: int):
    b, f, length = x.shape
    lout = length // size
    xr = x[:, :, : lout * size].reshape(b, f, lout, size)
    idx = xr.argmax(axis=3)  # first maximum wins on ties
    out = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
    return out, (idx, length)


def _pool_backward(dout: np.ndarray, size: int, cache):
    idx, length = cache
    b, f, lout = dout.shape
    dxr = np.zeros((b, f, lout, size))
    np.put_along_axis(dxr, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros((b, f, length))
    dx[:, :, : lout * size] = dxr.reshape(b, f, lout * size)
    return dx


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# -- network forward / backward -------------------------------------------------


def _forward(spec: CnnSpec, params: CnnParams, x: np.ndarray, training: bool,
             want_cache: bool):
    if x.ndim != 3 or x.shape[1:] != (spec.input_channels, spec.input_bins):
        raise ShapeMismatch(
            f"input {x.shape} incompatible with "
            f"(*, {spec.input_channels}, {spec.input_bins})")
    a = params.arrays
    cache: list = []
    h = x
    for i in range(spec.n_convs):
        bn_training = training and not params.is_frozen(f"bn{i}")
        z = _conv1d_forward(h, a[f"conv{i}.w"], a[f"conv{i}.b"])
        zn, (mean, var), bn_cache = _bn_forward(
            z, a[f"bn{i}.gamma"], a[f"bn{i}.beta"],
            a[f"bn{i}.running_mean"], a[f"bn{i}.running_var"], bn_training)
        if bn_training:
            a[f"bn{i}.running_mean"] = (BN_MOMENTUM * a[f"bn{i}.running_mean"]
                                        + (1 - BN_MOMENTUM) * mean)
            a[f"bn{i}.running_var"] = (BN_MOMENTUM * a[f"bn{i}.running_var"]
                                       + (1 - BN_MOMENTUM) * var)
        s = _sigmoid(zn)
        p, pool_cache = _pool_forward(s, spec.pool_size)
        if want_cache:
            cache.append((h, bn_cache, s, pool_cache))
        h = p
    flat = h.reshape(h.shape[0], -1)
    z1 = flat @ a["dense1.w"] + a["dense1.b"]
    s1 = _sigmoid(z1)
    z2 = s1 @ a["dense2.w"] + a["dense2.b"]
    probs = _softmax(z2)
    if want_cache:
        cache.append((h.shape, flat, s1))
    return probs, cache


def cnn_forward(spec: CnnSpec, params: CnnParams, x: np.ndarray,
                mode: str = "infer") -> np.ndarray:
    """Class probabilities (batch, 4); rows sum to 1.

    mode 'train' normalizes with batch statistics and refreshes the
    running estimates of unfrozen batch-norm layers; 'infer' uses the
    stored running statistics.
    """
    probs, _ = _forward(spec, params, np.asarray(x, dtype=np.float64),
                        training=(mode == "train"), want_cache=False)
    return probs


def cnn_loss_and_grads(spec: CnnSpec, params: CnnParams, x: np.ndarray,
                       y: np.ndarray, training: bool = True):
    """Mean cross-entropy plus gradients for every parameter tensor."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    probs, cache = _forward(spec, params, x, training=training, want_cache=True)
    b = x.shape[0]
    # an underflowed true-class probability is a divergence signal: let
    # log(0) produce inf and leave the finiteness check to the caller
    with np.errstate(divide="ignore"):
        loss = -np.mean(np.log(probs[np.arange(b), y]))

    a = params.arrays
    grads: dict[str, np.ndarray] = {}
    dz2 = probs.copy()
    dz2[np.arange(b), y] -= 1.0
    dz2 /= b

    pooled_shape, flat, s1 = cache[-1]
    grads["dense2.w"] = s1.T @ dz2
    grads["dense2.b"] = dz2.sum(axis=0)
    ds1 = dz2 @ a["dense2.w"].T
    dz1 = ds1 * s1 * (1.0 - s1)
    grads["dense1.w"] = flat.T @ dz1
    grads["dense1.b"] = dz1.sum(axis=0)
    dflat = dz1 @ a["dense1.w"].T
    dh = dflat.reshape(pooled_shape)

    for i in reversed(range(spec.n_convs)):
        h_in, bn_cache, s, pool_cache = cache[i]
        ds = _pool_backward(dh, spec.pool_size, pool_cache)
        dzn = ds * s * (1.0 - s)
        dz, dgamma, dbeta = _bn_backward(dzn, bn_cache)
        grads[f"bn{i}.gamma"] = dgamma
        grads[f"bn{i}.beta"] = dbeta
        dh, dw, db = _conv1d_backward(h_in, a[f"conv{i}.w"], dz)
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
    return loss, probs, grads


# -- training --------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def cnn_train(spec: CnnSpec, params: CnnParams, x: np.ndarray, y: np.ndarray,
              cfg: TrainConfig) -> tuple[CnnParams, list[dict]]:
    """SGD with momentum on cross-entropy; deterministic given cfg.seed.

    Frozen layers receive no updates and keep their running statistics.
    Returns the trained parameters (a copy) and per-epoch history.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("training set is empty")
    params = params.copy()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed])))
    velocity = {name: np.zeros_like(params.arrays[name])
                for name in params.trainable_names()}
    history = []
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, probs, grads = cnn_loss_and_grads(
                spec, params, x[batch], y[batch], training=True)
            if not math.isfinite(loss):
                raise DivergenceDetected(f"loss became {loss} at epoch {epoch}")
            epoch_loss += loss * len(batch)
            correct += int((probs.argmax(axis=1) == y[batch]).sum())
            for name in velocity:
                velocity[name] = (cfg.momentum * velocity[name]
                                  - cfg.learning_rate * grads[name])
                params.arrays[name] = params.arrays[name] + velocity[name]
        history.append({"epoch": epoch, "loss": epoch_loss / n,
                        "accuracy": correct / n})
    return params, history


def cnn_transfer(spec: CnnSpec, params: CnnParams, x: np.ndarray, y: np.ndarray,
                 cfg: TrainConfig) -> tuple[CnnParams, list[dict]]:
    """Retrain only the two dense layers on new data.

    Every convolutional and batch-norm layer is frozen: parameters stay
    byte-identical and running statistics are not refreshed.
    """
    frozen = {name for name in params.layer_names()
              if name.startswith(("conv", "bn"))}
    tuned = params.copy()
    tuned.frozen = frozen
    out, history = cnn_train(spec, tuned, x, y, cfg)
    return out, history


def cnn_predict_batch(spec: CnnSpec, params: CnnParams, x: np.ndarray) -> np.ndarray:
    """Argmax labels from inference-mode probabilities."""
    return cnn_forward(spec, params, x, mode="infer").argmax(axis=1)
