"""Dense, ReLU, batch norm, dropout and softmax cross-entropy in numpy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRAIN = "train"
INFER = "infer"


def _check_mode(mode: str) -> None:
    if mode not in (TRAIN, INFER):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_out, fan_in))


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        return cls(glorot_uniform(rng, n_out, n_in), np.zeros(n_out))

    @property
    def n_params(self) -> int:
        return self.W.size + self.b.size


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.W.shape[1]:
        raise ValueError(f"dense layer expects input dim {layer.W.shape[1]}, got {x.shape[-1]}")
    return x @ layer.W.T + layer.b


def dense_backward(layer: DenseLayer, x: np.ndarray, dy: np.ndarray):
    """Returns (dx, dW, db) for a batch x of shape (B, in)."""
    return dy @ layer.W, dy.T @ x, dy.sum(axis=0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-3
    momentum: float = 0.99

    @classmethod
    def init(cls, features: int) -> "BatchNorm":
        return cls(np.ones(features), np.zeros(features), np.zeros(features), np.ones(features))

    @property
    def n_params(self) -> int:
        # running statistics are counted too (four arrays per feature)
        return 4 * self.gamma.size


@dataclass
class BatchNormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def batchnorm_forward(bn: BatchNorm, x: np.ndarray, mode: str = TRAIN):
    """Normalize a (B, F) batch. Returns (y, cache); cache is None in infer mode.

    Train mode uses the biased batch variance and updates the running
    statistics in place: running = momentum * running + (1 - momentum) * batch.
    """
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if mode == INFER:
        return bn.gamma * (x - bn.running_mean) / np.sqrt(bn.running_var + bn.eps) + bn.beta, None
    if x.shape[0] < 2:
        raise ValueError("batch norm in train mode needs a batch of at least 2")
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + bn.eps)
    x_hat = (x - mean) * inv_std
    bn.running_mean *= bn.momentum
    bn.running_mean += (1 - bn.momentum) * mean
    bn.running_var *= bn.momentum
    bn.running_var += (1 - bn.momentum) * var
    return bn.gamma * x_hat + bn.beta, BatchNormCache(x_hat, inv_std, bn.gamma.copy())


def batchnorm_backward(cache: BatchNormCache, dy: np.ndarray):
    """Returns (dx, dgamma, dbeta)."""
    n = dy.shape[0]
    dgamma = np.sum(dy * cache.x_hat, axis=0)
    dbeta = dy.sum(axis=0)
    dx_hat = dy * cache.gamma
    dx = cache.inv_std / n * (n * dx_hat - dx_hat.sum(axis=0) - cache.x_hat * np.sum(dx_hat * cache.x_hat, axis=0))
    return dx, dgamma, dbeta


def dropout_forward(rate: float, x: np.ndarray, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns (y, mask); mask is None when nothing is dropped."""
    _check_mode(mode)
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if mode == INFER or rate == 0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient wrt the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if np.any(labels < 0) or np.any(labels >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_z - z[rows, labels]))
    grad = np.exp(z - log_z[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n
