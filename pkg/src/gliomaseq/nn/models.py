"""The two classifier architectures and their parameter accounting."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .layers import (
    INFER,
    TRAIN,
    BatchNorm,
    DenseLayer,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    dropout_forward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from .lstm import LstmCell, lstm_backward, lstm_forward

N_CLASSES = 3
BASELINE_WIDTHS = (150, 90)


@dataclass(frozen=True)
class Architecture:
    variant: str  # "lstm" or "baseline"
    input_dim: int
    seq_len: int = 30
    hidden: int = 21
    widths: tuple[int, int] = BASELINE_WIDTHS
    n_classes: int = N_CLASSES
    dropout: float = 0.2

    def __post_init__(self):
        if self.variant not in ("lstm", "baseline"):
            raise ValueError(f"unknown architecture variant {self.variant!r}")
        if min(self.input_dim, self.seq_len, self.hidden, self.n_classes, *self.widths) < 1:
            raise ValueError(f"architecture dimensions must be positive: {self}")

    @classmethod
    def from_name(cls, name: str, input_dim: int, seq_len: int = 30, **kw) -> "Architecture":
        """`lstm21`, `lstm32` (any `lstm<N>`) or `baseline`."""
        if name == "baseline":
            return cls("baseline", input_dim, seq_len, **kw)
        m = re.fullmatch(r"lstm(\d+)", name)
        if not m:
            raise ValueError(f"unknown architecture {name!r}; expected lstm21, lstm32 or baseline")
        return cls("lstm", input_dim, seq_len, hidden=int(m.group(1)), **kw)

    @property
    def name(self) -> str:
        return "baseline" if self.variant == "baseline" else f"lstm{self.hidden}"


def param_count(arch: Architecture) -> int:
    c = arch.n_classes
    if arch.variant == "lstm":
        h, d = arch.hidden, arch.input_dim
        return 4 * (h * (d + h) + h) + (h * c + c)
    n_in = arch.seq_len * arch.input_dim
    total, width_in = 0, n_in
    for w in arch.widths:
        # dense + four batch-norm arrays per unit
        total += width_in * w + w + 4 * w
        width_in = w
    return total + width_in * c + c


class Model:
    """Common training interface: `params` (trainable, by name), `buffers`
    (non-trainable state), `loss_and_grads` and `predict_logits`."""

    arch: Architecture

    @property
    def params(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Every stored array in declaration order (used for serialization)."""
        raise NotImplementedError

    def forward(self, x: np.ndarray, mode: str = INFER, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def loss_and_grads(self, x, y, rng=None):
        logits = self.forward(x, TRAIN, rng)
        loss, dlogits = softmax_cross_entropy(logits, y)
        return loss, self.backward(dlogits)

    def predict_logits(self, x) -> np.ndarray:
        return self.forward(x, INFER)

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        expected = (self.arch.seq_len, self.arch.input_dim)
        if x.ndim != 3 or (self.arch.variant == "baseline" and x.shape[1:] != expected) or x.shape[2] != self.arch.input_dim:
            raise ValueError(f"{self.arch.name} expects input (B, {expected[0]}, {expected[1]}), got {x.shape}")
        return x


class LstmClassifier(Model):
    """LSTM over the slice sequence; the final hidden state feeds a dense head."""

    def __init__(self, arch: Architecture, cell: LstmCell, head: DenseLayer):
        self.arch, self.cell, self.head = arch, cell, head
        self._cache = None

    @classmethod
    def init(cls, arch: Architecture, rng: np.random.Generator) -> "LstmClassifier":
        cell = LstmCell.init(arch.input_dim, arch.hidden, rng)
        return cls(arch, cell, DenseLayer.init(arch.hidden, arch.n_classes, rng))

    @property
    def params(self):
        return {
            "lstm.Wx": self.cell.Wx,
            "lstm.Wh": self.cell.Wh,
            "lstm.b": self.cell.b,
            "head.W": self.head.W,
            "head.b": self.head.b,
        }

    def arrays(self):
        return list(self.params.items())

    def forward(self, x, mode=INFER, rng=None):
        x = self._check_input(x)
        _, (h_last, _), cache = lstm_forward(self.cell, x)
        self._cache = (cache, h_last)
        return dense_forward(self.head, h_last)

    def backward(self, dlogits):
        cache, h_last = self._cache
        dh, dW, db = dense_backward(self.head, h_last, dlogits)
        g = lstm_backward(self.cell, cache, dh_last=dh)
        return {"lstm.Wx": g["Wx"], "lstm.Wh": g["Wh"], "lstm.b": g["b"], "head.W": dW, "head.b": db}


class BaselineClassifier(Model):
    """Flattened sequence -> [Dense -> BN -> ReLU -> Dropout] x 2 -> Dense."""

    def __init__(self, arch: Architecture, dense: list[DenseLayer], norms: list[BatchNorm]):
        self.arch, self.dense, self.norms = arch, dense, norms
        self._cache = None

    @classmethod
    def init(cls, arch: Architecture, rng: np.random.Generator) -> "BaselineClassifier":
        sizes = [arch.seq_len * arch.input_dim, *arch.widths, arch.n_classes]
        dense = [DenseLayer.init(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        return cls(arch, dense, [BatchNorm.init(w) for w in arch.widths])

    @property
    def params(self):
        out = {}
        for i, layer in enumerate(self.dense):
            out[f"dense{i}.W"], out[f"dense{i}.b"] = layer.W, layer.b
            if i < len(self.norms):
                out[f"bn{i}.gamma"], out[f"bn{i}.beta"] = self.norms[i].gamma, self.norms[i].beta
        return out

    @property
    def buffers(self):
        out = {}
        for i, bn in enumerate(self.norms):
            out[f"bn{i}.running_mean"], out[f"bn{i}.running_var"] = bn.running_mean, bn.running_var
        return out

    def arrays(self):
        out = []
        for i, layer in enumerate(self.dense):
            out += [(f"dense{i}.W", layer.W), (f"dense{i}.b", layer.b)]
            if i < len(self.norms):
                bn = self.norms[i]
                out += [
                    (f"bn{i}.gamma", bn.gamma),
                    (f"bn{i}.beta", bn.beta),
                    (f"bn{i}.running_mean", bn.running_mean),
                    (f"bn{i}.running_var", bn.running_var),
                ]
        return out

    def forward(self, x, mode=INFER, rng=None):
        x = self._check_input(x)
        a = x.reshape(x.shape[0], -1)
        steps = []
        for layer, bn in zip(self.dense[:-1], self.norms):
            a_prev = a
            zn, bn_cache = batchnorm_forward(bn, dense_forward(layer, a_prev), mode)
            a, mask = dropout_forward(self.arch.dropout, relu(zn), mode, rng)
            steps.append((a_prev, bn_cache, zn, mask, a))
        self._cache = steps
        return dense_forward(self.dense[-1], a)

    def backward(self, dlogits):
        grads = {}
        last = len(self.dense) - 1
        a_in = self._cache[-1][-1]
        da, grads[f"dense{last}.W"], grads[f"dense{last}.b"] = dense_backward(self.dense[last], a_in, dlogits)
        for i in reversed(range(last)):
            a_prev, bn_cache, zn, mask, _ = self._cache[i]
            dr = da if mask is None else da * mask
            dzn = relu_backward(zn, dr)
            dz, grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = batchnorm_backward(bn_cache, dzn)
            da, grads[f"dense{i}.W"], grads[f"dense{i}.b"] = dense_backward(self.dense[i], a_prev, dz)
        return {k: grads[k] for k in self.params}


def init_model(arch: Architecture, seed: int) -> Model:
    rng = np.random.default_rng(seed)
    if arch.variant == "lstm":
        return LstmClassifier.init(arch, rng)
    return BaselineClassifier.init(arch, rng)
