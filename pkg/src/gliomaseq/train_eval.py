"""Full-batch training, evaluation and the repeated-split protocol."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .features import DatasetSplit, PatientSequence, derive_seed, split_dataset, stack
from .nn import AdamState, Architecture, Model, adam_step, init_model, param_count
from .nn.models import N_CLASSES

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"training loss became {loss} at epoch {epoch}")


@dataclass
class TrainConfig:
    epochs: int = 200
    base_lr: float = 0.005
    lr_decay_factor: float = 0.1
    lr_decay_epoch: int = 30
    dropout: float = 0.2
    betas: tuple[float, float] = (0.9, 0.999)
    seed: int = 0
    runs: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.base_lr < 0:
            raise ConfigurationError(f"base_lr must be >= 0, got {self.base_lr}")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigurationError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")
        self.betas = tuple(float(b) for b in self.betas)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Single step decay: base_lr before lr_decay_epoch, base_lr * factor after."""
    if epoch < cfg.lr_decay_epoch:
        return cfg.base_lr
    return cfg.base_lr * cfg.lr_decay_factor


@dataclass
class Metrics:
    per_run_accuracy: list[float]
    average_accuracy: float
    best_accuracy: float
    train_time_seconds: float
    param_count: int
    confusion: list[list[int]] = field(default_factory=lambda: [[0] * N_CLASSES for _ in range(N_CLASSES)])

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Metrics":
        return cls(**json.loads(text))


def _check_dims(arch: Architecture, x: np.ndarray) -> None:
    _, s, d = x.shape
    if d != arch.input_dim or (arch.variant == "baseline" and s != arch.seq_len):
        raise ConfigurationError(
            f"{arch.name} was built for (S={arch.seq_len}, D={arch.input_dim}) but the data is (S={s}, D={d})"
        )


def predict(model: Model, patients: list[PatientSequence]) -> np.ndarray:
    x, _ = stack(patients)
    _check_dims(model.arch, x)
    # argmax picks the lowest index on ties
    return np.argmax(model.predict_logits(x), axis=1)


def evaluate(model: Model, patients: list[PatientSequence]) -> Metrics:
    if not patients:
        raise ValueError("cannot evaluate on an empty patient list")
    pred = predict(model, patients)
    truth = np.array([int(p.label) for p in patients])
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    np.add.at(confusion, (truth, pred), 1)
    acc = float(np.mean(pred == truth))
    return Metrics(
        per_run_accuracy=[acc],
        average_accuracy=acc,
        best_accuracy=acc,
        train_time_seconds=0.0,
        param_count=param_count(model.arch),
        confusion=confusion.tolist(),
    )


def train(arch: Architecture, split: DatasetSplit, cfg: TrainConfig, on_epoch=None):
    """Train from a seeded init and evaluate the final-epoch model on the test split.

    on_epoch(epoch, loss) is called once per epoch with the pre-update loss.
    Returns (model, metrics).
    """
    if not split.train or not split.test:
        raise ValueError("split needs non-empty train and test sets")
    x, y = stack(split.train)
    _check_dims(arch, x)
    if arch.dropout != cfg.dropout:
        arch = dataclasses.replace(arch, dropout=cfg.dropout)

    model = init_model(arch, derive_seed(cfg.seed, "init"))
    rng = np.random.default_rng(derive_seed(cfg.seed, "dropout"))
    state = AdamState()
    beta1, beta2 = cfg.betas
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        loss, grads = model.loss_and_grads(x, y, rng)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        if on_epoch is not None:
            on_epoch(epoch, loss)
        adam_step(model.params, grads, state, lr_at_epoch(cfg, epoch), beta1, beta2)
    elapsed = time.perf_counter() - start

    metrics = evaluate(model, split.test)
    metrics.train_time_seconds = elapsed
    return model, metrics


def run_protocol(arch: Architecture, dataset: list[PatientSequence], cfg: TrainConfig, test_fraction: float = 0.2):
    """Repeat split -> train -> evaluate `cfg.runs` times.

    Run r uses seed derive_seed(cfg.seed, r) for both the split and training.
    Returns (aggregated metrics, model of the first best-scoring run).
    Confusion counts are summed over runs.
    """
    accs, times = [], []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    best_model, best_acc = None, -1.0
    for r in range(cfg.runs):
        run_seed = derive_seed(cfg.seed, r)
        split = split_dataset(dataset, test_fraction, seed=run_seed)
        model, m = train(arch, split, dataclasses.replace(cfg, seed=run_seed))
        log.info("run %d: accuracy %.4f (%.2fs)", r, m.average_accuracy, m.train_time_seconds)
        accs.append(m.average_accuracy)
        times.append(m.train_time_seconds)
        confusion += np.asarray(m.confusion)
        if m.average_accuracy > best_acc:
            best_model, best_acc = model, m.average_accuracy
    metrics = Metrics(
        per_run_accuracy=accs,
        average_accuracy=float(np.mean(accs)),
        best_accuracy=float(np.max(accs)),
        train_time_seconds=float(np.mean(times)),
        param_count=param_count(arch),
        confusion=confusion.tolist(),
    )
    return metrics, best_model
