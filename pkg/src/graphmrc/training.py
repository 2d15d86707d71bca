"""Training loop, optimizer, learning-rate schedule and evaluation.

Adam with a piecewise-linear learning rate: linear warmup from zero to the
peak over the warmup fraction of total steps, then linear decay back to zero.
The checkpoint kept is the one with the best validation accuracy. All
randomness flows from the single config seed; single-threaded runs with the
same seed and config are bit-identical.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import ExampleRecord, validate_examples
from .encoder import Vocabulary
from .lexicon import LexiconSet, load_lexicon
from .model import ModelConfig, TwoBranchModel

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    """Flat run configuration; mirrors the config-file keys one to one.

    Defaults are the calibrated desk-scale toy configuration.
    """

    learning_rate: float = 1.5e-3
    batch_size: int = 8
    epochs: int = 30
    warmup_frac: float = 0.15
    seed: int = 0
    grad_clip: Optional[float] = 1.0
    # architecture
    hidden_dim: int = 64
    heads: int = 2
    layers: int = 2
    encoder_layers: int = 2
    max_seq_len: int = 64
    delta: float = 0.5
    precision: str = "float32"
    nonlinearity: str = "gelu"
    gate_mode: str = "dynamic"
    score_pooling: str = "cls"
    node_positions: str = "sinusoidal"
    use_causal_bias: bool = True
    use_cooccurrence_bias: bool = True

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in [0, 1)")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive (or null to disable)")
        self.to_model_config()  # validate the architecture fields

    def to_model_config(self) -> ModelConfig:
        names = {f.name for f in dataclasses.fields(ModelConfig)}
        return ModelConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        """The published full-size hyperparameters (needs a pretrained encoder
        and GPU budget to be useful; provided for completeness)."""
        base = dict(
            learning_rate=5e-6,
            batch_size=2,
            epochs=12,
            heads=5,
            layers=5,
            max_seq_len=256,
            hidden_dim=1024,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(payload, dict):
            raise ValueError(f"{path}: config must be a flat JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**payload)

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True), encoding="utf-8"
        )


@dataclass
class Metrics:
    split: str
    accuracy: float
    losses: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")


@dataclass
class TrainResult:
    model: TwoBranchModel
    train_metrics: Metrics
    valid_metrics: Optional[Metrics]
    valid_accuracy_curve: tuple[float, ...] = ()
    best_epoch: Optional[int] = None


def lr_schedule(step: int, total_steps: int, warmup_frac: float, peak: float) -> float:
    """Piecewise-linear: 0 at step 0, peak at the warmup boundary, ~0 at the end."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    warmup = warmup_frac * total_steps
    if step <= warmup:
        return peak * (step / warmup) if warmup > 0 else peak
    return peak * max(0.0, (total_steps - step) / (total_steps - warmup))


class Adam:
    def __init__(
        self,
        params: Sequence,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def clip_global_norm(params: Sequence, max_norm: float) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * np.asarray(factor, dtype=p.grad.dtype)
    return norm


def evaluate(model: TwoBranchModel, data: Sequence, split: str = "eval") -> Metrics:
    records = validate_examples(data, require_labels=True)
    correct = sum(
        1
        for r in records
        if model.predict_example(r.context, r.question, list(r.options)) == r.label
    )
    return Metrics(split=split, accuracy=correct / len(records))


def build_vocabulary(records: Sequence[ExampleRecord]) -> Vocabulary:
    texts = []
    for r in records:
        texts.append(r.context)
        texts.append(r.question)
        texts.extend(r.options)
    return Vocabulary.from_corpus(texts)


def train(
    config: TrainConfig,
    train_data: Sequence,
    valid_data: Optional[Sequence] = None,
    *,
    lexicon: Optional[LexiconSet] = None,
) -> TrainResult:
    """Train from scratch; returns the best-validation checkpoint when
    validation data is given, otherwise the final parameters."""
    train_records = validate_examples(train_data, require_labels=True)
    valid_records = (
        validate_examples(valid_data, require_labels=True) if valid_data is not None else None
    )
    lexicon = lexicon if lexicon is not None else load_lexicon()
    vocab = build_vocabulary(train_records)
    model = TwoBranchModel(config.to_model_config(), vocab, lexicon, seed=config.seed)
    params = model.parameters()
    optimizer = Adam(params)
    shuffle_rng = np.random.default_rng(config.seed + 1)

    n = len(train_records)
    batches_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = batches_per_epoch * config.epochs

    epoch_losses: list[float] = []
    valid_curve: list[float] = []
    best_snapshot = None
    best_accuracy = -1.0
    best_epoch: Optional[int] = None
    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_records[i] for i in order[start:start + config.batch_size]]
            model.zero_grad()
            batch_loss = 0.0
            for record in batch:
                loss = model.example_loss(
                    record.context, record.question, list(record.options), record.label
                )
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss {value} at epoch {epoch} step {step} "
                        f"(record {record.id!r}); try a lower learning rate"
                    )
                # mean over the batch: scale each example's gradient contribution
                scaled = loss * (1.0 / len(batch))
                scaled.backward()
                batch_loss += value
            if config.grad_clip is not None:
                clip_global_norm(params, config.grad_clip)
            step += 1
            optimizer.step(lr_schedule(step, total_steps, config.warmup_frac, config.learning_rate))
            running += batch_loss / len(batch)
        epoch_losses.append(running / batches_per_epoch)
        if valid_records is not None:
            accuracy = evaluate(model, valid_records, split="valid").accuracy
            valid_curve.append(accuracy)
            # ties go to the later epoch: same validation score, more training
            if accuracy >= best_accuracy:
                best_accuracy = accuracy
                best_snapshot = model.snapshot()
                best_epoch = epoch
            logger.info(
                "epoch %d: train loss %.4f, valid accuracy %.3f", epoch, epoch_losses[-1], accuracy
            )
        else:
            logger.info("epoch %d: train loss %.4f", epoch, epoch_losses[-1])

    if best_snapshot is not None:
        model.restore(best_snapshot)
    train_metrics = Metrics(
        split="train",
        accuracy=evaluate(model, train_records, split="train").accuracy,
        losses=tuple(epoch_losses),
    )
    valid_metrics = None
    if valid_records is not None:
        valid_metrics = Metrics(
            split="valid", accuracy=best_accuracy, losses=()
        )
    return TrainResult(
        model=model,
        train_metrics=train_metrics,
        valid_metrics=valid_metrics,
        valid_accuracy_curve=tuple(valid_curve),
        best_epoch=best_epoch,
    )
