"""Training loop, metrics, weight statistics and ablations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nn
from .model import AME, AMEModel, ModelConfig, label_of, make_batch

FULL_BATCH_LIMIT = 512
MINIBATCH = 32
DEFAULT_SIGMA = 0.25


class NonFiniteLoss(FloatingPointError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class TooFewExamples(ValueError):
    pass


class EmptyTestSet(ValueError):
    pass


class MixedVulnerabilities(ValueError):
    pass


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)  # mean loss per epoch
    epochs: int = 0
    train_accuracy: float = 0.0

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "losses": self.losses, "train_accuracy": self.train_accuracy}


def _check_vulnerability(model: AMEModel, examples) -> None:
    kinds = {ex.vulnerability for ex in examples}
    if kinds - {model.config.vulnerability}:
        raise MixedVulnerabilities(
            f"model is for {model.config.vulnerability!r}, examples contain {sorted(kinds)}"
        )


def train(
    model: AMEModel,
    examples: Sequence,
    epochs: int = 100,
    seed: int = 0,
    lr: float = 1e-3,
    batch_size: Optional[int] = None,
) -> TrainResult:
    """Minimize mean binary cross-entropy with Adam.

    Full-batch updates up to 512 examples, otherwise shuffled minibatches of
    32 (or ``batch_size``).
    """
    if not examples:
        raise TooFewExamples("no training examples")
    _check_vulnerability(model, examples)
    inputs = [ex.model_input() for ex in examples]
    labels = np.array([ex.label for ex in examples], dtype=np.float64)
    n = len(examples)
    if batch_size is None:
        batch_size = n if n <= FULL_BATCH_LIMIT else MINIBATCH
    rng = np.random.default_rng(seed)
    full = make_batch(inputs) if batch_size >= n else None
    result = TrainResult()
    for epoch in range(epochs):
        if full is not None:
            batches = [(full, labels)]
        else:
            order = rng.permutation(n)
            batches = [
                (make_batch([inputs[i] for i in idx]), labels[idx])
                for idx in np.array_split(order, int(np.ceil(n / batch_size)))
            ]
        total = 0.0
        for b, (batch, y) in enumerate(batches):
            loss = model.loss(batch, y)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(epoch, b, value)
            nn.backward(loss)
            nn.optimizer_step(model.params, lr=lr)
            total += value * len(y)
        result.losses.append(total / n)
    result.epochs = epochs
    result.train_accuracy = evaluate(model, examples).accuracy
    return result


def predict_logits(model: AMEModel, examples: Sequence, chunk: int = 512) -> np.ndarray:
    out = []
    for i in range(0, len(examples), chunk):
        batch = make_batch([ex.model_input() for ex in examples[i:i + chunk]])
        out.append(model.forward(batch).logits.data[:, 0])
    return np.concatenate(out) if out else np.zeros(0)


def predict_weights(model: AMEModel, examples: Sequence, chunk: int = 512) -> np.ndarray:
    out = []
    for i in range(0, len(examples), chunk):
        batch = make_batch([ex.model_input() for ex in examples[i:i + chunk]])
        out.append(model.forward(batch).weights.data)
    return np.concatenate(out) if out else np.zeros((0, len(model.config.feature_names())))


# -- metrics ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    recall: float
    precision: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
        }


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> EvalReport:
    """Percentages; a ratio with an empty denominator is reported as 0."""
    total = tp + fp + tn + fn
    if total == 0:
        raise EmptyTestSet("no examples to score")
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(tp, fp, tn, fn, 100.0 * (tp + tn) / total, recall, precision, f1)


def metrics(y_true, y_pred) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return metrics_from_counts(tp, fp, tn, fn)


def evaluate(model: AMEModel, examples: Sequence) -> EvalReport:
    if not examples:
        raise EmptyTestSet("test set is empty")
    preds = label_of(predict_logits(model, examples))
    return metrics([ex.label for ex in examples], preds)


# -- interpretability -------------------------------------------------------------------


@dataclass
class WeightStats:
    features: list
    sigma: float
    n: int
    above: list   # count of weight > sigma per feature
    argmax: list  # count of being the largest weight (ties -> lowest index)
    mean: list
    std: list     # population standard deviation

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "n": self.n,
            "features": [
                {"name": f, "above_sigma": a, "argmax": m, "mean": mu, "std": sd}
                for f, a, m, mu, sd in zip(self.features, self.above, self.argmax, self.mean, self.std)
            ],
        }


def weight_stats_from_weights(weights, features: Sequence[str], sigma: float = DEFAULT_SIGMA) -> WeightStats:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] == 0:
        raise EmptyTestSet("no weights to summarize")
    winners = np.argmax(w, axis=1)  # first maximum wins ties
    return WeightStats(
        features=list(features),
        sigma=sigma,
        n=int(w.shape[0]),
        above=[int(c) for c in (w > sigma).sum(axis=0)],
        argmax=[int(np.sum(winners == j)) for j in range(w.shape[1])],
        mean=[float(x) for x in w.mean(axis=0)],
        std=[float(x) for x in w.std(axis=0)],
    )


def weight_stats(model: AMEModel, examples: Sequence, sigma: float = DEFAULT_SIGMA) -> WeightStats:
    if not examples:
        raise EmptyTestSet("test set is empty")
    return weight_stats_from_weights(predict_weights(model, examples), model.config.feature_names(), sigma)


# -- data splits and ablations ------------------------------------------------------------


def split_dataset(examples: Sequence, seed: int = 0, train_fraction: float = 0.8):
    """Stratified random split: each label class contributes round(80%) to training."""
    if len(examples) < 5:
        raise TooFewExamples(f"need at least 5 examples to split, got {len(examples)}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in sorted({ex.label for ex in examples}):
        idx = np.array([i for i, ex in enumerate(examples) if ex.label == label])
        idx = idx[rng.permutation(len(idx))]
        k = int(np.floor(train_fraction * len(idx) + 0.5))
        train_idx += idx[:k].tolist()
        test_idx += idx[k:].tolist()
    return [examples[i] for i in sorted(train_idx)], [examples[i] for i in sorted(test_idx)]


def ablation(
    variant: str,
    train_set: Sequence,
    test_set: Sequence,
    seed: int = 0,
    epochs: int = 100,
    lr: float = 1e-3,
    **config,
):
    """Train ``variant`` (AME, AME-RG or AME-RP) from scratch and score it on ``test_set``."""
    vuln = train_set[0].vulnerability
    model = AMEModel(ModelConfig(vulnerability=vuln, variant=variant, **config), seed=seed)
    history = train(model, train_set, epochs=epochs, seed=seed, lr=lr)
    return evaluate(model, test_set), model, history


__all__ = [
    "AME",
    "EmptyTestSet",
    "EvalReport",
    "NonFiniteLoss",
    "TooFewExamples",
    "TrainResult",
    "WeightStats",
    "ablation",
    "evaluate",
    "metrics",
    "metrics_from_counts",
    "split_dataset",
    "train",
    "weight_stats",
    "weight_stats_from_weights",
]
