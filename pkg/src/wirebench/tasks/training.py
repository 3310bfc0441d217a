"""Training loops for the downstream tasks.

Classification (LoS, beam) is plain minibatch Adam on cross-entropy.  Power
allocation follows a two-phase schedule: the first ``warmup_fraction`` of the
epochs regress the PGD labels of a supervised subset with MSE, the rest
maximize the sum rate of every training instance directly.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..nn import Adam
from ..nn.losses import cross_entropy, mse, neg_se
from .metrics import weighted_f1
from .models import TaskModelSpec
from .power import evaluate_se

log = logging.getLogger(__name__)

EPOCH_COLUMNS = ("task", "representation", "epoch", "split", "metric", "value", "seed")


class TrainingError(RuntimeError):
    pass


@dataclass
class Schedule:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    warmup_fraction: float = 0.6
    supervised_fraction: float = 0.25


@dataclass
class FeatureScaler:
    """Per-feature standardization fitted on training features."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X, axis=0):
        X = np.asarray(X, dtype=float)
        axes = tuple(range(X.ndim - 1)) if axis is None else axis
        std = X.std(axis=axes)
        return cls(X.mean(axis=axes), np.where(std > 1e-12, std, 1.0))

    def __call__(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std


@dataclass
class TrainedModel:
    spec: TaskModelSpec
    network: object
    scaler: FeatureScaler
    curve: list = field(default_factory=list)   # (epoch, metric name, value)

    def logits(self, X):
        return self.network.predict(self.scaler(X))

    def predict(self, X):
        out = self.logits(X)
        if self.spec.task == "power":
            return out
        return np.argmax(out, axis=-1)


def _rng(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def _check(value, what, epoch):
    if not np.isfinite(value):
        raise TrainingError(f"{what} loss became {value} at epoch {epoch}")


def train_classifier(spec, X, y, X_val=None, y_val=None, schedule=None):
    """Train a LoS or beam classifier; the curve holds validation weighted F1."""
    schedule = schedule or Schedule()
    y = np.asarray(y).astype(int)
    if y.size and y.max() >= spec.num_classes:
        raise TrainingError(f"label {y.max()} out of range for a {spec.num_classes}-class model")
    init_rng = _rng(schedule.seed, 1)
    rng = _rng(schedule.seed, 2)
    net = spec.build(init_rng)
    scaler = FeatureScaler.fit(X)
    Xs = scaler(X)
    opt = Adam(net.parameters(), lr=schedule.lr)
    model = TrainedModel(spec, net, scaler)
    for epoch in range(schedule.epochs):
        net.train()
        order = rng.permutation(len(Xs))
        for start in range(0, len(order), schedule.batch_size):
            idx = order[start:start + schedule.batch_size]
            if len(idx) < 2:
                continue
            loss = cross_entropy(net.forward(Xs[idx], rng=rng), y[idx])
            _check(loss.item(), spec.task, epoch)
            opt.zero_grad()
            loss.backward()
            opt.step()
        net.eval()
        if X_val is not None and len(X_val):
            f1 = weighted_f1(model.predict(X_val), y_val, spec.num_classes)
            model.curve.append((epoch, "f1", f1))
    return model


def power_features(embed_fn, instances_channels):
    """Stack per-user features: list of (K, M, N) channel groups -> (B, K, d)."""
    return np.stack([embed_fn(np.asarray(h)) for h in instances_channels])


def mean_se(p_hat, instances):
    return float(np.mean([evaluate_se(p, inst) for p, inst in zip(p_hat, instances)]))


def train_power(spec, X, instances, labels, X_val=None, val_instances=None, schedule=None):
    """Hybrid supervised / unsupervised training of the power model.

    ``labels`` maps instance position -> PGD power vector for the supervised
    subset (a dict or a sequence with ``None`` for unlabeled instances).
    The curve holds the validation mean sum rate per epoch.
    """
    schedule = schedule or Schedule()
    X = np.asarray(X, dtype=float)
    gains = np.stack([i.gains for i in instances])
    noise = np.array([i.noise_power for i in instances])
    if isinstance(labels, dict):
        sup_idx = np.array(sorted(labels), dtype=int)
        targets = np.stack([labels[i] for i in sup_idx]) if len(sup_idx) else np.zeros((0, spec.num_users))
    else:
        sup_idx = np.array([i for i, p in enumerate(labels) if p is not None], dtype=int)
        targets = np.stack([labels[i] for i in sup_idx]) if len(sup_idx) else np.zeros((0, spec.num_users))
    init_rng = _rng(schedule.seed, 3)
    rng = _rng(schedule.seed, 4)
    net = spec.build(init_rng)
    scaler = FeatureScaler.fit(X.reshape(-1, X.shape[-1]))
    Xs = scaler(X)
    opt = Adam(net.parameters(), lr=schedule.lr)
    model = TrainedModel(spec, net, scaler)
    warmup = int(round(schedule.warmup_fraction * schedule.epochs)) if len(sup_idx) else 0
    for epoch in range(schedule.epochs):
        net.train()
        supervised = epoch < warmup
        pool = sup_idx if supervised else np.arange(len(Xs))
        order = rng.permutation(len(pool))
        for start in range(0, len(order), schedule.batch_size):
            sel = order[start:start + schedule.batch_size]
            if len(sel) < 2:
                continue
            idx = pool[sel]
            out = net.forward(Xs[idx], rng=rng)
            if supervised:
                loss = mse(out, targets[sel])
            else:
                loss = neg_se(out, gains[idx], noise[idx])
            _check(loss.item(), "power", epoch)
            opt.zero_grad()
            loss.backward()
            opt.step()
        net.eval()
        if X_val is not None and len(X_val):
            model.curve.append((epoch, "se", mean_se(model.predict(X_val), val_instances)))
    return model


def write_epoch_metrics(path, model, task, representation, seed, split="val"):
    """Append one row per curve point to a CSV (header written for new files)."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(EPOCH_COLUMNS)
        for epoch, metric, value in model.curve:
            w.writerow([task, representation, epoch, split, metric, repr(float(value)), seed])
