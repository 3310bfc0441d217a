"""Scalar training objectives."""
from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import as_tensor

EPS = 1e-12


def bce(prob, target):
    """Binary cross-entropy on probabilities, clamped to ``[EPS, 1 - EPS]``."""
    prob = as_tensor(prob)
    y = np.asarray(target, dtype=prob.dtype).reshape(prob.shape)
    p = prob.clip(EPS, 1.0 - EPS)
    ll = p.log() * y + (1.0 - p).log() * (1.0 - y)
    return -ll.mean()


def cross_entropy(logits, target):
    """Categorical cross-entropy from logits; ``target`` is class indices or one-hot."""
    logits = as_tensor(logits)
    target = np.asarray(target)
    if target.ndim == logits.ndim:
        onehot = target.astype(logits.dtype)
    else:
        if target.size and (target.min() < 0 or target.max() >= logits.shape[-1]):
            raise ValueError(f"labels outside [0, {logits.shape[-1]}) for a "
                             f"{logits.shape[-1]}-class model")
        onehot = np.zeros(logits.shape, dtype=logits.dtype)
        onehot[np.arange(len(target)), target.astype(int)] = 1.0
    logp = F.log_softmax(logits, axis=-1)
    return -(logp * onehot).sum() * (1.0 / logits.shape[0])


def mse(pred, target):
    """Batch mean of the squared Euclidean error ``||pred - target||^2``."""
    pred = as_tensor(pred)
    diff = pred - np.asarray(target, dtype=pred.dtype)
    per_sample = (diff * diff).reshape(pred.shape[0], -1).sum(axis=1)
    return per_sample.mean()


def neg_se(power, gains, noise_power):
    """Negative batch-mean sum spectral efficiency of predicted powers.

    ``power`` is (B, K), ``gains`` (B, K, K) with ``gains[b, i, j] = |h_i^H w_j|^2``
    and ``noise_power`` (B,) or scalar.
    """
    from ..classical import sinr_vector

    power = as_tensor(power)
    gains = np.asarray(gains, dtype=power.dtype)
    noise = np.asarray(noise_power, dtype=power.dtype).reshape(-1, 1)
    s = sinr_vector(gains, power, noise)
    rate = (s + 1.0).log() * (1.0 / np.log(2.0))
    return -rate.sum() * (1.0 / power.shape[0])


def loss_eval(kind, pred, target):
    """Dispatch by name: ``bce``, ``ce``, ``mse`` or ``neg_se``.

    For ``neg_se`` the target is a PowerInstance, a list of them, or a
    ``(gains, noise_power)`` pair.
    """
    if kind == "bce":
        return bce(pred, target)
    if kind == "ce":
        return cross_entropy(pred, target)
    if kind == "mse":
        return mse(pred, target)
    if kind == "neg_se":
        if isinstance(target, tuple) and len(target) == 2 and isinstance(target[0], np.ndarray):
            gains, noise = target
        else:
            insts = target if isinstance(target, (list, tuple)) else [target]
            gains = np.stack([i.gains for i in insts])
            noise = np.array([i.noise_power for i in insts])
        return neg_se(pred, gains, noise)
    raise ValueError(f"unknown loss {kind!r}")

