"""Downstream network architectures shared by every representation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Network
from ..nn import spec as S


@dataclass(frozen=True)
class TaskModelSpec:
    task: str            # "los", "beam" or "power"
    feature_dim: int
    num_classes: int = 2
    num_users: int = 1
    hidden: int = 256
    dropout: float = 0.3
    channels: int = 64
    blocks: int = 3
    kernel: int = 3
    p_total: float = 1.0

    def layers(self):
        if self.task == "los":
            return los_layers(self.feature_dim, self.hidden)
        if self.task == "beam":
            return beam_layers(self.feature_dim, self.num_classes, self.dropout)
        if self.task == "power":
            return power_layers(self.feature_dim, self.num_users, self.channels, self.blocks,
                                self.kernel, self.p_total)
        raise ValueError(f"unknown task {self.task!r}")

    @property
    def input_shape(self):
        return (self.num_users, self.feature_dim) if self.task == "power" else (self.feature_dim,)

    def build(self, rng=None, dtype=np.float64):
        return Network(self.layers(), self.input_shape, rng, dtype)


def los_layers(d, hidden=256):
    return [S.dense(d, hidden), S.relu(), S.dense(hidden, 2)]


def beam_layers(d, K, rate=0.3):
    layers = []
    width = d
    for _ in range(3):
        nxt = max(width // 2, 1)
        layers += [S.dense(width, nxt), S.batchnorm1d(nxt), S.relu(), S.dropout(rate)]
        width = nxt
    return layers + [S.dense(width, K)]


def power_layers(d, K, channels=64, blocks=3, kernel=3, p_total=1.0):
    """1-D ResCNN over the user axis: input (K, d) is read as d channels of length K."""
    pad = kernel // 2
    block = [S.conv1d(channels, channels, kernel, 1, pad), S.batchnorm1d(channels), S.relu(),
             S.conv1d(channels, channels, kernel, 1, pad), S.batchnorm1d(channels), S.relu()]
    return ([S.transpose(1, 0), S.conv1d(d, channels, kernel, 1, pad), S.relu()]
            + [S.residual(*block) for _ in range(blocks)]
            + [S.conv1d(channels, 1, kernel, 1, pad), S.flatten(), S.softmax(p_total)])
