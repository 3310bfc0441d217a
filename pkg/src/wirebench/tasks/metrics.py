from __future__ import annotations

import numpy as np


def weighted_f1(predictions, labels, num_classes=None):
    """Support-weighted F1 over classes.

    A class with no true and no predicted samples has zero support and drops
    out of the weighted sum; a class with support but zero precision+recall
    contributes F1 = 0.
    """
    pred = np.asarray(predictions).astype(int).ravel()
    true = np.asarray(labels).astype(int).ravel()
    if len(pred) != len(true):
        raise ValueError(f"{len(pred)} predictions for {len(true)} labels")
    if len(true) == 0:
        raise ValueError("weighted_f1 of an empty sample")
    C = num_classes or int(max(pred.max(), true.max())) + 1
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (true, pred), 1)
    tp = np.diag(conf).astype(float)
    support = conf.sum(axis=1).astype(float)
    predicted = conf.sum(axis=0).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return float(np.sum(support / support.sum() * f1))


def accuracy(predictions, labels):
    return float(np.mean(np.asarray(predictions) == np.asarray(labels)))
