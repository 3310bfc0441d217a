"""Layer descriptions, shape algebra and analytic parameter/FLOP counts.

Counting rules (per sample, batch axis excluded):

============  ===============================  =================================
kind          parameters                       FLOPs
============  ===============================  =================================
dense         in*out + out                     2*in*out
conv1d/2d     C_in*C_out*prod(kernel) + C_out  2*C_in*prod(kernel)*C_out*outputs
batchnorm     2*channels (affine)              2 per element
relu/sigmoid  0                                1 per element
softmax       0                                1 per element
maxpool2x2    0                                1 per input element
residual      sum of body                      body + 1 per element (skip add)
dropout,
flatten,
reshape,
transpose,
upsample2x    0                                0
============  ===============================  =================================

A multiply-accumulate counts as two operations; the ``in*out`` additions of a
dense layer already include its bias add.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = {
    "dense", "conv1d", "conv2d", "batchnorm1d", "batchnorm2d", "relu", "maxpool2x2",
    "dropout", "flatten", "softmax", "sigmoid", "upsample2x", "reshape", "transpose",
    "residual",
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self):
        d = {"kind": self.kind}
        for k, v in self.params.items():
            if k == "body":
                d[k] = [s.to_dict() for s in v]
            else:
                d[k] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if "body" in d:
            d["body"] = tuple(cls.from_dict(s) for s in d["body"])
        if "shape" in d:
            d["shape"] = tuple(d["shape"])
        if "perm" in d:
            d["perm"] = tuple(d["perm"])
        return cls(kind, d)

    def __hash__(self):
        return hash(repr(self.to_dict()))


# ------------------------------------------------------------------ builders
def dense(in_features, out_features):
    return LayerSpec("dense", {"in": int(in_features), "out": int(out_features)})


def conv2d(in_channels, out_channels, kernel=3, stride=1, padding=1):
    return LayerSpec("conv2d", {"in": int(in_channels), "out": int(out_channels),
                                "kernel": int(kernel), "stride": int(stride),
                                "padding": int(padding)})


def conv1d(in_channels, out_channels, kernel=3, stride=1, padding=1):
    return LayerSpec("conv1d", {"in": int(in_channels), "out": int(out_channels),
                                "kernel": int(kernel), "stride": int(stride),
                                "padding": int(padding)})


def batchnorm1d(channels):
    return LayerSpec("batchnorm1d", {"channels": int(channels)})


def batchnorm2d(channels):
    return LayerSpec("batchnorm2d", {"channels": int(channels)})


def relu():
    return LayerSpec("relu")


def sigmoid():
    return LayerSpec("sigmoid")


def softmax(scale=1.0):
    return LayerSpec("softmax", {"scale": float(scale)})


def maxpool2x2():
    return LayerSpec("maxpool2x2")


def upsample2x():
    return LayerSpec("upsample2x")


def dropout(rate):
    return LayerSpec("dropout", {"rate": float(rate)})


def flatten():
    return LayerSpec("flatten")


def reshape(*shape):
    return LayerSpec("reshape", {"shape": tuple(int(s) for s in shape)})


def transpose(*perm):
    return LayerSpec("transpose", {"perm": tuple(int(p) for p in perm)})


def residual(*body):
    return LayerSpec("residual", {"body": tuple(body)})


# ------------------------------------------------------------- shape algebra
def output_shape(spec, in_shape):
    """Per-sample output shape of ``spec`` applied to ``in_shape``."""
    in_shape = tuple(in_shape)
    k = spec.kind

    def need(ndim, what):
        if len(in_shape) != ndim or (what is not None and in_shape[0] != what):
            raise ValueError(f"{k}: incompatible input shape {in_shape} for {spec.to_dict()}")

    if k == "dense":
        need(1, spec["in"])
        return (spec["out"],)
    if k in ("conv1d", "conv2d"):
        nd = 1 if k == "conv1d" else 2
        need(nd + 1, spec["in"])
        ks, st, pd = spec["kernel"], spec["stride"], spec["padding"]
        spatial = tuple((n + 2 * pd - ks) // st + 1 for n in in_shape[1:])
        if min(spatial) <= 0:
            raise ValueError(f"{k}: kernel {ks} too large for input {in_shape}")
        return (spec["out"],) + spatial
    if k == "batchnorm1d":
        if len(in_shape) not in (1, 2) or in_shape[0] != spec["channels"]:
            raise ValueError(f"{k}: incompatible input shape {in_shape} for {spec.to_dict()}")
        return in_shape
    if k == "batchnorm2d":
        need(3, spec["channels"])
        return in_shape
    if k == "maxpool2x2":
        need(3, None)
        if in_shape[1] % 2 or in_shape[2] % 2:
            raise ValueError(f"maxpool2x2: spatial size {in_shape[1:]} is not even")
        return (in_shape[0], in_shape[1] // 2, in_shape[2] // 2)
    if k == "upsample2x":
        need(3, None)
        return (in_shape[0], in_shape[1] * 2, in_shape[2] * 2)
    if k == "flatten":
        return (int(np.prod(in_shape)),)
    if k == "reshape":
        if int(np.prod(spec["shape"])) != int(np.prod(in_shape)):
            raise ValueError(f"reshape: cannot reshape {in_shape} to {spec['shape']}")
        return tuple(spec["shape"])
    if k == "transpose":
        if len(spec["perm"]) != len(in_shape):
            raise ValueError(f"transpose: perm {spec['perm']} does not match {in_shape}")
        return tuple(in_shape[p] for p in spec["perm"])
    if k == "residual":
        shape = in_shape
        for s in spec["body"]:
            shape = output_shape(s, shape)
        if shape != in_shape:
            raise ValueError(f"residual: body maps {in_shape} to {shape}")
        return in_shape
    return in_shape


def param_count(spec):
    k = spec.kind
    if k == "dense":
        return spec["in"] * spec["out"] + spec["out"]
    if k == "conv1d":
        return spec["in"] * spec["out"] * spec["kernel"] + spec["out"]
    if k == "conv2d":
        return spec["in"] * spec["out"] * spec["kernel"] ** 2 + spec["out"]
    if k in ("batchnorm1d", "batchnorm2d"):
        return 2 * spec["channels"]
    if k == "residual":
        return sum(param_count(s) for s in spec["body"])
    return 0


def flop_count(spec, in_shape):
    k = spec.kind
    out = output_shape(spec, in_shape)
    n_in = int(np.prod(in_shape))
    n_out = int(np.prod(out))
    if k == "dense":
        return 2 * spec["in"] * spec["out"]
    if k == "conv1d":
        return 2 * spec["in"] * spec["kernel"] * n_out
    if k == "conv2d":
        return 2 * spec["in"] * spec["kernel"] ** 2 * n_out
    if k in ("batchnorm1d", "batchnorm2d"):
        return 2 * n_in
    if k in ("relu", "sigmoid", "softmax"):
        return n_in
    if k == "maxpool2x2":
        return n_in
    if k == "residual":
        total, shape = 0, tuple(in_shape)
        for s in spec["body"]:
            total += flop_count(s, shape)
            shape = output_shape(s, shape)
        return total + n_out
    return 0


def count_params_flops(specs, input_shape):
    """Return ``(param_count, flop_count)`` of a layer chain for one sample."""
    params = flops = 0
    shape = tuple(input_shape)
    for s in specs:
        params += param_count(s)
        flops += flop_count(s, shape)
        shape = output_shape(s, shape)
    return params, flops


def chain_output_shape(specs, input_shape):
    shape = tuple(input_shape)
    for s in specs:
        shape = output_shape(s, shape)
    return shape
