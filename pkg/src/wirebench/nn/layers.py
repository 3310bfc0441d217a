"""Layer evaluation and a small sequential network container."""
from __future__ import annotations

import numpy as np

from . import functional as F
from .spec import LayerSpec, chain_output_shape, count_params_flops
from .tensor import Tensor, as_tensor


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def init_params(spec, rng, dtype=np.float64):
    """Fresh parameters (and running-statistic buffers) for one layer.

    Weights are Glorot-uniform, biases zero, batchnorm affine at (1, 0).
    """
    k = spec.kind
    if k == "dense":
        i, o = spec["in"], spec["out"]
        return {"weight": _glorot(rng, (i, o), i, o, dtype),
                "bias": Tensor(np.zeros(o, dtype=dtype), requires_grad=True)}
    if k in ("conv1d", "conv2d"):
        i, o, ks = spec["in"], spec["out"], spec["kernel"]
        kshape = (ks,) if k == "conv1d" else (ks, ks)
        rf = int(np.prod(kshape))
        return {"weight": _glorot(rng, (o, i) + kshape, i * rf, o * rf, dtype),
                "bias": Tensor(np.zeros(o, dtype=dtype), requires_grad=True)}
    if k in ("batchnorm1d", "batchnorm2d"):
        c = spec["channels"]
        return {"gamma": Tensor(np.ones(c, dtype=dtype), requires_grad=True),
                "beta": Tensor(np.zeros(c, dtype=dtype), requires_grad=True),
                "running_mean": np.zeros(c, dtype=dtype),
                "running_var": np.ones(c, dtype=dtype)}
    if k == "residual":
        return {"body": [init_params(s, rng, dtype) for s in spec["body"]]}
    return {}


def layer_apply(spec, x, params, mode="train", rng=None):
    """Apply one layer to a batched input ``x`` (batch axis first).

    ``mode`` is ``"train"`` or ``"eval"``; it switches batchnorm between batch
    and running statistics and enables dropout.
    """
    x = as_tensor(x)
    training = mode == "train"
    k = spec.kind
    try:
        chain_output_shape([spec], x.shape[1:])
    except ValueError as exc:
        raise ValueError(f"layer {k}: input shape {x.shape[1:]} rejected ({exc})") from None

    if k == "dense":
        return x @ params["weight"] + params["bias"]
    if k == "conv2d":
        return F.conv2d(x, params["weight"], params["bias"], spec["stride"], spec["padding"])
    if k == "conv1d":
        return F.conv1d(x, params["weight"], params["bias"], spec["stride"], spec["padding"])
    if k in ("batchnorm1d", "batchnorm2d"):
        return F.batchnorm(x, params["gamma"], params["beta"], params["running_mean"],
                           params["running_var"], training)
    if k == "relu":
        return x.relu()
    if k == "sigmoid":
        return x.sigmoid()
    if k == "softmax":
        out = F.softmax(x, axis=-1)
        scale = spec.get("scale", 1.0)
        return out * scale if scale != 1.0 else out
    if k == "maxpool2x2":
        return F.maxpool2x2(x)
    if k == "upsample2x":
        return F.upsample2x(x)
    if k == "dropout":
        if training and rng is None:
            raise ValueError("dropout in train mode needs an rng")
        return F.dropout(x, spec["rate"], rng, training)
    if k == "flatten":
        return x.reshape(x.shape[0], -1)
    if k == "reshape":
        return x.reshape((x.shape[0],) + tuple(spec["shape"]))
    if k == "transpose":
        return x.transpose((0,) + tuple(p + 1 for p in spec["perm"]))
    if k == "residual":
        h = x
        for s, p in zip(spec["body"], params["body"]):
            h = layer_apply(s, h, p, mode, rng)
        return x + h
    raise ValueError(f"unknown layer kind {k!r}")


def _walk(params, prefix=""):
    for key, value in params.items():
        if key == "body":
            for i, sub in enumerate(value):
                yield from _walk(sub, f"{prefix}body.{i}.")
        else:
            yield prefix + key, value


class Network:
    """Sequential chain of :class:`LayerSpec` with owned parameters."""

    def __init__(self, specs, input_shape, rng=None, dtype=np.float64):
        self.specs = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in specs]
        self.input_shape = tuple(input_shape)
        self.output_shape = chain_output_shape(self.specs, self.input_shape)
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_params = [init_params(s, rng, self.dtype) for s in self.specs]
        self.training = True

    def __call__(self, x, rng=None):
        return self.forward(x, rng=rng)

    def forward(self, x, mode=None, rng=None):
        mode = mode or ("train" if self.training else "eval")
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        for s, p in zip(self.specs, self.layer_params):
            h = layer_apply(s, h, p, mode, rng)
        return h

    def predict(self, x, batch_size=512):
        """Eval-mode forward on a numpy batch, returned as numpy."""
        x = np.asarray(x, dtype=self.dtype)
        outs = [self.forward(x[i:i + batch_size], mode="eval").data
                for i in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0) if outs else np.zeros((0,) + self.output_shape)

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def named_state(self):
        """All arrays (learnable and buffers) keyed ``"<layer>.<name>"``."""
        out = {}
        for i, p in enumerate(self.layer_params):
            for name, v in _walk(p):
                out[f"{i}.{name}"] = v
        return out

    def parameters(self):
        return [v for v in self.named_state().values() if isinstance(v, Tensor)]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {k: (v.data.copy() if isinstance(v, Tensor) else v.copy())
                for k, v in self.named_state().items()}

    def load_state_dict(self, state):
        current = self.named_state()
        missing = set(current) - set(state)
        if missing:
            raise KeyError(f"state is missing {sorted(missing)}")
        for k, v in current.items():
            arr = np.asarray(state[k], dtype=self.dtype)
            if arr.shape != v.shape:
                raise ValueError(f"{k}: shape {arr.shape} does not match {v.shape}")
            if isinstance(v, Tensor):
                v.data = arr.copy()
            else:
                v[...] = arr

    def count(self):
        return count_params_flops(self.specs, self.input_shape)

    def num_parameters(self):
        return int(sum(p.data.size for p in self.parameters()))
