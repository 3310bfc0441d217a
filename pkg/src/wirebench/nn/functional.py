"""Differentiable layer primitives with hand-written backward passes."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """Cross-correlation of ``x`` (B, C, H, W) with ``weight`` (O, C, kh, kw).

    Lowered to a single matmul over im2col patches.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if Cw != C:
        raise ValueError(f"conv2d: input has {C} channels, weight expects {Cw}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    Hp, Wp = xp.shape[2], xp.shape[3]
    Ho = (Hp - kh) // sh + 1
    Wo = (Wp - kw) // sw + 1
    if Ho <= 0 or Wo <= 0:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    # (B, Ho, Wo, C, kh, kw) -> rows are receptive fields
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
    wmat = weight.data.reshape(O, -1)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2)

    def backward(g):
        gf = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, O)
        gw = (gf.T @ cols).reshape(weight.shape)
        gb = gf.sum(axis=0) if bias is not None else None
        dcols = (gf @ wmat).reshape(B, Ho, Wo, C, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, ph:ph + H, pw:pw + W]
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor(np.ascontiguousarray(out), parents=parents, backward_fn=backward, op="conv2d")


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """1-D cross-correlation of ``x`` (B, C, L) with ``weight`` (O, C, k)."""
    x, weight = as_tensor(x), as_tensor(weight)
    B, C, L = x.shape
    O, _, k = weight.shape
    out = conv2d(x.reshape(B, C, 1, L), weight.reshape(O, C, 1, k), bias,
                 stride=(1, stride), padding=(0, padding))
    return out.reshape(B, O, out.shape[-1])


def maxpool2x2(x):
    x = as_tensor(x)
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ValueError(f"maxpool2x2: spatial size {H}x{W} is not even")
    blocks = x.data.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(B, C, H // 2, W // 2, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gb = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gb = gb.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (gb.reshape(B, C, H, W),)

    return Tensor(out, parents=(x,), backward_fn=backward, op="maxpool2x2")


def upsample2x(x):
    """Nearest-neighbour 2x upsampling of the two trailing axes."""
    x = as_tensor(x)
    B, C, H, W = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        return (g.reshape(B, C, H, 2, W, 2).sum(axis=(3, 5)),)

    return Tensor(out, parents=(x,), backward_fn=backward, op="upsample2x")


def batchnorm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Batch normalization over every axis except the channel axis 1.

    ``running_mean`` and ``running_var`` are numpy arrays updated in place
    when ``training`` is true.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, x.shape[1]) + (1,) * (x.ndim - 2)
    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)
    n = x.data.size // x.shape[1]

    def backward(g):
        gg = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            gx = (inv_std.reshape(bshape) / n) * (
                n * dxhat
                - dxhat.sum(axis=axes).reshape(bshape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape)
            )
        else:
            gx = dxhat * inv_std.reshape(bshape)
        return gx, gg, gbeta

    return Tensor(out.astype(x.dtype, copy=False), parents=(x, gamma, beta),
                  backward_fn=backward, op="batchnorm")


def softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor(s, parents=(x,), backward_fn=backward, op="softmax")


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def backward(g):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return Tensor(out, parents=(x,), backward_fn=backward, op="log_softmax")


def dropout(x, rate, rng, training):
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep
