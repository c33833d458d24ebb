"""Differentiable numpy building blocks: conv, batchnorm, relu, pool, affine.

Each op returns (output, cache); the matching backward consumes the cache
and the upstream gradient.  Convolution uses 9-slice im2col so the heavy
lifting is a single BLAS matmul per layer.
"""

from __future__ import annotations

import numpy as np


def conv2d_forward(x, w, b, stride: int, pad: int):
    """x: (B,Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout,) -> (B,Cout,oh,ow)."""
    batch, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((batch, cin, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
    k = cin * kh * kw
    span = oh * ow
    cols_k = cols.reshape(batch, k, span).transpose(1, 0, 2).reshape(k, batch * span)
    w2 = w.reshape(cout, k)
    y2 = w2 @ cols_k + b[:, None]
    y = y2.reshape(cout, batch, oh, ow).transpose(1, 0, 2, 3)
    cache = (cols_k, w, x.shape, stride, pad, oh, ow)
    return y, cache


def conv2d_backward(dy, cache):
    cols_k, w, x_shape, stride, pad, oh, ow = cache
    batch, cin, h, wd = x_shape
    cout, _, kh, kw = w.shape
    k = cin * kh * kw
    span = oh * ow
    dy2 = dy.transpose(1, 0, 2, 3).reshape(cout, batch * span)
    db = dy2.sum(axis=1)
    dw = (dy2 @ cols_k.T).reshape(w.shape)
    dcols_k = w.reshape(cout, k).T @ dy2
    dcols = dcols_k.reshape(cin, kh, kw, batch, oh, ow).transpose(3, 0, 1, 2, 4, 5)
    hp, wp = h + 2 * pad, wd + 2 * pad
    dxp = np.zeros((batch, cin, hp, wp), dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += dcols[:, :, i, j]
    dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
    return dx, dw, db


def bn_forward(x, gamma, beta, running_mean, running_var, momentum, eps, train):
    """Batch normalization over all axes but the channel axis.

    Works for (B,C,H,W) with channel axis 1 and (B,C) with channel axis 1.
    Train mode normalizes by batch statistics (population variance) and
    updates the running buffers in place; eval mode uses the buffers.
    """
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    shape = (1, -1) if x.ndim == 2 else (1, -1, 1, 1)
    if train:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean, var = running_mean, running_var
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(shape)) * invstd.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    cache = (xhat, gamma, invstd, train, axes, shape)
    return y, cache


def bn_backward(dy, cache):
    xhat, gamma, invstd, train, axes, shape = cache
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    scale = (gamma * invstd).reshape(shape)
    if not train:
        return dy * scale, dgamma, dbeta
    m = dy.size // dy.shape[1] if dy.ndim == 4 else dy.shape[0]
    dx = (scale / m) * (m * dy - dbeta.reshape(shape) - xhat * dgamma.reshape(shape))
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def global_avg_pool_forward(x):
    """(B,C,H,W) -> (B,C)."""
    _, _, h, w = x.shape
    return x.mean(axis=(2, 3)), (x.shape, h * w)


def global_avg_pool_backward(dy, cache):
    x_shape, count = cache
    return np.broadcast_to(dy[:, :, None, None], x_shape) / count


def linear_forward(x, w, b):
    """x: (B,Din), w: (Dout,Din), b: (Dout,)."""
    return x @ w.T + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def l2_normalize_rows(x):
    """Unit-norm rows; all-zero rows stay zero."""
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    safe = np.where(norms == 0.0, 1.0, norms)
    xhat = x / safe
    return xhat, (xhat, safe, norms)


def l2_normalize_rows_backward(dy, cache):
    xhat, safe, norms = cache
    dot = (dy * xhat).sum(axis=1, keepdims=True)
    dx = (dy - xhat * dot) / safe
    return np.where(norms == 0.0, 0.0, dx)
