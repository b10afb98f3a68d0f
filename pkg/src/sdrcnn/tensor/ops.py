"""Differentiable ops over Tensor4.

All the network needs: the two convolution flavors, relu, elementwise add,
channel concat/split, bicubic upsampling, L1 loss, and batch normalization
for the ablation study.  Each op validates shapes, computes with plain
numpy or the compiled kernels, and registers a closure for the backward
pass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import resample
from ..errors import DegenerateInputError, ShapeMismatchError, require_same_shape
from . import backend
from .core import Tensor4, from_op


@dataclass
class ConvWeights:
    """Weights of one convolution layer.

    pointwise: weight (out_c, in_c, 1, 1); depthwise: weight (c, 1, kh, kw)
    with one kernel per channel.  bias is (1, out_c, 1, 1) either way.
    """
    kind: str
    weight: Tensor4
    bias: Tensor4

    def __post_init__(self):
        if self.kind not in ("pointwise", "depthwise"):
            raise ValueError(f"unknown conv kind {self.kind!r}")
        ws = self.weight.shape
        if self.kind == "pointwise":
            if ws[2] != 1 or ws[3] != 1:
                raise ShapeMismatchError(f"pointwise kernel must be 1x1, got {ws[2]}x{ws[3]}")
        else:
            if ws[1] != 1:
                raise ShapeMismatchError(
                    f"depthwise weight is (channels, 1, kh, kw), got {ws}"
                )
            if ws[2] % 2 == 0 or ws[3] % 2 == 0:
                raise ShapeMismatchError(f"depthwise kernel must be odd-sized, got {ws[2]}x{ws[3]}")
        if self.bias.shape != (1, self.out_channels, 1, 1):
            raise ShapeMismatchError(
                f"bias shape {self.bias.shape} does not match out_channels {self.out_channels}"
            )

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1] if self.kind == "pointwise" else self.weight.shape[0]

    @property
    def kernel(self):
        return (self.weight.shape[2], self.weight.shape[3])

    @property
    def n_params(self) -> int:
        return self.weight.data.size + self.bias.data.size

    @staticmethod
    def pointwise(out_channels: int, in_channels: int, rng=None, scale=None) -> "ConvWeights":
        if rng is None:
            w = np.zeros((out_channels, in_channels, 1, 1))
        else:
            if scale is None:
                scale = np.sqrt(2.0 / in_channels)
            w = rng.normal(0.0, scale, size=(out_channels, in_channels, 1, 1))
        b = np.zeros((1, out_channels, 1, 1))
        return ConvWeights("pointwise", Tensor4(w, requires_grad=True), Tensor4(b, requires_grad=True))

    @staticmethod
    def depthwise(channels: int, kernel: int, rng=None, scale=None) -> "ConvWeights":
        if rng is None:
            w = np.zeros((channels, 1, kernel, kernel))
        else:
            if scale is None:
                scale = np.sqrt(2.0 / (kernel * kernel))
            w = rng.normal(0.0, scale, size=(channels, 1, kernel, kernel))
        b = np.zeros((1, channels, 1, 1))
        return ConvWeights("depthwise", Tensor4(w, requires_grad=True), Tensor4(b, requires_grad=True))


def conv_pointwise(x: Tensor4, w: ConvWeights) -> Tensor4:
    if w.kind != "pointwise":
        raise ValueError("conv_pointwise needs pointwise weights")
    if w.in_channels != x.c:
        raise ShapeMismatchError(
            f"pointwise conv expects {w.in_channels} input channels, tensor has shape {x.shape}"
        )
    o, c = w.out_channels, w.in_channels
    wmat = w.weight.data.reshape(o, c)
    bvec = w.bias.data.reshape(o)
    y = backend.pointwise_forward(x.data, wmat, bvec)

    def grad_fn(gy):
        gx, gw, gb = backend.pointwise_backward(
            x.data, wmat, gy,
            need_gx=x.requires_grad,
            need_gw=w.weight.requires_grad,
        )
        if gx is not None:
            x.accumulate_grad(gx)
        if gw is not None:
            w.weight.accumulate_grad(gw.reshape(o, c, 1, 1))
            w.bias.accumulate_grad(gb.reshape(1, o, 1, 1))

    return from_op(y, (x, w.weight, w.bias), grad_fn)


def conv_depthwise(x: Tensor4, w: ConvWeights, padding: str = "same") -> Tensor4:
    if w.kind != "depthwise":
        raise ValueError("conv_depthwise needs depthwise weights")
    if padding != "same":
        raise ValueError("only same padding is supported")
    if w.in_channels != x.c:
        raise ShapeMismatchError(
            f"depthwise conv expects {w.in_channels} channels, tensor has shape {x.shape}"
        )
    c = w.in_channels
    kh, kw = w.kernel
    if kh > x.h + 2 * (kh // 2) or kw > x.w + 2 * (kw // 2):
        raise ShapeMismatchError(
            f"kernel {kh}x{kw} larger than padded input {x.h}x{x.w}"
        )
    kmat = w.weight.data.reshape(c, kh, kw)
    bvec = w.bias.data.reshape(c)
    y = backend.depthwise_forward(x.data, kmat, bvec)

    def grad_fn(gy):
        gx, gk, gb = backend.depthwise_backward(
            x.data, kmat, gy,
            need_gx=x.requires_grad,
            need_gw=w.weight.requires_grad,
        )
        if gx is not None:
            x.accumulate_grad(gx)
        if gk is not None:
            w.weight.accumulate_grad(gk.reshape(c, 1, kh, kw))
            w.bias.accumulate_grad(gb.reshape(1, c, 1, 1))

    return from_op(y, (x, w.weight, w.bias), grad_fn)


def relu(x: Tensor4) -> Tensor4:
    y = np.maximum(x.data, 0.0)

    def grad_fn(gy):
        if x.requires_grad:
            x.accumulate_grad(gy * (x.data > 0.0))

    return from_op(y, (x,), grad_fn)


def add(x: Tensor4, y: Tensor4) -> Tensor4:
    require_same_shape(x.shape, y.shape, "add operands")
    out = x.data + y.data

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if y.requires_grad:
            y.accumulate_grad(g)

    return from_op(out, (x, y), grad_fn)


def concat_channels(xs) -> Tensor4:
    xs = list(xs)
    if not xs:
        raise ValueError("concat_channels needs at least one tensor")
    base = xs[0].shape
    for t in xs[1:]:
        if (t.n, t.h, t.w) != (base[0], base[2], base[3]):
            raise ShapeMismatchError(
                f"concat operands must share (n, h, w), got {base} and {t.shape}"
            )
    out = np.concatenate([t.data for t in xs], axis=1)
    sizes = [t.c for t in xs]

    def grad_fn(gy):
        lo = 0
        for t, sz in zip(xs, sizes):
            if t.requires_grad:
                t.accumulate_grad(gy[:, lo:lo + sz])
            lo += sz

    return from_op(out, tuple(xs), grad_fn)


def split_channels(x: Tensor4, sizes) -> list:
    sizes = list(sizes)
    if sum(sizes) != x.c:
        raise ShapeMismatchError(f"split sizes {sizes} do not sum to {x.c} channels")
    outs = []
    lo = 0
    for sz in sizes:
        lo_here = lo

        def make_grad(lo_fixed, sz_fixed):
            def grad_fn(gy):
                if x.requires_grad:
                    g = np.zeros_like(x.data)
                    g[:, lo_fixed:lo_fixed + sz_fixed] = gy
                    x.accumulate_grad(g)
            return grad_fn

        piece = np.ascontiguousarray(x.data[:, lo:lo + sz])
        outs.append(from_op(piece, (x,), make_grad(lo_here, sz)))
        lo += sz
    return outs


def upsample_bicubic(x: Tensor4, factor: int) -> Tensor4:
    if int(factor) != factor or factor < 1:
        raise ValueError(f"upsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    wr = resample.upsample_matrix(x.h, factor)
    wc = resample.upsample_matrix(x.w, factor)
    y = np.einsum("ij,ncjk,lk->ncil", wr, x.data, wc, optimize=True)

    def grad_fn(gy):
        if x.requires_grad:
            gx = np.einsum("ij,ncik,kl->ncjl", wr, gy, wc, optimize=True)
            x.accumulate_grad(gx)

    return from_op(y, (x,), grad_fn)


def l1_loss(pred: Tensor4, target: Tensor4) -> Tensor4:
    require_same_shape(pred.shape, target.shape, "l1_loss operands")
    diff = pred.data - target.data
    val = np.abs(diff).mean()

    def grad_fn(gy):
        g = gy.reshape(()) * np.sign(diff) / diff.size
        if pred.requires_grad:
            pred.accumulate_grad(g)
        if target.requires_grad:
            target.accumulate_grad(-g)

    return from_op(np.full((1, 1, 1, 1), val), (pred, target), grad_fn)


@dataclass
class BnStats:
    """Running statistics of one batch-norm layer (non-learnable buffers)."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1

    @staticmethod
    def fresh(channels: int, momentum: float = 0.1) -> "BnStats":
        return BnStats(np.zeros(channels), np.ones(channels), momentum)


def batch_norm(x: Tensor4, gamma: Tensor4, beta: Tensor4, stats: BnStats,
               training: bool, eps: float = 1e-8) -> Tensor4:
    c = x.c
    if gamma.shape != (1, c, 1, 1) or beta.shape != (1, c, 1, 1):
        raise ShapeMismatchError(
            f"batch_norm affine parameters must be (1,{c},1,1), got {gamma.shape} and {beta.shape}"
        )
    axes = (0, 2, 3)
    if training:
        if x.n * x.h * x.w < 2:
            raise DegenerateInputError("batch_norm training mode needs at least 2 values per channel")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        stats.mean = (1.0 - stats.momentum) * stats.mean + stats.momentum * mu
        stats.var = (1.0 - stats.momentum) * stats.var + stats.momentum * var
    else:
        mu = stats.mean
        var = stats.var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None, None]) * inv[None, :, None, None]
    y = gamma.data * xhat + beta.data

    def grad_fn(gy):
        if gamma.requires_grad:
            gamma.accumulate_grad((gy * xhat).sum(axis=axes).reshape(1, c, 1, 1))
            beta.accumulate_grad(gy.sum(axis=axes).reshape(1, c, 1, 1))
        if x.requires_grad:
            gxhat = gy * gamma.data
            if training:
                # batch statistics participate in the derivative
                m = x.n * x.h * x.w
                s1 = gxhat.sum(axis=axes)
                s2 = (gxhat * xhat).sum(axis=axes)
                gx = (inv[None, :, None, None] / m) * (
                    m * gxhat
                    - s1[None, :, None, None]
                    - xhat * s2[None, :, None, None]
                )
            else:
                gx = gxhat * inv[None, :, None, None]
            x.accumulate_grad(gx)

    return from_op(y, (x, gamma, beta), grad_fn)
