"""Pure numpy convolution kernels.

This is the fallback backend; the compiled extension exposes the same four
functions.  Shapes: x (n,c,h,w); pointwise weights (o,c) with bias (o,);
depthwise kernels (c,kh,kw) with bias (c,).  Backward routines take the
upstream gradient gy and return (gx, gw, gb), with entries set to None when
the corresponding need_* flag is off.
"""
import numpy as np


def pointwise_forward(x, w, b):
    y = np.einsum("oc,nchw->nohw", w, x, optimize=True)
    y += b[None, :, None, None]
    return y


def pointwise_backward(x, w, gy, need_gx=True, need_gw=True):
    gx = gw = gb = None
    if need_gx:
        gx = np.einsum("oc,nohw->nchw", w, gy, optimize=True)
    if need_gw:
        gw = np.einsum("nohw,nchw->oc", gy, x, optimize=True)
        gb = gy.sum(axis=(0, 2, 3))
    return gx, gw, gb


def depthwise_forward(x, k, b):
    n, c, h, w = x.shape
    kh, kw = k.shape[1], k.shape[2]
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    y = np.empty_like(x)
    y[:] = b[None, :, None, None]
    for u in range(kh):
        for v in range(kw):
            y += k[:, u, v][None, :, None, None] * xp[:, :, u:u + h, v:v + w]
    return y


def depthwise_backward(x, k, gy, need_gx=True, need_gw=True):
    n, c, h, w = x.shape
    kh, kw = k.shape[1], k.shape[2]
    ph, pw = kh // 2, kw // 2
    gx = gk = gb = None
    if need_gx:
        # adjoint of the forward gather: scatter into a padded buffer, crop
        gxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw))
        for u in range(kh):
            for v in range(kw):
                gxp[:, :, u:u + h, v:v + w] += k[:, u, v][None, :, None, None] * gy
        gx = np.ascontiguousarray(gxp[:, :, ph:ph + h, pw:pw + w])
    if need_gw:
        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        gk = np.empty_like(k)
        for u in range(kh):
            for v in range(kw):
                gk[:, u, v] = (gy * xp[:, :, u:u + h, v:v + w]).sum(axis=(0, 2, 3))
        gb = gy.sum(axis=(0, 2, 3))
    return gx, gk, gb
