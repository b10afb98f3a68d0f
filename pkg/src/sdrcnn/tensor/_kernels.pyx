# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels mirroring kernels_py."""
import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def pointwise_forward(x, w, b):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, ::1] wv = np.ascontiguousarray(w)
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], ww = xv.shape[3]
    cdef Py_ssize_t o = wv.shape[0]
    out = np.empty((n, o, h, ww), dtype=np.float64)
    cdef double[:, :, :, ::1] yv = out
    cdef Py_ssize_t ni, oi, ci, i, j
    cdef double wcoef, bcoef
    for ni in range(n):
        for oi in range(o):
            bcoef = bv[oi]
            for i in range(h):
                for j in range(ww):
                    yv[ni, oi, i, j] = bcoef
            for ci in range(c):
                wcoef = wv[oi, ci]
                if wcoef == 0.0:
                    continue
                for i in range(h):
                    for j in range(ww):
                        yv[ni, oi, i, j] += wcoef * xv[ni, ci, i, j]
    return out


def pointwise_backward(x, w, gy, bint need_gx=True, bint need_gw=True):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] gyv = np.ascontiguousarray(gy)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], ww = xv.shape[3]
    cdef Py_ssize_t o = wv.shape[0]
    cdef Py_ssize_t ni, oi, ci, i, j
    cdef double wcoef, acc
    gx_arr = gw_arr = gb_arr = None
    cdef double[:, :, :, ::1] gxv
    cdef double[:, ::1] gwv
    cdef double[::1] gbv
    if need_gx:
        gx_arr = np.zeros((n, c, h, ww), dtype=np.float64)
        gxv = gx_arr
        for ni in range(n):
            for oi in range(o):
                for ci in range(c):
                    wcoef = wv[oi, ci]
                    if wcoef == 0.0:
                        continue
                    for i in range(h):
                        for j in range(ww):
                            gxv[ni, ci, i, j] += wcoef * gyv[ni, oi, i, j]
    if need_gw:
        gw_arr = np.zeros((o, c), dtype=np.float64)
        gb_arr = np.zeros(o, dtype=np.float64)
        gwv = gw_arr
        gbv = gb_arr
        for ni in range(n):
            for oi in range(o):
                acc = 0.0
                for i in range(h):
                    for j in range(ww):
                        acc += gyv[ni, oi, i, j]
                gbv[oi] += acc
                for ci in range(c):
                    acc = 0.0
                    for i in range(h):
                        for j in range(ww):
                            acc += gyv[ni, oi, i, j] * xv[ni, ci, i, j]
                    gwv[oi, ci] += acc
    return gx_arr, gw_arr, gb_arr


def depthwise_forward(x, k, b):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, ::1] kv = np.ascontiguousarray(k)
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3]
    cdef Py_ssize_t kh = kv.shape[1], kw = kv.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    out = np.empty((n, c, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] yv = out
    cdef Py_ssize_t ni, ci, i, j, u, v, ii, jj
    cdef double acc
    for ni in range(n):
        for ci in range(c):
            for i in range(h):
                for j in range(w):
                    acc = bv[ci]
                    for u in range(kh):
                        ii = i + u - ph
                        if ii < 0 or ii >= h:
                            continue
                        for v in range(kw):
                            jj = j + v - pw
                            if 0 <= jj < w:
                                acc += kv[ci, u, v] * xv[ni, ci, ii, jj]
                    yv[ni, ci, i, j] = acc
    return out


def depthwise_backward(x, k, gy, bint need_gx=True, bint need_gw=True):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, ::1] kv = np.ascontiguousarray(k)
    cdef double[:, :, :, ::1] gyv = np.ascontiguousarray(gy)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3]
    cdef Py_ssize_t kh = kv.shape[1], kw = kv.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    cdef Py_ssize_t ni, ci, i, j, u, v, ii, jj
    cdef double acc
    gx_arr = gk_arr = gb_arr = None
    cdef double[:, :, :, ::1] gxv
    cdef double[:, :, ::1] gkv
    cdef double[::1] gbv
    if need_gx:
        gx_arr = np.zeros((n, c, h, w), dtype=np.float64)
        gxv = gx_arr
        # gx[i,j] collects gy[p,q] wherever the forward stencil at (p,q) read (i,j)
        for ni in range(n):
            for ci in range(c):
                for i in range(h):
                    for j in range(w):
                        acc = 0.0
                        for u in range(kh):
                            ii = i - (u - ph)
                            if ii < 0 or ii >= h:
                                continue
                            for v in range(kw):
                                jj = j - (v - pw)
                                if 0 <= jj < w:
                                    acc += kv[ci, u, v] * gyv[ni, ci, ii, jj]
                        gxv[ni, ci, i, j] = acc
    if need_gw:
        gk_arr = np.zeros((c, kh, kw), dtype=np.float64)
        gb_arr = np.zeros(c, dtype=np.float64)
        gkv = gk_arr
        gbv = gb_arr
        for ni in range(n):
            for ci in range(c):
                acc = 0.0
                for i in range(h):
                    for j in range(w):
                        acc += gyv[ni, ci, i, j]
                gbv[ci] += acc
                for u in range(kh):
                    for v in range(kw):
                        acc = 0.0
                        for i in range(h):
                            ii = i + u - ph
                            if ii < 0 or ii >= h:
                                continue
                            for j in range(w):
                                jj = j + v - pw
                                if 0 <= jj < w:
                                    acc += gyv[ni, ci, i, j] * xv[ni, ci, ii, jj]
                        gkv[ci, u, v] += acc
    return gx_arr, gk_arr, gb_arr
