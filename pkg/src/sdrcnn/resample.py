"""Bicubic resampling expressed as separable weight matrices.

Interpolation along each axis is a linear map, so upsampling by an integer
factor can be written as ``W_rows @ image @ W_cols.T``.  Building those
(dense, small) matrices once per shape makes the adjoint (needed for the
backward pass of the upsampling layer) a plain transpose.
"""

from __future__ import annotations

import functools

import numpy as np

# Keys kernel parameter.  -0.5 is the only choice that reproduces linear
# ramps exactly, which the rest of the code relies on.
_A = -0.5


def cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Keys cubic kernel evaluated at offsets ``t`` (a = -0.5)."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2 = t * t
    t3 = t2 * t
    a = _A
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    out = np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))
    return out


@functools.lru_cache(maxsize=64)
def upsample_matrix(n: int, factor: int) -> np.ndarray:
    """Dense (n*factor, n) interpolation matrix for one axis.

    Output sample i reads from fractional source coordinate
    (i + 0.5) / factor - 0.5, so the upsampled grid stays centered on the
    original one.  Taps falling outside [0, n) are clamped, which
    replicates the edge rows/columns.
    """
    if n < 1 or factor < 1:
        raise ValueError(f"need n >= 1 and factor >= 1, got n={n}, factor={factor}")
    m = n * factor
    w = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        src = (i + 0.5) / factor - 0.5
        base = int(np.floor(src))
        frac = src - base
        taps = np.arange(base - 1, base + 3)
        weights = cubic_kernel(src - taps)
        weights = weights / weights.sum()
        for tap, wt in zip(np.clip(taps, 0, n - 1), weights):
            w[i, tap] += wt
    return w


def upsample2d(img: np.ndarray, factor: int) -> np.ndarray:
    """Bicubic upsample of a 2-D array by an integer factor."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {img.shape}")
    wr = upsample_matrix(img.shape[0], factor)
    wc = upsample_matrix(img.shape[1], factor)
    return wr @ img @ wc.T


def upsample_bands(cube: np.ndarray, factor: int) -> np.ndarray:
    """Bicubic upsample of a (bands, h, w) cube, band by band."""
    cube = np.asarray(cube, dtype=np.float64)
    if cube.ndim != 3:
        raise ValueError(f"expected a (bands, h, w) cube, got shape {cube.shape}")
    wr = upsample_matrix(cube.shape[1], factor)
    wc = upsample_matrix(cube.shape[2], factor)
    # einsum keeps this one allocation instead of a band loop
    return np.einsum("ij,bjk,lk->bil", wr, cube, wc, optimize=True)
