"""Classical pansharpening baselines: Gram-Schmidt and SFIM.

Both take a (1, H, W) PAN raster and a (B, h, w) LRMS raster with H = ratio*h
and return a (B, H, W) fused raster.  Pure numpy, no learned parts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import resample
from .errors import DegenerateInputError, ShapeMismatchError


@dataclass(frozen=True)
class ClassicalMethod:
    name: str  # "gs" | "sfim"
    smoothing_kernel: int = 7        # sfim box filter size
    intensity_weights: tuple = ()    # gs band weights; empty means uniform 1/B

    def validate(self, ratio: int = 4) -> "ClassicalMethod":
        if self.name not in ("gs", "sfim"):
            raise ValueError(f"unknown classical method {self.name!r}")
        if self.smoothing_kernel % 2 == 0 or self.smoothing_kernel < ratio:
            raise ValueError(
                f"smoothing kernel must be odd and >= ratio {ratio}, got {self.smoothing_kernel}"
            )
        return self


def _check_pair(pan, lrms):
    pan = np.asarray(pan, dtype=np.float64)
    lrms = np.asarray(lrms, dtype=np.float64)
    if pan.ndim == 2:
        pan = pan[None]
    if pan.ndim != 3 or pan.shape[0] != 1:
        raise ShapeMismatchError(f"pan must be (1, H, W), got {pan.shape}")
    if lrms.ndim != 3:
        raise ShapeMismatchError(f"lrms must be (B, h, w), got {lrms.shape}")
    H, W = pan.shape[1:]
    h, w = lrms.shape[1:]
    if h == 0 or H % h or W % w or H // h != W // w:
        raise ShapeMismatchError(
            f"pan {pan.shape} is not an integer multiple of lrms {lrms.shape}"
        )
    return pan, lrms, H // h


def box_smooth(img: np.ndarray, size: int) -> np.ndarray:
    """Mean filter with replicated edges.

    Written in centered form, smooth = x + sum_i w*(x_i - x), so a constant
    neighborhood returns the center value bit-exactly.
    """
    if size % 2 == 0 or size < 1:
        raise ValueError(f"box size must be odd and positive, got {size}")
    r = size // 2
    h, w = img.shape
    padded = np.pad(img, r, mode="edge")
    inv = 1.0 / (size * size)
    acc = np.zeros_like(img)
    for u in range(size):
        for v in range(size):
            acc += inv * (padded[u:u + h, v:v + w] - img)
    return img + acc


def sfim(pan, lrms, smoothing_kernel: int = 7, clamp=(0.2, 5.0), eps: float = 1e-6):
    """Smoothing-filter intensity modulation.

    HRMS_b = up(MS)_b * PAN / smooth(PAN).  The PAN/smooth ratio is clamped
    to `clamp` when given; with clamp=None, a smoothed PAN falling below
    eps anywhere is an error instead.
    """
    pan, lrms, ratio = _check_pair(pan, lrms)
    ClassicalMethod("sfim", smoothing_kernel=smoothing_kernel).validate(ratio)
    up = resample.upsample_bands(lrms, ratio)
    smooth = box_smooth(pan[0], smoothing_kernel)
    if clamp is None:
        if np.abs(smooth).min() < eps:
            raise DegenerateInputError(
                "smoothed PAN falls below the division guard; enable clamping"
            )
        modulation = pan[0] / smooth
    else:
        lo, hi = clamp
        if not (lo <= 1.0 <= hi):
            raise ValueError(f"clamp range {clamp} must contain 1")
        with np.errstate(divide="ignore", invalid="ignore"):
            modulation = pan[0] / smooth
        modulation = np.clip(np.nan_to_num(modulation, nan=1.0, posinf=hi, neginf=lo), lo, hi)
    return up * modulation[None]


def gram_schmidt(pan, lrms, intensity_weights=None, eps: float = 1e-6):
    """Gram-Schmidt component substitution with a synthetic intensity band.

    I = weighted band mean of up(MS); PAN is mean/std matched to I; each
    band receives its regression gain times the matched-PAN detail.  The
    detail term is computed as (pan - mean)*r - (I - mean) so that a PAN
    equal to I yields exactly zero detail.
    """
    pan, lrms, ratio = _check_pair(pan, lrms)
    B = lrms.shape[0]
    if intensity_weights is None:
        weights = np.full(B, 1.0 / B)
    else:
        weights = np.asarray(intensity_weights, dtype=np.float64)
        if weights.shape != (B,):
            raise ShapeMismatchError(f"need {B} intensity weights, got shape {weights.shape}")
    up = resample.upsample_bands(lrms, ratio)
    intensity = np.tensordot(weights, up, axes=1)

    m_i = intensity.mean()
    c_i = intensity - m_i
    var_i = (c_i * c_i).mean()
    if var_i < eps * eps:
        raise DegenerateInputError("degenerate intensity: variance below guard")
    p = pan[0]
    m_p = p.mean()
    c_p = p - m_p
    var_p = (c_p * c_p).mean()
    if var_p < eps * eps:
        raise DegenerateInputError("degenerate PAN: variance below guard")

    r = np.sqrt(var_i) / np.sqrt(var_p)
    detail = c_p * r - c_i
    gains = np.array([(up[b] - up[b].mean()).ravel().dot(c_i.ravel()) / c_i.size / var_i
                      for b in range(B)])
    return up + gains[:, None, None] * detail[None]
