"""PNG export and PCA feature-map visualization."""
from __future__ import annotations

import os
import tempfile
import warnings

import numpy as np
from PIL import Image

from .errors import ShapeMismatchError

# Piecewise-linear color ramp for scalar maps: navy -> cyan -> yellow -> red.
HEAT_STOPS = (
    (0.0, (0, 0, 128)),
    (1.0 / 3.0, (0, 255, 255)),
    (2.0 / 3.0, (255, 255, 0)),
    (1.0, (255, 0, 0)),
)


def heat_rgb(values):
    """Map values in [0, 1] through the heat ramp to uint8 RGB."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    out = np.zeros(v.shape + (3,), dtype=np.float64)
    for (p0, c0), (p1, c1) in zip(HEAT_STOPS[:-1], HEAT_STOPS[1:]):
        mask = (v >= p0) & (v <= p1)
        t = (v[mask] - p0) / (p1 - p0)
        for ch in range(3):
            out[..., ch][mask] = c0[ch] + t * (c1[ch] - c0[ch])
    return np.round(out).astype(np.uint8)


def _rescale(band, vmin, vmax):
    if vmax <= vmin:
        raise ShapeMismatchError(f"vmax must exceed vmin, got [{vmin}, {vmax}]")
    return np.clip((band - vmin) / (vmax - vmin), 0.0, 1.0)


def _atomic_save(img: Image.Image, path):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png")
    try:
        with os.fdopen(fd, "wb") as fh:
            img.save(fh, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_png(raster, path, mode: str = "auto", bands=(0, 1, 2),
               vmin: float = 0.0, vmax: float = 1.0) -> None:
    """Write a (B, H, W) raster as an 8-bit PNG.

    auto picks rgb when three band indices are available, gray otherwise.
    heat maps the first band through the color ramp.  Values are rescaled
    from [vmin, vmax] monotonically and clipped.
    """
    cube = np.asarray(raster, dtype=np.float64)
    if cube.ndim == 2:
        cube = cube[None]
    if cube.ndim != 3:
        raise ShapeMismatchError(f"raster must be (bands, h, w), got {cube.shape}")
    if mode == "auto":
        mode = "rgb" if cube.shape[0] >= 3 else "gray"
    if mode == "rgb":
        for b in bands:
            if not 0 <= b < cube.shape[0]:
                raise ShapeMismatchError(f"band {b} out of range for {cube.shape[0]} bands")
        stack = [_rescale(cube[b], vmin, vmax) for b in bands[:3]]
        arr = np.round(np.stack(stack, axis=-1) * 255.0).astype(np.uint8)
        img = Image.fromarray(arr, mode="RGB")
    elif mode == "gray":
        arr = np.round(_rescale(cube[bands[0] if bands else 0], vmin, vmax) * 255.0)
        img = Image.fromarray(arr.astype(np.uint8), mode="L")
    elif mode == "heat":
        img = Image.fromarray(heat_rgb(_rescale(cube[0], vmin, vmax)), mode="RGB")
    else:
        raise ShapeMismatchError(f"unknown png mode {mode!r}")
    _atomic_save(img, path)


def pca_decompose(feats, k: int = 4):
    """Project a (C, H, W) feature stack onto its top-k principal axes.

    Returns (projections (k, h, w), singular values (k,), loadings (k, C),
    rank).  Components beyond the centered rank come back as zero maps.
    Each axis is sign-fixed so its largest-magnitude loading is positive.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 3:
        raise ShapeMismatchError(f"features must be (channels, h, w), got {feats.shape}")
    c, h, w = feats.shape
    if c < k:
        raise ShapeMismatchError(f"need at least {k} channels, got {c}")
    flat = feats.reshape(c, h * w).T          # (npix, C)
    centered = flat - flat.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(centered.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    proj = np.zeros((k, h, w))
    loadings = np.zeros((k, c))
    sv = np.zeros(k)
    for i in range(min(k, rank)):
        axis = vt[i]
        flip = -1.0 if axis[np.argmax(np.abs(axis))] < 0 else 1.0
        loadings[i] = axis * flip
        sv[i] = s[i]
        proj[i] = (centered @ (axis * flip)).reshape(h, w)
    return proj, sv, loadings, rank


def pca_features(feats, k: int = 4):
    """Top-k PCA projections of a feature stack, min-max scaled to [0, 1].

    Rank-deficient components are flat 0.5 maps and trigger a warning, as
    does any projection with zero dynamic range.
    """
    proj, _, _, rank = pca_decompose(feats, k=k)
    out = np.empty_like(proj)
    for i in range(proj.shape[0]):
        if i >= rank:
            warnings.warn(f"feature stack has rank {rank}; component {i} is undefined")
            out[i] = 0.5
            continue
        lo, hi = proj[i].min(), proj[i].max()
        if hi - lo < 1e-30:
            warnings.warn(f"component {i} is constant")
            out[i] = 0.5
        else:
            out[i] = (proj[i] - lo) / (hi - lo)
    return out
