"""Image quality metrics.

Reduced-resolution (against a reference): SAM, ERGAS, SCC, Q2n.  Full
resolution (no reference): D_lambda, D_s, QNR.  Plus absolute error maps
and the mean/std aggregation used in reports.  All functions take plain
(bands, h, w) numpy rasters.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, ShapeMismatchError, require_same_shape

IDEALS = {
    "sam": 0.0,
    "ergas": 0.0,
    "scc": 1.0,
    "q2n": 1.0,
    "d_lambda": 0.0,
    "d_s": 0.0,
    "qnr": 1.0,
}


def _as_raster(x, name="raster"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatchError(f"{name} must be (bands, h, w), got shape {arr.shape}")
    return arr


def sam(x, ref) -> float:
    """Mean spectral angle in degrees; zero-vector pixels contribute 0."""
    x = _as_raster(x, "x")
    ref = _as_raster(ref, "ref")
    require_same_shape(x.shape, ref.shape, "sam inputs")
    if x.shape[0] < 2:
        raise DegenerateInputError("sam needs at least 2 bands")
    xf = x.reshape(x.shape[0], -1)
    rf = ref.reshape(ref.shape[0], -1)
    dot = (xf * rf).sum(axis=0)
    nx2 = (xf * xf).sum(axis=0)
    nr2 = (rf * rf).sum(axis=0)
    ok = (nx2 > 0) & (nr2 > 0)
    angles = np.zeros(dot.shape)
    # single sqrt of the product: for x == ref this is sqrt(dot*dot) == dot,
    # so identical inputs give an angle of exactly zero
    cosv = np.clip(dot[ok] / np.sqrt(nx2[ok] * nr2[ok]), -1.0, 1.0)
    angles[ok] = np.degrees(np.arccos(cosv))
    return float(angles.mean())


def ergas(x, ref, ratio: int = 4) -> float:
    x = _as_raster(x, "x")
    ref = _as_raster(ref, "ref")
    require_same_shape(x.shape, ref.shape, "ergas inputs")
    means = ref.reshape(ref.shape[0], -1).mean(axis=1)
    if np.any(np.abs(means) < 1e-12):
        raise DegenerateInputError("degenerate reference band: mean is zero")
    rmse = np.sqrt(((x - ref) ** 2).reshape(x.shape[0], -1).mean(axis=1))
    return float(100.0 / ratio * np.sqrt(((rmse / means) ** 2).mean()))


_LAPLACIAN = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])


def highpass(img: np.ndarray) -> np.ndarray:
    """3x3 Laplacian, zero padding."""
    return ndimage.convolve(np.asarray(img, dtype=np.float64), _LAPLACIAN,
                            mode="constant", cval=0.0)


def scc(x, ref) -> float:
    """Mean over bands of the Pearson correlation of Laplacian-filtered images.

    Bands whose filtered version is constant on either side score 0 by
    convention.
    """
    x = _as_raster(x, "x")
    ref = _as_raster(ref, "ref")
    require_same_shape(x.shape, ref.shape, "scc inputs")
    vals = []
    for b in range(x.shape[0]):
        hx = highpass(x[b]).ravel()
        hr = highpass(ref[b]).ravel()
        dx = hx - hx.mean()
        dr = hr - hr.mean()
        sx = (dx * dx).sum()
        sr = (dr * dr).sum()
        den = math.sqrt(sx * sr)
        vals.append(0.0 if den == 0.0 else float((dx * dr).sum()) / den)
    return float(np.mean(vals))


# ------------------------------------------------------- hypercomplex quality

def _cd_conj(z: np.ndarray) -> np.ndarray:
    """Cayley-Dickson conjugate: negate every component but the first."""
    out = z.copy()
    out[1:] = -out[1:]
    return out


def _cd_mult(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product of component-major arrays (B, ...), B a power
    of two.  Convention: (a, b)(c, d) = (ac - conj(d) b, d a + b conj(c))."""
    B = u.shape[0]
    if B == 1:
        return u * v
    half = B // 2
    a, b = u[:half], u[half:]
    c, d = v[:half], v[half:]
    top = _cd_mult(a, c) - _cd_mult(_cd_conj(d), b)
    bot = _cd_mult(d, a) + _cd_mult(b, _cd_conj(c))
    return np.concatenate([top, bot], axis=0)


def _block_q(x: np.ndarray, y: np.ndarray) -> float:
    """Quality index of one block pair; x, y are (B, npix), B a power of two.

    B >= 2 uses the modulus of the hypercomplex covariance; B == 1 keeps the
    sign and is exactly the scalar universal quality index.  Degenerate
    terms (zero means, zero variances) default to 1 so identical blocks
    always score 1.
    """
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    cx = x - mx[:, None]
    cy = y - my[:, None]
    var_x = _cd_mult(cx, _cd_conj(cx)).mean(axis=1)[0]
    var_y = _cd_mult(cy, _cd_conj(cy)).mean(axis=1)[0]
    cov = _cd_mult(cx, _cd_conj(cy)).mean(axis=1)

    if x.shape[0] == 1:
        m1, m2 = float(mx[0]), float(my[0])
        num_l = 2.0 * m1 * m2
        den_l = m1 * m1 + m2 * m2
        num_c = 2.0 * float(cov[0])
    else:
        m1 = math.sqrt(float((mx * mx).sum()))
        m2 = math.sqrt(float((my * my).sum()))
        num_l = 2.0 * m1 * m2
        den_l = m1 * m1 + m2 * m2
        num_c = 2.0 * math.sqrt(float((cov * cov).sum()))
    den_c = var_x + var_y
    lum = 1.0 if den_l == 0.0 else num_l / den_l
    contrast = 1.0 if den_c == 0.0 else num_c / den_c
    return lum * contrast


def _block_starts(size: int, block: int, shift: int):
    if size <= block:
        return [0], size
    starts = list(range(0, size - block + 1, shift))
    if starts[-1] + block < size:
        starts.append(size - block)
    return starts, block


def _pad_to_pow2(x: np.ndarray) -> np.ndarray:
    B = x.shape[0]
    target = 1 << (B - 1).bit_length()
    if target == B:
        return x
    pad = np.zeros((target - B,) + x.shape[1:])
    return np.concatenate([x, pad], axis=0)


def q2n(x, ref, block: int = 32, shift: int = 32) -> float:
    """Hypercomplex universal quality index, blockwise mean.

    Bands are zero-padded to the next power of two.  Blocks are `block`
    square tiles every `shift` pixels; a ragged edge gets one extra tile
    flush with the border; images smaller than a block form a single block.
    """
    x = _as_raster(x, "x")
    ref = _as_raster(ref, "ref")
    require_same_shape(x.shape, ref.shape, "q2n inputs")
    if block < 1 or shift < 1:
        raise ValueError("block and shift must be positive")
    xp = _pad_to_pow2(x)
    rp = _pad_to_pow2(ref)
    rows, bh = _block_starts(x.shape[1], block, shift)
    cols, bw = _block_starts(x.shape[2], block, shift)
    vals = []
    for i in rows:
        for j in cols:
            bx = xp[:, i:i + bh, j:j + bw].reshape(xp.shape[0], -1)
            br = rp[:, i:i + bh, j:j + bw].reshape(rp.shape[0], -1)
            vals.append(_block_q(bx, br))
    return float(np.mean(vals))


def d_lambda(fused, ms, block: int = 32, shift: int = 32, p: int = 1) -> float:
    """Spectral distortion: inter-band Q differences between the fused image
    (at its own scale) and the original MS (at its own scale)."""
    fused = _as_raster(fused, "fused")
    ms = _as_raster(ms, "ms")
    B = fused.shape[0]
    if B < 2 or ms.shape[0] != B:
        raise DegenerateInputError(
            f"d_lambda needs matching band counts >= 2, got {fused.shape} and {ms.shape}"
        )
    qf = np.empty((B, B))
    qm = np.empty((B, B))
    for b in range(B):
        for c in range(B):
            if b == c:
                continue
            qf[b, c] = q2n(fused[b:b + 1], fused[c:c + 1], block, shift)
            qm[b, c] = q2n(ms[b:b + 1], ms[c:c + 1], block, shift)
    acc = 0.0
    for b in range(B):
        for c in range(B):
            if b != c:
                acc += abs(qf[b, c] - qm[b, c]) ** p
    return float((acc / (B * (B - 1))) ** (1.0 / p))


def d_s(fused, ms, pan, pan_gain: float = 0.15, block: int = 32, shift: int = 32,
        q: int = 1) -> float:
    """Spatial distortion: per-band Q against PAN at high scale vs the
    MTF-degraded PAN at MS scale."""
    from .wald import decimate, mtf_blur

    fused = _as_raster(fused, "fused")
    ms = _as_raster(ms, "ms")
    pan = _as_raster(pan, "pan")
    B = fused.shape[0]
    if ms.shape[0] != B:
        raise ShapeMismatchError(f"band mismatch: fused {fused.shape} vs ms {ms.shape}")
    if pan.shape[0] != 1 or pan.shape[1:] != fused.shape[1:]:
        raise ShapeMismatchError(f"pan {pan.shape} must be single-band at fused scale {fused.shape}")
    if fused.shape[1] % ms.shape[1] or fused.shape[2] % ms.shape[2]:
        raise ShapeMismatchError(f"fused {fused.shape} not an integer multiple of ms {ms.shape}")
    ratio = fused.shape[1] // ms.shape[1]
    pan_low = decimate(mtf_blur(pan, pan_gain, ratio=ratio), ratio)
    acc = 0.0
    for b in range(B):
        q_high = q2n(fused[b:b + 1], pan, block, shift)
        q_low = q2n(ms[b:b + 1], pan_low, block, shift)
        acc += abs(q_high - q_low) ** q
    return float((acc / B) ** (1.0 / q))


def qnr(d_lambda_value: float, d_s_value: float) -> float:
    return (1.0 - d_lambda_value) * (1.0 - d_s_value)


def aem(fused, gt) -> np.ndarray:
    """Absolute error map: per-pixel mean over bands, returned as (1, h, w)."""
    fused = _as_raster(fused, "fused")
    gt = _as_raster(gt, "gt")
    require_same_shape(fused.shape, gt.shape, "aem inputs")
    return np.abs(fused - gt).mean(axis=0, keepdims=True)


def aggregate(values) -> tuple:
    """Arithmetic mean and population standard deviation."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise DegenerateInputError("aggregate needs at least one value")
    mean = float(arr.mean())
    std = float(np.sqrt(((arr - mean) ** 2).mean()))
    return mean, std


@dataclass
class MetricReport:
    method: str
    sample_ids: list
    values: dict = field(default_factory=dict)  # metric -> list aligned with sample_ids
    ideal: dict = field(default_factory=dict)   # metric -> 0.0 or 1.0

    @property
    def count(self) -> int:
        return len(self.sample_ids)

    def summary(self) -> dict:
        return {metric: aggregate(vals) for metric, vals in self.values.items()}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "sample_id", "metric", "value"])
            for metric, vals in self.values.items():
                for sid, val in zip(self.sample_ids, vals):
                    writer.writerow([self.method, sid, metric, repr(float(val))])
            for metric, (mean, std) in self.summary().items():
                writer.writerow([self.method, "summary", metric, f"{mean!r}±{std!r}"])
