"""Reduced-resolution dataset construction under Wald's protocol.

Originals are blurred with a sensor-like Gaussian (parameterized by its
gain at the Nyquist frequency of the decimated grid) and then decimated.
The original MS patch becomes the ground truth; the degraded MS and PAN
become the network inputs.  A procedural scene generator stands in for
satellite data at desk scale.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ShapeMismatchError


@dataclass(frozen=True)
class SensorModel:
    bands: int = 8
    ms_gain: object = 0.30  # scalar or per-band sequence
    pan_gain: float = 0.15
    ratio: int = 4

    def validate(self) -> "SensorModel":
        if self.bands < 1:
            raise ConfigError(f"bands must be >= 1, got {self.bands}")
        if self.ratio < 2:
            raise ConfigError(f"ratio must be >= 2, got {self.ratio}")
        gains = list(np.atleast_1d(np.asarray(self.ms_gain, dtype=np.float64)))
        gains.append(self.pan_gain)
        for g in gains:
            if not (0.0 < g < 1.0):
                raise ConfigError(f"MTF gains must lie in (0, 1), got {g}")
        return self

    def ms_gains(self) -> np.ndarray:
        g = np.atleast_1d(np.asarray(self.ms_gain, dtype=np.float64))
        if g.size == 1:
            return np.full(self.bands, float(g[0]))
        if g.size != self.bands:
            raise ConfigError(f"need {self.bands} MS gains, got {g.size}")
        return g


@dataclass
class SamplePair:
    id: str
    pan: np.ndarray   # (1, P, P)
    lrms: np.ndarray  # (B, P/4, P/4)
    gt: np.ndarray    # (B, P, P)
    norm: dict = field(default_factory=dict)

    def validate(self, ratio: int = 4) -> "SamplePair":
        if self.pan.ndim != 3 or self.pan.shape[0] != 1:
            raise ShapeMismatchError(f"pan must be (1, h, w), got {self.pan.shape}")
        if self.gt.shape[1:] != self.pan.shape[1:]:
            raise ShapeMismatchError(f"gt {self.gt.shape} must match pan {self.pan.shape} spatially")
        expect = (self.gt.shape[0], self.gt.shape[1] // ratio, self.gt.shape[2] // ratio)
        if self.lrms.shape != expect or self.gt.shape[1] % ratio or self.gt.shape[2] % ratio:
            raise ShapeMismatchError(
                f"lrms {self.lrms.shape} is not gt {self.gt.shape} reduced by {ratio}"
            )
        for name, arr in (("pan", self.pan), ("lrms", self.lrms), ("gt", self.gt)):
            if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
                raise ValueError(f"{name} of sample {self.id} is not normalized to [0, 1]")
        return self


@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list
    seed: int

    def validate(self) -> "DatasetSplit":
        all_ids = self.train + self.val + self.test
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("split lists overlap")
        return self


def mtf_sigma(gain: float, ratio: int) -> float:
    """Standard deviation of a Gaussian whose transfer function equals
    `gain` at the Nyquist frequency 1/(2*ratio) of the decimated grid."""
    if not (0.0 < gain < 1.0):
        raise ConfigError(f"MTF gain must lie in (0, 1), got {gain}")
    return ratio * np.sqrt(-2.0 * np.log(gain)) / np.pi


def mtf_kernel(gain: float, ratio: int = 4, size: int = 41) -> np.ndarray:
    """Normalized 1-D Gaussian taps (odd length) for the given Nyquist gain."""
    if size % 2 == 0 or size < 3:
        raise ConfigError(f"kernel size must be odd and >= 3, got {size}")
    sigma = mtf_sigma(gain, ratio)
    t = np.arange(size, dtype=np.float64) - size // 2
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def mtf_blur(img, gain, ratio: int = 4, size: int = 41) -> np.ndarray:
    """Separable Gaussian blur with edge replication.

    img is (bands, h, w) or (h, w); gain is a scalar or one value per band.
    """
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeMismatchError(f"mtf_blur expects (bands, h, w), got {arr.shape}")
    gains = np.atleast_1d(np.asarray(gain, dtype=np.float64))
    if gains.size == 1:
        gains = np.full(arr.shape[0], float(gains[0]))
    if gains.size != arr.shape[0]:
        raise ShapeMismatchError(f"need {arr.shape[0]} gains, got {gains.size}")
    out = np.empty_like(arr)
    for b in range(arr.shape[0]):
        k = mtf_kernel(float(gains[b]), ratio, size)
        tmp = ndimage.correlate1d(arr[b], k, axis=0, mode="nearest")
        out[b] = ndimage.correlate1d(tmp, k, axis=1, mode="nearest")
    return out[0] if squeeze else out


def decimate(img, factor: int = 4) -> np.ndarray:
    """Keep every factor-th pixel starting at offset 0."""
    arr = np.asarray(img, dtype=np.float64)
    if factor < 1:
        raise ConfigError(f"decimation factor must be >= 1, got {factor}")
    return np.ascontiguousarray(arr[..., ::factor, ::factor])


def _normalize(arr: np.ndarray):
    lo = float(arr.min())
    hi = float(arr.max())
    if hi - lo < 1e-12:
        return np.zeros_like(arr), lo, hi
    return (arr - lo) / (hi - lo), lo, hi


def make_samples(ms_scene, pan_scene, sensor: SensorModel, patch: int = 256,
                 stride=None, prefix: str = "p", blur_size: int = 41):
    """Cut aligned patches and degrade them per Wald's protocol.

    GT is the normalized MS patch; LRMS is blur+decimate of GT; the input
    PAN is blur+decimate of the (4x larger) PAN patch.  Per-scene min/max
    used for normalization is recorded on every sample.
    """
    sensor.validate()
    ms = np.asarray(ms_scene, dtype=np.float64)
    pan = np.asarray(pan_scene, dtype=np.float64)
    if pan.ndim == 2:
        pan = pan[None]
    if ms.ndim != 3 or pan.ndim != 3 or pan.shape[0] != 1:
        raise ShapeMismatchError(
            f"scenes must be (B, h, w) MS and (1, H, W) PAN, got {ms.shape} and {pan.shape}"
        )
    r = sensor.ratio
    if pan.shape[1] != r * ms.shape[1] or pan.shape[2] != r * ms.shape[2]:
        raise ShapeMismatchError(
            f"pan scene {pan.shape} must be exactly {r}x the ms scene {ms.shape}"
        )
    if ms.shape[0] != sensor.bands:
        raise ShapeMismatchError(f"scene has {ms.shape[0]} bands, sensor expects {sensor.bands}")
    stride = patch if stride is None else stride
    if patch % r:
        raise ConfigError(f"patch size {patch} must be divisible by the ratio {r}")
    if ms.shape[1] < patch or ms.shape[2] < patch:
        warnings.warn(
            f"scene {ms.shape} smaller than one {patch}x{patch} patch; no samples",
            stacklevel=2,
        )
        return []

    ms_n, ms_lo, ms_hi = _normalize(ms)
    pan_n, pan_lo, pan_hi = _normalize(pan)
    norm = {"ms_min": ms_lo, "ms_max": ms_hi, "pan_min": pan_lo, "pan_max": pan_hi}
    gains = sensor.ms_gains()

    out = []
    for row, y in enumerate(range(0, ms.shape[1] - patch + 1, stride)):
        for col, x in enumerate(range(0, ms.shape[2] - patch + 1, stride)):
            gt = np.ascontiguousarray(ms_n[:, y:y + patch, x:x + patch])
            pan_patch = pan_n[:, r * y:r * (y + patch), r * x:r * (x + patch)]
            lrms = decimate(mtf_blur(gt, gains, ratio=r, size=blur_size), r)
            pan_in = decimate(mtf_blur(pan_patch, sensor.pan_gain, ratio=r, size=blur_size), r)
            pair = SamplePair(
                id=f"{prefix}_{row:03d}_{col:03d}",
                pan=pan_in, lrms=lrms, gt=gt, norm=dict(norm),
            )
            out.append(pair.validate(r))
    return out


def split(ids, seed: int, fractions=(0.7, 0.2, 0.1)) -> DatasetSplit:
    """Deterministic shuffled split (PCG64 generator seeded with `seed`)."""
    ids = list(ids)
    if abs(sum(fractions) - 1.0) > 1e-9 or len(fractions) != 3:
        raise ConfigError(f"fractions must be three values summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n = len(ids)
    n_train = int(fractions[0] * n)
    n_val = int(fractions[1] * n)
    return DatasetSplit(
        train=order[:n_train],
        val=order[n_train:n_train + n_val],
        test=order[n_train + n_val:],
        seed=seed,
    ).validate()


def _spectrum(rng: np.random.Generator, bands: int) -> np.ndarray:
    """A smooth reflectance curve over the band axis."""
    base = rng.uniform(0.25, 0.75)
    tilt = rng.uniform(-0.15, 0.15)
    amp = rng.uniform(0.0, 0.08)
    freq = rng.uniform(0.5, 1.5)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    pos = np.linspace(0.0, 1.0, bands)
    return np.clip(base + tilt * (pos - 0.5) + amp * np.sin(2 * np.pi * freq * pos + phase),
                   0.05, 0.95)


def _cosine_field(rng: np.random.Generator, yy, xx, n_waves: int, max_freq: float) -> np.ndarray:
    field_sum = np.zeros_like(yy)
    for _ in range(n_waves):
        fy = rng.uniform(-max_freq, max_freq)
        fx = rng.uniform(-max_freq, max_freq)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        field_sum += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
    peak = np.abs(field_sum).max()
    return field_sum / peak if peak > 0 else field_sum


def synth_scene(seed: int, size: int = 128, bands: int = 8, ratio: int = 4):
    """Procedural test scene: (B, size, size) MS and (1, ratio*size, ...) PAN.

    Random rectangles and disks with smooth band-correlated spectra over a
    textured background; PAN is the uniform band mean plus a small
    independent detail layer.  Values lie in [0, 1].
    """
    if size < 1 or bands < 1:
        raise ConfigError(f"size and bands must be positive, got {size}, {bands}")
    rng = np.random.default_rng(seed)
    big = ratio * size
    yy, xx = np.mgrid[0:big, 0:big].astype(np.float64) / big

    canvas = np.empty((bands, big, big))
    canvas[:] = _spectrum(rng, bands)[:, None, None]
    for _ in range(12):
        spec = _spectrum(rng, bands)
        if rng.random() < 0.5:
            y0, y1 = np.sort(rng.uniform(0.0, 1.0, 2))
            x0, x1 = np.sort(rng.uniform(0.0, 1.0, 2))
            mask = (yy >= y0) & (yy < y1) & (xx >= x0) & (xx < x1)
        else:
            cy, cx = rng.uniform(0.1, 0.9, 2)
            rad = rng.uniform(0.03, 0.25)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < rad ** 2
        canvas[:, mask] = spec[:, None]

    texture = _cosine_field(rng, yy, xx, n_waves=5, max_freq=9.0)
    coupling = rng.uniform(0.5, 1.0, bands)
    canvas += 0.05 * coupling[:, None, None] * texture[None]
    canvas = np.clip(canvas, 0.0, 1.0)

    # MS sensor sees the scene at 1/ratio resolution: block average
    ms = canvas.reshape(bands, size, ratio, size, ratio).mean(axis=(2, 4))

    detail = _cosine_field(rng, yy, xx, n_waves=6, max_freq=40.0)
    pan = canvas.mean(axis=0, keepdims=True) + 0.02 * detail[None]
    pan = np.clip(pan, 0.0, 1.0)
    return ms, pan
