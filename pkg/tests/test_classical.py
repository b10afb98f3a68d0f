"""Classical fusion baselines: exact identities and formula oracles."""
import numpy as np
import pytest

from sdrcnn import classical, resample
from sdrcnn.errors import DegenerateInputError, ShapeMismatchError

from oracles import box_mean_oracle, gs_oracle, sfim_oracle


def scene(seed, bands=4, h=8, w=8, ratio=4, lo=0.3, hi=0.9):
    rng = np.random.default_rng(seed)
    lrms = rng.uniform(lo, hi, (bands, h, w))
    pan = rng.uniform(0.5, 1.0, (1, ratio * h, ratio * w))
    return pan, lrms


def test_box_smooth_matches_oracle():
    rng = np.random.default_rng(0)
    for size in (3, 5, 7):
        img = rng.uniform(size=(10, 12))
        assert np.allclose(classical.box_smooth(img, size), box_mean_oracle(img, size),
                           atol=1e-12)


def test_box_smooth_constant_identity_is_bitwise():
    img = np.full((9, 9), 0.3172394)
    assert np.array_equal(classical.box_smooth(img, 7), img)


def test_sfim_matches_oracle_without_clamping():
    for seed in range(5):
        pan, lrms = scene(seed)
        got = classical.sfim(pan, lrms)
        expect = sfim_oracle(pan[0], resample.upsample_bands(lrms, 4), 7)
        assert got.shape == (4, 32, 32)
        assert np.allclose(got, expect, atol=1e-10)


def test_sfim_constant_pan_is_exact_identity():
    _, lrms = scene(1)
    pan = np.full((1, 32, 32), 0.6180339887)
    up = resample.upsample_bands(lrms, 4)
    assert np.array_equal(classical.sfim(pan, lrms), up)


def test_sfim_pan_scale_invariance_power_of_two():
    pan, lrms = scene(2)
    base = classical.sfim(pan, lrms)
    for k in (2.0, 0.25, 8.0):
        assert np.array_equal(classical.sfim(k * pan, lrms), base)


def test_sfim_clamp_bounds_the_ratio():
    _, lrms = scene(3)
    pan = np.full((1, 32, 32), 0.5)
    pan[0, 10:14, 10:14] = 1e-9  # dark hole drives the raw ratio tiny
    out = classical.sfim(pan, lrms, clamp=(0.5, 2.0))
    up = resample.upsample_bands(lrms, 4)
    ratio = out / up
    assert ratio.min() >= 0.5 - 1e-12 and ratio.max() <= 2.0 + 1e-12
    with pytest.raises(ValueError):
        classical.sfim(pan, lrms, clamp=(1.5, 2.0))


def test_sfim_unclamped_guard():
    _, lrms = scene(4)
    pan = np.zeros((1, 32, 32))
    with pytest.raises(DegenerateInputError):
        classical.sfim(pan, lrms, clamp=None)


def test_gs_matches_oracle():
    for seed in range(5):
        pan, lrms = scene(seed + 10)
        got = classical.gram_schmidt(pan, lrms)
        expect = gs_oracle(pan[0], resample.upsample_bands(lrms, 4), np.full(4, 0.25))
        assert got.shape == (4, 32, 32)
        assert np.allclose(got, expect, atol=1e-10)


def test_gs_pan_equal_to_intensity_is_exact_identity():
    _, lrms = scene(5)
    up = resample.upsample_bands(lrms, 4)
    pan = np.tensordot(np.full(4, 0.25), up, axes=1)[None]
    out = classical.gram_schmidt(pan, lrms)
    assert np.array_equal(out, up)


def test_gs_single_band_returns_matched_pan():
    pan, lrms = scene(6, bands=1)
    out = classical.gram_schmidt(pan, lrms)
    up = resample.upsample_bands(lrms, 4)
    i = up[0]
    r = i.std() / pan[0].std()
    matched = (pan[0] - pan[0].mean()) * r + i.mean()
    assert np.allclose(out[0], matched, atol=1e-10)


def test_gs_detail_has_zero_band_mean_shift():
    pan, lrms = scene(7)
    out = classical.gram_schmidt(pan, lrms)
    up = resample.upsample_bands(lrms, 4)
    for b in range(4):
        assert abs(out[b].mean() - up[b].mean()) < 1e-12


def test_gs_degenerate_guards():
    _, lrms = scene(8)
    flat_pan = np.full((1, 32, 32), 0.4)
    with pytest.raises(DegenerateInputError, match="PAN"):
        classical.gram_schmidt(flat_pan, lrms)
    pan, _ = scene(9)
    flat_lrms = np.full((4, 8, 8), 0.6)
    with pytest.raises(DegenerateInputError, match="intensity"):
        classical.gram_schmidt(pan, flat_lrms)


def test_gs_weight_validation():
    pan, lrms = scene(10)
    with pytest.raises(ShapeMismatchError):
        classical.gram_schmidt(pan, lrms, intensity_weights=[0.5, 0.5])


def test_shape_validation():
    with pytest.raises(ShapeMismatchError):
        classical.sfim(np.zeros((2, 8, 8)), np.zeros((3, 2, 2)))
    with pytest.raises(ShapeMismatchError):
        classical.sfim(np.zeros((1, 9, 8)), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        classical.ClassicalMethod("sfim", smoothing_kernel=4).validate(4)
    with pytest.raises(ValueError):
        classical.ClassicalMethod("sfim", smoothing_kernel=3).validate(4)
    with pytest.raises(ValueError):
        classical.ClassicalMethod("other").validate(4)
