import numpy as np
import pytest

from sdrcnn import resample

from oracles import bicubic_ramp_expected


def test_factor_one_is_exact_identity():
    for n in (1, 2, 5, 17):
        m = resample.upsample_matrix(n, 1)
        assert np.array_equal(m, np.eye(n))
        img = np.random.default_rng(n).normal(size=(n, n))
        assert np.array_equal(resample.upsample2d(img, 1), img)


def test_rows_sum_to_one():
    for n, factor in [(4, 2), (7, 3), (16, 4), (5, 8)]:
        m = resample.upsample_matrix(n, factor)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_linear_ramp_reproduced_in_interior():
    rng = np.random.default_rng(7)
    for factor in (2, 3, 4):
        n = 12
        slope, intercept = rng.normal(size=2)
        ramp = slope * np.arange(n) + intercept
        out = resample.upsample2d(np.tile(ramp, (n, 1)), factor)
        expected = bicubic_ramp_expected(n, factor, slope, intercept)
        valid = np.isfinite(expected)
        assert valid.any()
        assert np.allclose(out[n // 2 * factor, valid], expected[valid], atol=1e-10)


def test_constant_preserved():
    rng = np.random.default_rng(3)
    for factor in (2, 4):
        c = float(rng.normal())
        out = resample.upsample2d(np.full((6, 9), c), factor)
        assert np.allclose(out, c, atol=1e-12)


def test_bands_matches_per_band_2d():
    rng = np.random.default_rng(11)
    cube = rng.normal(size=(3, 6, 5))
    out = resample.upsample_bands(cube, 4)
    assert out.shape == (3, 24, 20)
    for b in range(3):
        assert np.allclose(out[b], resample.upsample2d(cube[b], 4), atol=1e-12)


def test_matrix_input_validation():
    with pytest.raises(ValueError):
        resample.upsample_matrix(0, 4)
    with pytest.raises(ValueError):
        resample.upsample_matrix(4, 0)
    with pytest.raises(ValueError):
        resample.upsample2d(np.zeros((2, 2, 2)), 2)
    with pytest.raises(ValueError):
        resample.upsample_bands(np.zeros((2, 2)), 2)
