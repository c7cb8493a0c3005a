import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riverlitter import quality
from riverlitter.errors import InvalidParameterError, ShapeError
from riverlitter.quality import SsimParams

from oracles import mse_oracle, ssim_window_oracle


def test_mse_zero_and_constant():
    a = np.full((4, 4, 1), 0.5)
    assert quality.mse(a, a) == 0
    assert quality.mse(a, np.full((4, 4, 1), 0.6)) == pytest.approx(0.01, abs=1e-15)


def test_mse_random_matches_oracle(rng):
    a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
    assert abs(quality.mse(a, b) - mse_oracle(a, b)) < 1e-12


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        quality.mse(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))


def test_psnr_fixtures():
    a = np.full((4, 4, 1), 0.5)
    assert quality.psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert math.isinf(quality.psnr(a, a))
    assert quality.psnr(np.zeros((3, 3, 1)), np.ones((3, 3, 1))) == 0.0


def test_psnr_eight_bit_scale():
    a = np.full((4, 4, 1), 100.0)
    assert quality.psnr(a, a + 25.5, max_i=255.0) == pytest.approx(20.0, abs=1e-9)


def test_psnr_monotone_in_noise(rng):
    base = rng.random((32, 32, 3)) * 0.5 + 0.25
    z = rng.standard_normal(base.shape)
    values = [quality.psnr(base, base + s * z) for s in (0.001, 0.01, 0.05, 0.1)]
    assert all(x > y for x, y in zip(values, values[1:]))


@given(st.integers(0, 10_000))
def test_psnr_symmetric(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((8, 8, 1)), r.random((8, 8, 1))
    assert quality.psnr(a, b) == quality.psnr(b, a)


def test_ssim_identity(rng):
    x = rng.random((20, 20, 3))
    assert quality.ssim(x, x) == 1.0
    assert quality.ssim(x, x, SsimParams(window="global")) == 1.0


def test_ssim_constant_global_fixture():
    a, b = np.full((8, 8, 1), 0.2), np.full((8, 8, 1), 0.8)
    expected = (0.32 + 1e-4) / (0.68 + 1e-4)
    assert quality.ssim(a, b, SsimParams(window="global")) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.4707, abs=1e-4)


def test_ssim_windowed_matches_oracle(rng):
    a, b = rng.random((32, 32, 1)), rng.random((32, 32, 1))
    assert abs(quality.ssim(a, b) - ssim_window_oracle(a, b)) < 1e-6


def test_ssim_window_too_large():
    with pytest.raises(InvalidParameterError):
        quality.ssim(np.zeros((8, 8, 1)), np.zeros((8, 8, 1)))


@given(st.integers(0, 10_000))
def test_ssim_range_and_symmetry(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((12, 12, 3)), r.random((12, 12, 3))
    s = quality.ssim(a, b)
    assert -1 <= s <= 1
    assert s == pytest.approx(quality.ssim(b, a), abs=1e-12)


def test_quality_report_inf_serialization():
    a = np.zeros((12, 12, 1))
    rep = quality.quality_report(a, a)
    assert rep.to_json()["psnr_db"] == "inf"
    assert math.isinf(quality.decode_db(rep.to_json()["psnr_db"]))
