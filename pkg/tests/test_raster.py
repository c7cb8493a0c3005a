import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from riverlitter import raster
from riverlitter.boxes import Box
from riverlitter.errors import (InvalidInputError, InvalidKernelError,
                                InvalidParameterError)
from riverlitter.raster import DegradationSpec


def images(min_side=1, max_side=24):
    return st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side),
                     st.sampled_from([1, 3])).flatmap(
        lambda s: arrays(np.float32, s, elements=st.floats(0, 1, width=32)))


# ---------------------------------------------------------------- convolution

def test_delta_kernel_identity(rng):
    img = rng.random((9, 7, 3)).astype(np.float32)
    assert np.array_equal(raster.convolve2d(img, raster.delta_kernel()), img)


def test_box_kernel_on_constant():
    img = raster.constant_image(6, 5, 0.5)
    out = raster.convolve2d(img, np.full((1, 3), 1 / 3))
    assert np.allclose(out, 0.5, atol=1e-7)


def test_box_kernel_hand_computed_reflect():
    img = np.array([[0.1, 0.2, 0.3],
                    [0.4, 0.5, 0.6],
                    [0.7, 0.8, 0.9]], dtype=np.float32)
    # rows padded by reflection: [b a b c b]
    expected = np.array([[(0.2 + 0.1 + 0.2) / 3, (0.1 + 0.2 + 0.3) / 3, (0.2 + 0.3 + 0.2) / 3],
                         [(0.5 + 0.4 + 0.5) / 3, (0.4 + 0.5 + 0.6) / 3, (0.5 + 0.6 + 0.5) / 3],
                         [(0.8 + 0.7 + 0.8) / 3, (0.7 + 0.8 + 0.9) / 3, (0.8 + 0.9 + 0.8) / 3]])
    out = raster.convolve2d(img, np.full((1, 3), 1 / 3))
    assert np.allclose(out[:, :, 0], expected, atol=1e-6)


def test_even_kernel_rejected():
    with pytest.raises(InvalidKernelError):
        raster.convolve2d(np.zeros((4, 4, 1)), np.ones((2, 2)) / 4)


def test_empty_image_rejected():
    with pytest.raises(InvalidInputError):
        raster.convolve2d(np.zeros((0, 4, 1)), raster.delta_kernel())


@given(images())
def test_delta_convolution_is_identity(img):
    assert np.array_equal(raster.convolve2d(img, raster.delta_kernel()), img)


# ---------------------------------------------------------------- motion PSF

def test_psf_length_one_is_delta():
    assert np.array_equal(raster.motion_psf(1, 0.7), np.ones((1, 1)))


def test_psf_length_three_horizontal():
    k = raster.motion_psf(3, 0.0)
    assert k.shape == (1, 3)
    assert np.allclose(k, 1 / 3, atol=1e-15)


def test_psf_vertical_is_transpose():
    assert np.allclose(raster.motion_psf(5, math.pi / 2), raster.motion_psf(5, 0.0).T, atol=1e-12)


@given(st.floats(1, 15), st.floats(-math.pi, math.pi))
def test_psf_normalized_odd_symmetric(length, angle):
    k = raster.motion_psf(length, angle)
    assert k.shape[0] % 2 == 1 and k.shape[1] % 2 == 1
    assert abs(k.sum() - 1) < 1e-12
    assert (k >= 0).all()
    assert np.allclose(k, k[::-1, ::-1], atol=1e-12)


def test_psf_invalid_length():
    with pytest.raises(InvalidParameterError):
        raster.motion_psf(0.5, 0)


# ---------------------------------------------------------------- resampling

def test_resize_identity(rng):
    img = rng.random((13, 17, 3)).astype(np.float32)
    assert np.abs(raster.bicubic_resize(img, 13, 17) - img).max() < 1e-6


@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.integers(1, 40))
def test_resize_preserves_constant(h, w, oh, ow):
    out = raster.bicubic_resize(raster.constant_image(h, w, 0.5), oh, ow)
    assert out.shape == (oh, ow, 1)
    assert np.abs(out - 0.5).max() < 1e-6


def test_resize_128_to_512():
    out = raster.bicubic_resize(np.zeros((128, 128, 3)), 512, 512)
    assert out.shape == (512, 512, 3)


def test_resize_zero_dimension():
    with pytest.raises(InvalidParameterError):
        raster.bicubic_resize(np.zeros((4, 4, 1)), 0, 4)


def test_catmull_rom_weights_direct():
    # 2x upsampling of 4 samples: output 1 sits at source 0.25
    m = raster.resample_matrix(4, 8)
    t = 0.25
    a = -0.5
    w = [a * (t + 1) ** 3 - 5 * a * (t + 1) ** 2 + 8 * a * (t + 1) - 4 * a,
         (a + 2) * t ** 3 - (a + 3) * t ** 2 + 1,
         (a + 2) * (1 - t) ** 3 - (a + 3) * (1 - t) ** 2 + 1,
         a * (2 - t) ** 3 - 5 * a * (2 - t) ** 2 + 8 * a * (2 - t) - 4 * a]
    # taps at source -1, 0, 1, 2 ; -1 reflects onto 1
    expected = np.array([w[1], w[0] + w[2], w[3], 0.0])
    assert np.allclose(m[1], expected, atol=1e-14)


def test_resize_linear_ramp_interior_exact():
    # Catmull-Rom reproduces linear functions away from the borders
    ramp = np.tile(np.linspace(0.1, 0.9, 32), (4, 1)).astype(np.float64)
    out = raster.bicubic_resize(ramp, 4, 64)[0, :, 0].astype(np.float64)
    src = (np.arange(64) + 0.5) / 2 - 0.5
    expected = 0.1 + 0.8 * src / 31
    assert np.allclose(out[4:-4], expected[4:-4], atol=1e-6)


# ---------------------------------------------------------------- noise

def test_noise_zero_sigma(rng):
    img = rng.random((8, 8, 3)).astype(np.float32)
    assert np.array_equal(raster.add_gaussian_noise(img, 0.0, 3), img)


def test_noise_deterministic(rng):
    img = rng.random((8, 8, 3)).astype(np.float32)
    a = raster.add_gaussian_noise(img, 0.05, 42)
    b = raster.add_gaussian_noise(img, 0.05, 42)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, raster.add_gaussian_noise(img, 0.05, 43))


def test_noise_sample_std():
    img = raster.constant_image(512, 512, 0.5)
    diff = raster.add_gaussian_noise(img, 0.01, 7).astype(np.float64) - 0.5
    assert abs(diff.std() - 0.01) / 0.01 < 0.05


def test_box_muller_moments():
    z = raster.standard_normal((200_000,), 5)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


def test_negative_sigma():
    with pytest.raises(InvalidParameterError):
        raster.add_gaussian_noise(np.zeros((2, 2, 1)), -0.1, 0)


@given(images(), st.floats(0, 0.5), st.integers(0, 2 ** 64 - 1))
def test_noise_stays_in_range(img, sigma, seed):
    out = raster.add_gaussian_noise(img, sigma, seed)
    assert out.min() >= 0 and out.max() <= 1


# ---------------------------------------------------------------- degradation

def test_degrade_identity(rng):
    img = rng.random((16, 12, 3)).astype(np.float32)
    spec = DegradationSpec(blur_length=1, scale_s=1, noise_sigma=0.0)
    assert np.array_equal(raster.degrade(img, spec), img)


def test_degrade_512_to_128():
    out = raster.degrade(np.zeros((512, 512, 3)), DegradationSpec(scale_s=4))
    assert out.shape == (128, 128, 3)


def test_degrade_floor_dims():
    out = raster.degrade(np.zeros((10, 7, 1)), DegradationSpec(scale_s=3))
    assert out.shape == (3, 2, 1)


def test_degrade_equals_manual_chain(rng):
    img = rng.random((40, 36, 3)).astype(np.float32)
    spec = DegradationSpec(blur_length=5, blur_angle=0.6, scale_s=3, noise_sigma=0.03, seed=99)
    manual = raster.convolve2d(img, raster.motion_psf(5, 0.6))
    manual = raster.bicubic_resize(manual, 13, 12)
    manual = raster.add_gaussian_noise(manual, 0.03, 99)
    assert raster.degrade(img, spec).tobytes() == manual.tobytes()


def test_degrade_too_small():
    with pytest.raises(InvalidInputError):
        raster.degrade(np.zeros((3, 8, 1)), DegradationSpec(scale_s=4))


@given(images(min_side=4), st.integers(1, 4), st.floats(0, 0.1), st.integers(0, 1000))
def test_degrade_pure_and_clamped(img, s, sigma, seed):
    spec = DegradationSpec(scale_s=s, noise_sigma=sigma, seed=seed)
    a, b = raster.degrade(img, spec), raster.degrade(img, spec)
    assert a.tobytes() == b.tobytes()
    assert a.min() >= 0 and a.max() <= 1


# ---------------------------------------------------------------- dihedral

def _box_mask(box: Box, h: int, w: int) -> np.ndarray:
    m = np.zeros((h, w, 1), dtype=np.float32)
    m[int(box.y_min):int(box.y_max), int(box.x_min):int(box.x_max)] = 1
    return m


def test_dihedral_identity(rng):
    img = rng.random((5, 7, 3)).astype(np.float32)
    boxes = [Box(1, 1, 3, 4, 2)]
    out, ob = raster.dihedral_augment(img, boxes, 0)
    assert np.array_equal(out, img) and ob == boxes


def test_horizontal_flip_box():
    _, boxes = raster.dihedral_augment(np.zeros((60, 100, 1)), [Box(10, 20, 30, 40)], 4)
    assert boxes[0].as_tuple() == (70, 20, 90, 40)


@pytest.mark.parametrize("op", range(8))
def test_box_transform_matches_pixel_transform(op):
    # oracle: transform a rasterized box mask, read its bounds back
    h, w = 11, 17
    box = Box(2, 3, 9, 7)
    mask_out, (b,) = raster.dihedral_augment(_box_mask(box, h, w), [box], op)
    rows = np.nonzero(mask_out[:, :, 0].any(axis=1))[0]
    cols = np.nonzero(mask_out[:, :, 0].any(axis=0))[0]
    assert b.as_tuple() == (cols[0], rows[0], cols[-1] + 1, rows[-1] + 1)


def test_op_out_of_range():
    with pytest.raises(InvalidParameterError):
        raster.dihedral_augment(np.zeros((4, 4, 1)), [], 8)


@given(images(min_side=2), st.integers(0, 7), st.data())
def test_dihedral_inverse(img, op, data):
    h, w = img.shape[:2]
    x0 = data.draw(st.integers(0, w - 1))
    y0 = data.draw(st.integers(0, h - 1))
    x1 = data.draw(st.integers(x0 + 1, w))
    y1 = data.draw(st.integers(y0 + 1, h))
    boxes = [Box(x0, y0, x1, y1, 1)]
    out, ob = raster.dihedral_augment(img, boxes, op)
    back, bb = raster.dihedral_augment(out, ob, raster.DIHEDRAL_INVERSE[op])
    assert np.array_equal(back, img)
    assert bb == boxes
    for b in ob:
        assert 0 <= b.x_min < b.x_max <= out.shape[1]
        assert 0 <= b.y_min < b.y_max <= out.shape[0]


def test_augment_factor_30(rng):
    img = rng.random((64, 64, 3)).astype(np.float32)
    boxes = [Box(10, 10, 20, 30, 0), Box(40, 40, 60, 50, 3)]
    variants = raster.augment(img, boxes, factor=30, crop=48, seed=1)
    assert len(variants) == 30
    assert all(v[0].shape == (64, 64, 3) for v in variants[:8])
    assert all(v[0].shape == (48, 48, 3) for v in variants[8:])
    again = raster.augment(img, boxes, factor=30, crop=48, seed=1)
    assert all(np.array_equal(a[0], b[0]) and a[1] == b[1] for a, b in zip(variants, again))


# ---------------------------------------------------------------- PNG I/O

def test_png_round_trip(tmp_path, rng):
    q = rng.integers(0, 256, (9, 11, 3))
    img = (q / 255.0).astype(np.float32)
    raster.write_png(tmp_path / "a.png", img)
    back = raster.read_png(tmp_path / "a.png")
    assert np.array_equal(np.rint(back.astype(np.float64) * 255).astype(int), q)
    gray = (rng.integers(0, 256, (5, 4, 1)) / 255.0).astype(np.float32)
    raster.write_png(tmp_path / "g.png", gray)
    assert np.array_equal(raster.read_png(tmp_path / "g.png"), gray)
