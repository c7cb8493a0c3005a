"""Image buffers, the motion-blur degradation operator, and dihedral augmentation.

Images are ``float32`` numpy arrays of shape ``(height, width, channels)``
with samples in ``[0, 1]``. Every public function returns a fresh array and
clamps its output. Borders are handled by reflection without edge
duplication (``d c b | a b c d | c b a``) for both convolution and
resampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .boxes import Box
from .errors import (InvalidInputError, InvalidKernelError,
                     InvalidParameterError)

DTYPE = np.float32
U64_MASK = (1 << 64) - 1


def as_image(array) -> np.ndarray:
    """Coerce to a contiguous float32 ``(H, W, C)`` array; 2-D input gets C=1."""
    img = np.asarray(array, dtype=DTYPE)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise InvalidInputError(f"expected (H, W, 1|3) image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise InvalidInputError("empty image")
    return np.ascontiguousarray(img)


def clamp(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0).astype(DTYPE, copy=False)


def constant_image(height: int, width: int, value: float, channels: int = 1) -> np.ndarray:
    return np.full((height, width, channels), value, dtype=DTYPE)


# --------------------------------------------------------------------------
# PNG I/O: v/255 on read, round(v*255) on write.

def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        data = np.asarray(im, dtype=np.uint8)
    return as_image(data.astype(np.float64) / 255.0)


def write_png(path, image: np.ndarray) -> None:
    img = as_image(image)
    q = np.rint(np.clip(img.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    if q.shape[2] == 1:
        pil = Image.fromarray(q[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(q, mode="RGB")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")


# --------------------------------------------------------------------------
# Convolution and the motion PSF

def convolve2d(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-channel 2-D convolution with reflect borders; same output size."""
    img = as_image(image)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise InvalidKernelError(f"kernel must be 2-D with odd sides, got {k.shape}")
    src = img.astype(np.float64)
    out = np.empty_like(src)
    for c in range(src.shape[2]):
        # scipy's "mirror" mode is reflection without edge duplication
        out[:, :, c] = ndimage.convolve(src[:, :, c], k, mode="mirror")
    return clamp(out)


def delta_kernel() -> np.ndarray:
    return np.ones((1, 1), dtype=np.float64)


def motion_psf(length: float, angle: float) -> np.ndarray:
    """Rasterize a centered line segment of ``length`` px at ``angle`` radians.

    ``ceil(length)`` points are spaced evenly along the segment (about one
    per pixel) and splatted bilinearly, so the kernel is point-symmetric and
    an axis-aligned integer length gives a flat box of ``1/length`` taps.
    Angle is measured counter-clockwise from the +x axis with y pointing down.
    """
    if not length >= 1:
        raise InvalidParameterError(f"blur length must be >= 1, got {length}")
    n = max(1, math.ceil(length - 1e-9))
    half = (length - 1.0) / 2.0
    t = np.linspace(-half, half, n) if n > 1 else np.zeros(1)
    xs = t * math.cos(angle)
    ys = -t * math.sin(angle)
    # snap float noise so that exact lattice points splat into one cell
    xs = np.where(np.abs(xs - np.rint(xs)) < 1e-9, np.rint(xs), xs)
    ys = np.where(np.abs(ys - np.rint(ys)) < 1e-9, np.rint(ys), ys)
    r = int(math.ceil(max(np.abs(xs).max(), np.abs(ys).max()))) + 1
    size = 2 * r + 1
    k = np.zeros((size, size), dtype=np.float64)
    for x, y in zip(xs, ys):
        x0, y0 = math.floor(x), math.floor(y)
        fx, fy = x - x0, y - y0
        for dy, wy in ((0, 1.0 - fy), (1, fy)):
            for dx, wx in ((0, 1.0 - fx), (1, fx)):
                w = wy * wx
                if w > 0.0:
                    k[r + y0 + dy, r + x0 + dx] += w
    nz_r = np.nonzero(k.sum(axis=1) > 1e-15)[0]
    nz_c = np.nonzero(k.sum(axis=0) > 1e-15)[0]
    hr = max(r - nz_r[0], nz_r[-1] - r)
    hc = max(r - nz_c[0], nz_c[-1] - r)
    k = k[r - hr:r + hr + 1, r - hc:r + hc + 1]
    return k / k.sum()


# --------------------------------------------------------------------------
# Bicubic (Catmull-Rom) resampling

def _catmull_rom(t: np.ndarray) -> np.ndarray:
    a = -0.5
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx > n - 1, period - idx, idx)


def resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` matrix of Catmull-Rom weights with pixel-center alignment."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src)
    frac = src - base
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    for off in (-1, 0, 1, 2):
        w = _catmull_rom(frac - off)
        cols = reflect_index((base + off).astype(np.int64), n_in)
        np.add.at(mat, (rows, cols), w)
    return mat


def bicubic_resize(image: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    img = as_image(image)
    if out_height < 1 or out_width < 1:
        raise InvalidParameterError(f"output size must be >= 1, got {out_height}x{out_width}")
    h, w, _ = img.shape
    if (h, w) == (out_height, out_width):
        return img.copy()
    mh = resample_matrix(h, out_height)
    mw = resample_matrix(w, out_width)
    src = img.astype(np.float64)
    out = np.einsum("oh,hwc->owc", mh, src, optimize=True)
    out = np.einsum("pw,owc->opc", mw, out, optimize=True)
    return clamp(out)


# --------------------------------------------------------------------------
# Noise

def standard_normal(shape, seed: int) -> np.ndarray:
    """Seeded N(0, 1) samples: PCG64 uniforms through the Box-Muller transform.

    For ``n`` samples, ``m = ceil(n/2)`` pairs ``(u1, u2)`` are drawn as two
    consecutive blocks of ``m`` doubles; the cosine branch fills the first
    ``m`` outputs and the sine branch the rest, truncated to ``n``.
    """
    n = int(np.prod(shape))
    m = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(int(seed) & U64_MASK))
    u1 = rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
    return z.reshape(shape)


def add_gaussian_noise(image: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    img = as_image(image)
    if sigma < 0:
        raise InvalidParameterError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    return clamp(img.astype(np.float64) + sigma * standard_normal(img.shape, seed))


# --------------------------------------------------------------------------
# Degradation model: g = (f * h) downsampled bicubically by s, plus noise

@dataclass(frozen=True)
class DegradationSpec:
    blur_length: float = 3.0
    blur_angle: float = 0.0
    scale_s: int = 4
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.blur_length < 1:
            raise InvalidParameterError("blur_length must be >= 1")
        if int(self.scale_s) != self.scale_s or self.scale_s < 1:
            raise InvalidParameterError("scale_s must be an integer >= 1")
        if self.noise_sigma < 0:
            raise InvalidParameterError("noise_sigma must be >= 0")

    def psf(self) -> np.ndarray:
        return motion_psf(self.blur_length, self.blur_angle)


def degrade(hr: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    img = as_image(hr)
    s = int(spec.scale_s)
    h, w, _ = img.shape
    if h < s or w < s:
        raise InvalidInputError(f"image {h}x{w} smaller than scale factor {s}")
    blurred = convolve2d(img, spec.psf())
    small = bicubic_resize(blurred, h // s, w // s)
    return add_gaussian_noise(small, spec.noise_sigma, spec.seed)


# --------------------------------------------------------------------------
# Dihedral group of order 8

DIHEDRAL_NAMES = ("identity", "rot90", "rot180", "rot270",
                  "flip_lr", "flip_ud", "transpose", "anti_transpose")
DIHEDRAL_INVERSE = (0, 3, 2, 1, 4, 5, 6, 7)


def _dihedral_array(a: np.ndarray, op_id: int) -> np.ndarray:
    if op_id == 0:
        out = a
    elif op_id in (1, 2, 3):
        out = np.rot90(a, k=op_id, axes=(0, 1))
    elif op_id == 4:
        out = a[:, ::-1]
    elif op_id == 5:
        out = a[::-1]
    elif op_id == 6:
        out = np.swapaxes(a, 0, 1)
    else:
        out = np.swapaxes(a[::-1, ::-1], 0, 1)
    return np.ascontiguousarray(out)


def _dihedral_point(x: float, y: float, w: float, h: float, op_id: int) -> tuple[float, float]:
    # (x, y) continuous coords in a w-wide, h-tall canvas
    return (
        (x, y),
        (y, w - x),
        (w - x, h - y),
        (h - y, x),
        (w - x, y),
        (x, h - y),
        (y, x),
        (h - y, w - x),
    )[op_id]


def dihedral_box(box: Box, width: float, height: float, op_id: int) -> Box:
    x0, y0 = _dihedral_point(box.x_min, box.y_min, width, height, op_id)
    x1, y1 = _dihedral_point(box.x_max, box.y_max, width, height, op_id)
    return Box(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1), box.class_id)


def dihedral_augment(image: np.ndarray, boxes: Sequence[Box], op_id: int
                     ) -> tuple[np.ndarray, list[Box]]:
    """Apply the ``op_id``-th symmetry (see ``DIHEDRAL_NAMES``) to image and boxes.

    Odd rotations and the two transposes swap height and width.
    """
    if not isinstance(op_id, (int, np.integer)) or not 0 <= op_id < 8:
        raise InvalidParameterError(f"op_id must be in 0..7, got {op_id}")
    img = as_image(image)
    h, w = img.shape[:2]
    return (_dihedral_array(img, int(op_id)),
            [dihedral_box(b, w, h, int(op_id)) for b in boxes])


def augment(image: np.ndarray, boxes: Sequence[Box], factor: int, crop: int,
            seed: int, min_visible: float = 0.5) -> list[tuple[np.ndarray, list[Box]]]:
    """Expand one annotated tile into ``factor`` variants.

    The first ``min(factor, 8)`` variants are the dihedral images of the whole
    tile. Any further variants are seeded ``crop x crop`` windows, each under
    a random dihedral op; boxes are clipped to the window and dropped when
    less than ``min_visible`` of their area survives.
    """
    img = as_image(image)
    h, w = img.shape[:2]
    if factor < 1:
        raise InvalidParameterError("factor must be >= 1")
    if crop > min(h, w) or crop < 1:
        raise InvalidParameterError(f"crop {crop} does not fit {h}x{w}")
    out = [dihedral_augment(img, boxes, k) for k in range(min(factor, 8))]
    rng = np.random.default_rng(int(seed) & U64_MASK)
    for _ in range(factor - len(out)):
        r0 = int(rng.integers(0, h - crop + 1))
        c0 = int(rng.integers(0, w - crop + 1))
        op = int(rng.integers(0, 8))
        window = img[r0:r0 + crop, c0:c0 + crop]
        kept = []
        for b in boxes:
            x0, x1 = max(b.x_min, c0), min(b.x_max, c0 + crop)
            y0, y1 = max(b.y_min, r0), min(b.y_max, r0 + crop)
            if x0 < x1 and y0 < y1 and (x1 - x0) * (y1 - y0) >= min_visible * b.area:
                kept.append(Box(x0 - c0, y0 - r0, x1 - c0, y1 - r0, b.class_id))
        out.append(dihedral_augment(window, kept, op))
    return out
