"""Reconstruction fidelity: MSE, PSNR and SSIM."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidParameterError, ShapeError


@dataclass(frozen=True)
class SsimParams:
    """SSIM constants and window.

    ``window`` is ``"gaussian"`` (mean of per-window SSIM over every valid
    window position, the usual MSSIM protocol) or ``"global"`` (one SSIM
    from whole-image statistics).
    """
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    window: str = "gaussian"
    size: int = 11
    sigma: float = 1.5

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @classmethod
    def eight_bit(cls, **kw) -> "SsimParams":
        return cls(dynamic_range=255.0, **kw)


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr_db: float
    ssim: float
    ssim_window: str = "gaussian"

    def to_json(self) -> dict:
        return {"mse": self.mse, "psnr_db": encode_db(self.psnr_db),
                "ssim": self.ssim, "ssim_window": self.ssim_window}


def encode_db(v: float):
    return "inf" if math.isinf(v) else v


def decode_db(v) -> float:
    return math.inf if v == "inf" else float(v)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, max_i: float = 1.0) -> float:
    if max_i <= 0:
        raise InvalidParameterError("max_i must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_i * max_i / err)


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = (size - 1) / 2.0
    x = np.arange(size) - r
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _ssim_formula(mu_a, mu_b, var_a, var_b, cov, c1, c2):
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable weighted sum over every window that fits entirely inside x
    k = g.size
    rows = sliding_window_view(x, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim(a, b, params: SsimParams = SsimParams()) -> float:
    a, b = _pair(a, b)
    c1, c2 = params.c1, params.c2
    scores = []
    if params.window == "global":
        for ch in range(a.shape[2]):
            x, y = a[:, :, ch], b[:, :, ch]
            mx, my = x.mean(), y.mean()
            cov = ((x - mx) * (y - my)).mean()
            scores.append(_ssim_formula(mx, my, x.var(), y.var(), cov, c1, c2))
        return float(np.mean(scores))
    if params.window != "gaussian":
        raise InvalidParameterError(f"unknown SSIM window {params.window!r}")
    if params.size > min(a.shape[:2]):
        raise InvalidParameterError(f"SSIM window {params.size} larger than image {a.shape[:2]}")
    g = gaussian_window(params.size, params.sigma)
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx, my = _filter_valid(x, g), _filter_valid(y, g)
        vx = _filter_valid(x * x, g) - mx * mx
        vy = _filter_valid(y * y, g) - my * my
        cov = _filter_valid(x * y, g) - mx * my
        scores.append(_ssim_formula(mx, my, vx, vy, cov, c1, c2).mean())
    return float(np.mean(scores))


def quality_report(reference, test, max_i: float = 1.0,
                   params: SsimParams = SsimParams()) -> QualityReport:
    return QualityReport(mse(reference, test), psnr(reference, test, max_i),
                         ssim(reference, test, params), params.window)
