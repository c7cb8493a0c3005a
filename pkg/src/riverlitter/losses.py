"""Detection training losses with closed-form gradients.

All arithmetic is double precision. Each loss returns a :class:`LossValueGrad`
whose ``grad`` is ordered like the loss's continuous inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .boxes import Box
from .errors import InvalidInputError, InvalidParameterError, NumericError, ShapeError

P_EPS = 1e-7
FOUR_OVER_PI2 = 4.0 / (math.pi ** 2)


@dataclass
class LossValueGrad:
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class EiouParams:
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")


def bce_loss(y, p) -> LossValueGrad:
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1 or y.size == 0:
        raise ShapeError(f"labels {y.shape} and probabilities {p.shape} must be equal 1-D")
    n = y.size
    pc = np.clip(p, P_EPS, 1.0 - P_EPS)
    value = -np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))
    grad = (pc - y) / (n * pc * (1.0 - pc))
    return LossValueGrad(float(value), grad)


def eiou_terms(pred: Box, gt: Box) -> dict[str, float]:
    """Individual loss terms, handy for inspection and invariance tests."""
    return _eiou(np.array(pred.as_tuple(), dtype=np.float64), gt, EiouParams(), terms=True)


def _eiou(b: np.ndarray, gt: Box, params: EiouParams, terms: bool = False):
    x1, y1, x2, y2 = b
    gx1, gy1, gx2, gy2 = (float(v) for v in gt.as_tuple())
    w, h = x2 - x1, y2 - y1
    gw, gh = gx2 - gx1, gy2 - gy1
    if w <= 0 or h <= 0:
        raise InvalidInputError("degenerate predicted box")

    # intersection / union
    ix1, ix2 = max(x1, gx1), min(x2, gx2)
    iy1, iy2 = max(y1, gy1), min(y2, gy2)
    iw, ih = ix2 - ix1, iy2 - iy1
    overlap = iw > 0 and ih > 0
    inter = iw * ih if overlap else 0.0
    area_p, area_g = w * h, gw * gh
    union = area_p + area_g - inter
    iou = inter / union

    d_inter = np.zeros(4)
    if overlap:
        d_inter[0] = -ih if x1 > gx1 else 0.0
        d_inter[2] = ih if x2 < gx2 else 0.0
        d_inter[1] = -iw if y1 > gy1 else 0.0
        d_inter[3] = iw if y2 < gy2 else 0.0
    d_area = np.array([-h, -w, h, w])
    d_union = d_area - d_inter
    d_iou = (d_inter * union - inter * d_union) / (union * union)

    # centre distance over enclosing diagonal
    dcx = (x1 + x2 - gx1 - gx2) / 2.0
    dcy = (y1 + y2 - gy1 - gy2) / 2.0
    rho2 = dcx * dcx + dcy * dcy
    d_rho2 = np.array([dcx, dcy, dcx, dcy])
    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    c2 = cw * cw + ch * ch
    d_cw = np.array([-1.0 if x1 < gx1 else 0.0, 0.0, 1.0 if x2 > gx2 else 0.0, 0.0])
    d_ch = np.array([0.0, -1.0 if y1 < gy1 else 0.0, 0.0, 1.0 if y2 > gy2 else 0.0])
    d_c2 = 2.0 * cw * d_cw + 2.0 * ch * d_ch
    dist = rho2 / c2
    d_dist = (d_rho2 * c2 - rho2 * d_c2) / (c2 * c2)

    # aspect-ratio consistency
    delta = math.atan(gw / gh) - math.atan(w / h)
    v = FOUR_OVER_PI2 * delta * delta
    r2 = w * w + h * h
    dv_dw = FOUR_OVER_PI2 * 2.0 * delta * -(h / r2)
    dv_dh = FOUR_OVER_PI2 * 2.0 * delta * (w / r2)
    d_v = np.array([-dv_dw, -dv_dh, dv_dw, dv_dh])

    # area-scale penalty
    q = (area_p - area_g) / c2
    s_term = q * q
    d_s = 2.0 * q * (d_area * c2 - (area_p - area_g) * d_c2) / (c2 * c2)

    if terms:
        return {"iou": iou, "distance": dist, "aspect": v, "scale": s_term}
    value = 1.0 - iou + dist + params.alpha * v + params.beta * s_term
    grad = -d_iou + d_dist + params.alpha * d_v + params.beta * d_s
    return value, grad


def eiou_loss(pred: Box, gt: Box, params: EiouParams = EiouParams()) -> LossValueGrad:
    """``1 - IoU + rho^2/c^2 + alpha*v + beta*s`` and its gradient w.r.t. pred.

    ``v`` is the CIoU aspect term ``4/pi^2 (atan(w_gt/h_gt) - atan(w/h))^2``;
    ``s`` is ``((area_pred - area_gt) / c^2)^2``. Gradient order is
    ``(x_min, y_min, x_max, y_max)``; at exact ties of min/max the branch
    belonging to the ground-truth box is taken.
    """
    value, grad = _eiou(np.array(pred.as_tuple(), dtype=np.float64), gt, params)
    return LossValueGrad(float(value), grad)


def eiou_fn(gt: Box, params: EiouParams = EiouParams()) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """EIoU as a function of the raw prediction vector, for gradient checks."""
    return lambda x: _eiou(np.asarray(x, dtype=np.float64), gt, params)


def total_loss(bce: LossValueGrad, eiou: LossValueGrad,
               lambda1: float = 1.0, lambda2: float = 1.0) -> LossValueGrad:
    if not (math.isfinite(lambda1) and math.isfinite(lambda2)):
        raise InvalidParameterError("loss weights must be finite")
    return LossValueGrad(lambda1 * bce.value + lambda2 * eiou.value,
                         np.concatenate([lambda1 * bce.grad, lambda2 * eiou.grad]))


def grad_check(fn: Callable[[np.ndarray], tuple[float, np.ndarray]], x, h: float = 1e-6) -> float:
    """Max relative error between ``fn``'s analytic gradient and central differences.

    ``fn`` maps a vector to ``(value, grad)``. The relative error of each
    component uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    if h <= 0:
        raise InvalidParameterError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    value, analytic = fn(x)
    if not np.isfinite(value):
        raise NumericError("function value is not finite")
    analytic = np.asarray(analytic, dtype=np.float64).reshape(x.shape)
    worst = 0.0
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = fn(xp)[0], fn(xm)[0]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite value while probing index {i}")
        numeric = (fp - fm) / (2.0 * h)
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
