"""Three-layer pre-upsampling SR network trained with L1 loss and Adam.

Layout (channels ``C`` in {1, 3})::

    9x9 conv C->64, ReLU  ->  5x5 conv 64->32, ReLU  ->  5x5 conv 32->C

Every convolution is "same"-sized with reflect padding. Inputs are LR images
already upsampled bicubically to the target size. Training runs in float64;
checkpoints store float32.

Checkpoint binary layout (little endian)::

    magic   8 bytes  b"RLSRNET\\0"
    version u32      1
    channels u32
    n_layers u32     3
    per layer:
        kh, kw, c_in, c_out   u32 x 4
        weights  float32[kh*kw*c_in*c_out]   row-major (kh, kw, c_in, c_out)
        biases   float32[c_out]

A JSON sidecar ``<checkpoint>.json`` carries the training config and loss history.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError, InvalidParameterError, ShapeError
from .raster import (DTYPE, U64_MASK, DegradationSpec, as_image, bicubic_resize,
                     clamp, degrade, reflect_index)

MAGIC = b"RLSRNET\0"
VERSION = 1
HIDDEN = (64, 32)
KERNELS = (9, 5, 5)
# caps the im2col scratch buffer at roughly this many elements
_CHUNK_ELEMENTS = 1 << 22


@dataclass
class SrNetwork:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def channels(self) -> int:
        return self.weights[0].shape[2]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    @classmethod
    def from_params(cls, params: Sequence[np.ndarray]) -> "SrNetwork":
        n = len(params) // 2
        return cls(list(params[:n]), list(params[n:]))

    def copy(self) -> "SrNetwork":
        return SrNetwork.from_params([p.copy() for p in self.params()])


@dataclass
class TrainConfig:
    max_epochs: int = 300
    batch_size: int = 16
    initial_lr: float = 1e-4
    lr_halving_period_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("max_epochs", "batch_size", "lr_halving_period_epochs"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be positive")
        if not self.initial_lr > 0:
            raise InvalidParameterError("initial_lr must be positive")

    def lr_at(self, epoch: int) -> float:
        return self.initial_lr * 0.5 ** (epoch // self.lr_halving_period_epochs)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p, dtype=np.float64) for p in params],
                   [np.zeros_like(p, dtype=np.float64) for p in params])


def init_network(channels: int, seed: int) -> SrNetwork:
    """He-normal weights (std ``sqrt(2/fan_in)``) and zero biases."""
    if channels not in (1, 3):
        raise InvalidParameterError(f"channels must be 1 or 3, got {channels}")
    rng = np.random.Generator(np.random.PCG64(int(seed) & U64_MASK))
    dims = (channels, *HIDDEN, channels)
    weights, biases = [], []
    for k, cin, cout in zip(KERNELS, dims[:-1], dims[1:]):
        std = np.sqrt(2.0 / (k * k * cin))
        weights.append(rng.standard_normal((k, k, cin, cout)) * std)
        biases.append(np.zeros(cout))
    return SrNetwork(weights, biases)


# --------------------------------------------------------------------------
# convolution primitives on (N, H, W, C) batches

def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    rows = reflect_index(np.arange(-p, x.shape[1] + p), x.shape[1])
    cols = reflect_index(np.arange(-p, x.shape[2] + p), x.shape[2])
    return x[:, rows][:, :, cols]


def _pad_adjoint(g: np.ndarray, p: int, h: int, w: int) -> np.ndarray:
    if p == 0:
        return g
    rows = reflect_index(np.arange(-p, h + p), h)
    cols = reflect_index(np.arange(-p, w + p), w)
    tmp = np.zeros((g.shape[0], g.shape[1], w, g.shape[3]), dtype=g.dtype)
    np.add.at(tmp, (slice(None), slice(None), cols), g)
    out = np.zeros((g.shape[0], h, w, g.shape[3]), dtype=g.dtype)
    np.add.at(out, (slice(None), rows), tmp)
    return out


def _row_block(width: int, n_cols: int) -> int:
    return max(1, _CHUNK_ELEMENTS // max(1, width * n_cols))


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    kh, kw, cin, cout = w.shape
    n, h, wd, _ = x.shape
    win = sliding_window_view(_pad(x, kh // 2), (kh, kw), axis=(1, 2))
    wm = w.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)
    out = np.empty((n, h, wd, cout), dtype=x.dtype)
    step = _row_block(wd, wm.shape[0])
    for i in range(n):
        for r0 in range(0, h, step):
            cols = win[i, r0:r0 + step].reshape(-1, wm.shape[0])
            out[i, r0:r0 + step] = (cols @ wm + b).reshape(-1, wd, cout)
    return out


def conv_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray, need_input_grad: bool = True):
    """Gradients of a same-size reflect-padded convolution.

    Returns ``(dx or None, dw, db)``.
    """
    kh, kw, cin, cout = w.shape
    n, h, wd, _ = x.shape
    p = kh // 2
    xp = _pad(x, p)
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    wm = w.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)
    # tap-major layout keeps each (dy, dx) slice of the column gradient contiguous
    wt = w.reshape(kh * kw * cin, cout).T if need_input_grad else None
    dwm = np.zeros_like(wm)
    dxp = np.zeros_like(xp) if need_input_grad else None
    step = _row_block(wd, wm.shape[0])
    for i in range(n):
        for r0 in range(0, h, step):
            r1 = min(h, r0 + step)
            cols = win[i, r0:r1].reshape(-1, wm.shape[0])
            g = dout[i, r0:r1].reshape(-1, cout)
            dwm += cols.T @ g
            if need_input_grad:
                dcols = (g @ wt).reshape(r1 - r0, wd, kh, kw, cin)
                for dy in range(kh):
                    for dx in range(kw):
                        dxp[i, r0 + dy:r1 + dy, dx:dx + wd] += dcols[:, :, dy, dx]
    dw = dwm.reshape(cin, kh, kw, cout).transpose(1, 2, 0, 3)
    db = dout.sum(axis=(0, 1, 2))
    dx = _pad_adjoint(dxp, p, h, wd) if need_input_grad else None
    return dx, dw, db


def _forward_cached(net: SrNetwork, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = conv_forward(a, w.astype(x.dtype, copy=False), b.astype(x.dtype, copy=False))
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        if i != last:
            acts.append(a)
    return a, acts, pre


def forward_batch(net: SrNetwork, x: np.ndarray) -> np.ndarray:
    """Unclamped network output for a ``(N, H, W, C)`` batch, in ``x``'s dtype."""
    if x.ndim != 4 or x.shape[3] != net.channels:
        raise ShapeError(f"batch shape {x.shape} incompatible with {net.channels}-channel net")
    return _forward_cached(net, x)[0]


def forward(net: SrNetwork, image: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Inference on one image; output is clamped to [0, 1]."""
    img = as_image(image)
    if img.shape[2] != net.channels:
        raise ShapeError(f"image has {img.shape[2]} channels, network expects {net.channels}")
    out = forward_batch(net, img[None].astype(dtype))[0]
    return clamp(out)


def loss_and_grad(net: SrNetwork, lr_batch: np.ndarray, hr_batch: np.ndarray
                  ) -> tuple[float, list[np.ndarray]]:
    """Mean absolute error and its gradient for every weight and bias.

    Gradients come back in :meth:`SrNetwork.params` order. The L1
    subgradient at a zero residual is 0.
    """
    x = np.asarray(lr_batch, dtype=np.float64)
    t = np.asarray(hr_batch, dtype=np.float64)
    if x.shape != t.shape or x.ndim != 4 or x.shape[3] != net.channels:
        raise ShapeError(f"inconsistent batch shapes {x.shape} / {t.shape}")
    y, acts, pre = _forward_cached(net, x)
    resid = y - t
    loss = float(np.abs(resid).mean())
    grad = np.sign(resid) / resid.size
    n_layers = len(net.weights)
    dws, dbs = [None] * n_layers, [None] * n_layers
    for i in reversed(range(n_layers)):
        if i != n_layers - 1:
            grad = grad * (pre[i] > 0)
        dx, dws[i], dbs[i] = conv_backward(acts[i], net.weights[i], grad, need_input_grad=i > 0)
        grad = dx
    return loss, [*dws, *dbs]


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new arrays and mutates ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter, gradient and state lists differ in length")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.m[i].shape:
            raise ShapeError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state


@dataclass
class TrainResult:
    net: SrNetwork
    loss_history: list[float] = field(default_factory=list)
    lr_history: list[float] = field(default_factory=list)


def train(net: SrNetwork, pairs: Sequence[tuple[np.ndarray, np.ndarray]], config: TrainConfig,
          log: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Minibatch Adam on (upsampled LR, HR) pairs with a seeded per-epoch shuffle."""
    if not pairs:
        raise InvalidInputError("empty training set")
    x = np.stack([as_image(a) for a, _ in pairs]).astype(np.float64)
    y = np.stack([as_image(b) for _, b in pairs]).astype(np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"LR batch {x.shape} does not match HR batch {y.shape}")
    rng = np.random.Generator(np.random.PCG64(int(config.seed) & U64_MASK))
    params = [p.astype(np.float64) for p in net.params()]
    state = AdamState.zeros_like(params)
    result = TrainResult(net)
    n = len(x)
    for epoch in range(config.max_epochs):
        lr = config.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(SrNetwork.from_params(params), x[idx], y[idx])
            params, state = adam_step(params, grads, state, lr)
            total += loss * len(idx)
        result.loss_history.append(total / n)
        result.lr_history.append(lr)
        if log is not None:
            log(epoch, total / n, lr)
    result.net = SrNetwork.from_params(params)
    return result


# --------------------------------------------------------------------------
# reconstruction entry point and pair construction

def super_resolve(method: str, lr_image: np.ndarray, s: int, net: SrNetwork | None = None
                  ) -> np.ndarray:
    """Upscale by integer factor ``s`` with ``"bicubic"`` or ``"network"``."""
    if int(s) != s or s < 1:
        raise InvalidParameterError(f"scale must be an integer >= 1, got {s}")
    img = as_image(lr_image)
    up = bicubic_resize(img, img.shape[0] * int(s), img.shape[1] * int(s))
    if method == "bicubic":
        return up
    if method == "network":
        if net is None:
            raise InvalidParameterError("network method needs a trained network")
        return forward(net, up)
    raise InvalidParameterError(f"unknown SR method {method!r}")


def make_pairs(hr_images: Sequence[np.ndarray], spec: DegradationSpec, l_sub: int,
               n_pairs: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Aligned ``l_sub x l_sub`` crops of (bicubic-upsampled LR, HR).

    Each HR image ``i`` is degraded whole with noise seed ``spec.seed + i``
    and upsampled back to ``s`` times the LR size before cropping.
    """
    s = int(spec.scale_s)
    ups, hrs = [], []
    for i, hr in enumerate(hr_images):
        hr = as_image(hr)
        lr = degrade(hr, DegradationSpec(spec.blur_length, spec.blur_angle, s,
                                         spec.noise_sigma, spec.seed + i))
        up = bicubic_resize(lr, lr.shape[0] * s, lr.shape[1] * s)
        if min(up.shape[:2]) < l_sub:
            raise InvalidInputError(f"image {i} too small for {l_sub}px crops")
        ups.append(up)
        hrs.append(hr[:up.shape[0], :up.shape[1]])
    rng = np.random.Generator(np.random.PCG64(int(seed) & U64_MASK))
    out = []
    for _ in range(n_pairs):
        i = int(rng.integers(len(ups)))
        h, w = ups[i].shape[:2]
        r = int(rng.integers(0, h - l_sub + 1))
        c = int(rng.integers(0, w - l_sub + 1))
        out.append((ups[i][r:r + l_sub, c:c + l_sub].copy(), hrs[i][r:r + l_sub, c:c + l_sub].copy()))
    return out


# --------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, net: SrNetwork, config: TrainConfig | None = None,
                    loss_history: Sequence[float] = (), extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, net.channels, len(net.weights)))
        for w, b in zip(net.weights, net.biases):
            f.write(struct.pack("<IIII", *w.shape))
            f.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    sidecar = {"format": "RLSRNET", "version": VERSION, "channels": net.channels,
               "layers": [list(w.shape) for w in net.weights],
               "config": asdict(config) if config is not None else None,
               "loss_history": [float(v) for v in loss_history]}
    if extra:
        sidecar.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_checkpoint(path) -> SrNetwork:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise InvalidInputError(f"{path}: not an SR network checkpoint")
    version, channels, n_layers = struct.unpack_from("<III", data, 8)
    if version != VERSION:
        raise InvalidInputError(f"{path}: unsupported checkpoint version {version}")
    off = 20
    weights, biases = [], []
    for _ in range(n_layers):
        kh, kw, cin, cout = struct.unpack_from("<IIII", data, off)
        off += 16
        n = kh * kw * cin * cout
        weights.append(np.frombuffer(data, "<f4", n, off).reshape(kh, kw, cin, cout).astype(np.float64))
        off += 4 * n
        biases.append(np.frombuffer(data, "<f4", cout, off).astype(np.float64))
        off += 4 * cout
    net = SrNetwork(weights, biases)
    if net.channels != channels:
        raise InvalidInputError(f"{path}: channel count mismatch")
    return net
