"""Independent reference implementations used as test oracles.

Each is written from the defining formula with plain loops or numpy
primitives and shares no code with the package under test.
"""
import math

import numpy as np

from riverlitter.boxes import Box, Detection


def mse_oracle(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    total = 0.0
    for x, y in zip(a, b):
        total += (x - y) * (x - y)
    return total / a.size


def psnr_oracle(a, b, max_i=1.0):
    m = mse_oracle(a, b)
    return math.inf if m == 0 else 10.0 * math.log10(max_i * max_i / m)


def ssim_window_oracle(a, b, size=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    r = np.arange(size) - (size - 1) / 2
    g1 = np.exp(-r ** 2 / (2 * sigma ** 2))
    w = np.outer(g1, g1)
    w /= w.sum()
    per_channel = []
    for ch in range(a.shape[2]):
        vals = []
        for i in range(a.shape[0] - size + 1):
            for j in range(a.shape[1] - size + 1):
                x = a[i:i + size, j:j + size, ch]
                y = b[i:i + size, j:j + size, ch]
                mx, my = (w * x).sum(), (w * y).sum()
                vx = (w * (x - mx) ** 2).sum()
                vy = (w * (y - my) ** 2).sum()
                cxy = (w * (x - mx) * (y - my)).sum()
                vals.append(((2 * mx * my + c1) * (2 * cxy + c2))
                            / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
        per_channel.append(np.mean(vals))
    return float(np.mean(per_channel))


def iou_oracle(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def ap_bruteforce(dets, gts, thresh=0.5):
    """Precision/recall at every confidence threshold, then the precision envelope."""
    points = []
    for t in sorted({d.confidence for d in dets}, reverse=True):
        kept = sorted((d for d in dets if d.confidence >= t),
                      key=lambda d: (-d.confidence, d.box.x_min, d.box.y_min))
        free = [g.as_tuple() for g in gts]
        tp = 0
        for d in kept:
            scores = [iou_oracle(d.box.as_tuple(), g) if g is not None else -1 for g in free]
            if scores and max(scores) >= thresh:
                free[int(np.argmax(scores))] = None
                tp += 1
        points.append((tp / len(gts), tp / len(kept)))
    ap, prev = 0.0, 0.0
    for r in sorted({r for r, _ in points}):
        if r == 0:
            continue
        p_interp = max(p for rr, p in points if rr >= r)
        ap += (r - prev) * p_interp
        prev = r
    return ap


def random_fixture(rng, max_dets=6, max_gts=4):
    def box():
        x, y = rng.uniform(0, 20, 2)
        w, h = rng.uniform(2, 10, 2)
        return Box(x, y, x + w, y + h)
    gts = [box() for _ in range(rng.integers(1, max_gts + 1))]
    dets = []
    for _ in range(rng.integers(0, max_dets + 1)):
        if gts and rng.random() < 0.6:
            g = gts[rng.integers(len(gts))]
            j = rng.uniform(-1.5, 1.5, 4)
            b = Box(g.x_min + j[0], g.y_min + j[1], g.x_max + abs(j[2]) + 0.1, g.y_max + abs(j[3]) + 0.1)
        else:
            b = box()
        dets.append(Detection(b, float(rng.random())))
    return dets, gts


def eiou_oracle(p, g, alpha=1.0, beta=0.0):
    """Term-by-term evaluation of 1 - IoU + rho^2/c^2 + alpha*v + beta*s."""
    iw = max(0.0, min(p[2], g[2]) - max(p[0], g[0]))
    ih = max(0.0, min(p[3], g[3]) - max(p[1], g[1]))
    ap = (p[2] - p[0]) * (p[3] - p[1])
    ag = (g[2] - g[0]) * (g[3] - g[1])
    iou = iw * ih / (ap + ag - iw * ih)
    rho2 = ((p[0] + p[2]) / 2 - (g[0] + g[2]) / 2) ** 2 + ((p[1] + p[3]) / 2 - (g[1] + g[3]) / 2) ** 2
    c2 = (max(p[2], g[2]) - min(p[0], g[0])) ** 2 + (max(p[3], g[3]) - min(p[1], g[1])) ** 2
    v = 4 / math.pi ** 2 * (math.atan((g[2] - g[0]) / (g[3] - g[1]))
                            - math.atan((p[2] - p[0]) / (p[3] - p[1]))) ** 2
    s = ((ap - ag) / c2) ** 2
    return 1 - iou + rho2 / c2 + alpha * v + beta * s


def smooth_box_pair(rng):
    """Random (pred vector, gt Box) with every min/max comparison at least 1e-2 from a tie."""
    while True:
        gx, gy = np.sort(rng.uniform(0, 10, 2)), np.sort(rng.uniform(0, 10, 2))
        px, py = np.sort(rng.uniform(0, 10, 2)), np.sort(rng.uniform(0, 10, 2))
        if min(gx[1] - gx[0], gy[1] - gy[0], px[1] - px[0], py[1] - py[0]) < 0.5:
            continue
        if np.abs(px[:, None] - gx[None, :]).min() < 1e-2 or np.abs(py[:, None] - gy[None, :]).min() < 1e-2:
            continue
        return np.array([px[0], py[0], px[1], py[1]]), Box(gx[0], gy[0], gx[1], gy[1])


def ref_forward(weights, biases, x):
    """Einsum convolution stack with numpy reflect padding; returns output and pre-activations."""
    a, pre = x, []
    for i, (w, b) in enumerate(zip(weights, biases)):
        k = w.shape[0]
        p = k // 2
        ap = np.pad(a, ((p, p), (p, p), (0, 0)), mode="reflect")
        h, wd = a.shape[:2]
        z = np.zeros((h, wd, w.shape[3])) + b
        for dy in range(k):
            for dx in range(k):
                z += np.einsum("hwc,cd->hwd", ap[dy:dy + h, dx:dx + wd], w[dy, dx])
        pre.append(z)
        a = z if i == len(weights) - 1 else np.maximum(z, 0)
    return a, pre


def network_fd_check(net, x, t, grads, rng, per_array=45, h=1e-5):
    """Central differences of the L1 loss for sampled parameters.

    Probes whose stencil flips any ReLU or residual sign are skipped, since
    the loss is not differentiable there. Returns (accepted, worst rel error).
    """
    params = net.params()
    n = len(params) // 2

    def probe(j, idx, delta):
        ps = [p.copy() for p in params]
        ps[j][idx] += delta
        y, pre = ref_forward(ps[:n], ps[n:], x)
        return y - t, pre

    base_r, base_pre = probe(0, (0,) * params[0].ndim, 0.0)
    accepted, worst = 0, 0.0
    for j, p in enumerate(params):
        for f in rng.choice(p.size, size=min(p.size, per_array), replace=False):
            idx = np.unravel_index(f, p.shape)
            rp, pre_p = probe(j, idx, h)
            rm, pre_m = probe(j, idx, -h)
            same = all(np.array_equal(a > 0, b > 0) and np.array_equal(a > 0, c > 0)
                       for a, b, c in zip(base_pre[:-1], pre_p[:-1], pre_m[:-1]))
            same = same and np.array_equal(np.sign(rp), np.sign(base_r)) \
                and np.array_equal(np.sign(rm), np.sign(base_r))
            if not same:
                continue
            numeric = np.mean(np.abs(rp) - np.abs(rm)) / (2 * h)
            analytic = grads[j][idx]
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
            accepted += 1
    return accepted, worst
