"""Seeded synthetic riverbed scenes with exact box annotations.

A scene is a value-noise riverbed wash with litter objects painted on top.
Bottles (plastic and glass) share one silhouette family and differ mostly
in colour; cans are short capsules with grey rims; bags are irregular
blobs. Every annotation is the tight bound of its object's visible pixels.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .boxes import CLASS_NAMES, Box
from .boxeval import iou
from .errors import InvalidParameterError, PlacementError
from .raster import DTYPE, U64_MASK, write_png
from . import schemas

MAX_REJECTIONS = 1000

# Rendered object colours (RGB in [0, 1]) before shading.
BODY_COLORS = {
    "plastic_bottle": (0.78, 0.86, 0.90),
    "glass_bottle": (0.08, 0.38, 0.16),
    "can": (0.72, 0.18, 0.20),
    "plastic_bag": (0.96, 0.95, 0.84),
}
PLASTIC_ALPHA = 0.85
GLASS_STRIPE = (0.55, 0.75, 0.60)
CAN_RIM = (0.62, 0.62, 0.64)


@dataclass(frozen=True)
class BackgroundParams:
    base_color: tuple[float, float, float] = (0.36, 0.34, 0.22)
    octaves: int = 4
    amplitude: float = 0.06
    cell: int = 64
    tint: tuple[float, float, float] = (1.0, 1.0, 0.7)


@dataclass(frozen=True)
class SceneConfig:
    canvas_height: int = 512
    canvas_width: int = 512
    object_count: int = 5
    class_weights: tuple[float, ...] = (0.3, 0.3, 0.25, 0.15)
    size_range: tuple[float, float] = (16.0, 64.0)
    background: BackgroundParams = field(default_factory=BackgroundParams)
    max_overlap_iou: float = 0.0
    spacing: int = 4

    def __post_init__(self):
        w = np.asarray(self.class_weights, dtype=np.float64)
        if w.size != len(CLASS_NAMES) or np.any(w < 0):
            raise InvalidParameterError("class_weights must be 4 nonnegative numbers")
        if self.object_count > 0 and w.sum() <= 0:
            raise InvalidParameterError("class_weights are all zero")
        if self.object_count < 0:
            raise InvalidParameterError("object_count must be >= 0")
        lo, hi = self.size_range
        if lo < 8 or hi < lo:
            raise InvalidParameterError(f"size_range {self.size_range} invalid (min >= 8)")
        if hi > min(self.canvas_height, self.canvas_width):
            raise InvalidParameterError("objects larger than the canvas")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "SceneConfig":
        doc = dict(doc)
        if "background" in doc:
            bg = dict(doc["background"])
            for k in ("base_color", "tint"):
                if k in bg:
                    bg[k] = tuple(bg[k])
            doc["background"] = BackgroundParams(**bg)
        for k in ("class_weights", "size_range"):
            if k in doc:
                doc[k] = tuple(doc[k])
        return cls(**doc)


@dataclass
class Scene:
    image: np.ndarray
    annotations: list[Box]
    seed: int


def class_prototypes(background: BackgroundParams = BackgroundParams()) -> dict[int, np.ndarray]:
    """Mean rendered colour per class id, as seen by the reference detector."""
    bg = np.asarray(background.base_color)
    out = {}
    for k, name in enumerate(CLASS_NAMES):
        c = np.asarray(BODY_COLORS[name])
        if name == "plastic_bottle":
            c = PLASTIC_ALPHA * c + (1.0 - PLASTIC_ALPHA) * bg
        out[k] = c
    return out


def value_noise(height: int, width: int, params: BackgroundParams,
                rng: np.random.Generator) -> np.ndarray:
    """Fractal value noise in roughly [-1, 1]: smoothstep-interpolated lattices."""
    total = np.zeros((height, width))
    norm = 0.0
    for o in range(params.octaves):
        cell = max(2.0, params.cell / 2 ** o)
        gh = int(math.ceil(height / cell)) + 2
        gw = int(math.ceil(width / cell)) + 2
        lattice = rng.random((gh, gw)) * 2.0 - 1.0
        y = (np.arange(height) + 0.5) / cell
        x = (np.arange(width) + 0.5) / cell
        y0, x0 = np.floor(y).astype(int), np.floor(x).astype(int)
        fy, fx = y - y0, x - x0
        fy, fx = fy * fy * (3 - 2 * fy), fx * fx * (3 - 2 * fx)
        top = lattice[y0][:, x0] * (1 - fx) + lattice[y0][:, x0 + 1] * fx
        bot = lattice[y0 + 1][:, x0] * (1 - fx) + lattice[y0 + 1][:, x0 + 1] * fx
        amp = 0.5 ** o
        total += amp * (top * (1 - fy[:, None]) + bot * fy[:, None])
        norm += amp
    return total / norm


def render_background(height: int, width: int, params: BackgroundParams,
                      rng: np.random.Generator) -> np.ndarray:
    n = value_noise(height, width, params, rng)
    base = np.asarray(params.base_color)
    tint = np.asarray(params.tint)
    return base + params.amplitude * n[:, :, None] * tint


# --------------------------------------------------------------------------
# object silhouettes; each returns (mask, colour image) on a local window

def _local_frame(size: int, angle: float, cx: float, cy: float):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xs + 0.5 - cx, ys + 0.5 - cy
    c, s = math.cos(angle), math.sin(angle)
    return dx * c + dy * s, -dx * s + dy * c


def _rounded_rect(u, v, u0, u1, half_w, radius):
    # signed distance <= 0 inside a rounded rectangle spanning [u0, u1] x [-half_w, half_w]
    cu = (u0 + u1) / 2
    qu = np.abs(u - cu) - ((u1 - u0) / 2 - radius)
    qv = np.abs(v) - (half_w - radius)
    outside = np.hypot(np.maximum(qu, 0), np.maximum(qv, 0))
    inside = np.minimum(np.maximum(qu, qv), 0)
    return outside + inside - radius <= 0


def _bottle(u, v, diag, rng):
    length = diag * 0.95
    width = length * rng.uniform(0.28, 0.36)
    neck = length * 0.22
    body = _rounded_rect(u, v, -length / 2, length / 2 - neck, width / 2, width * 0.35)
    neck_mask = (u >= length / 2 - neck - 1) & (u <= length / 2) & (np.abs(v) <= width * 0.2)
    stripe = body & (v > width * 0.08) & (v < width * 0.22)
    return body | neck_mask, stripe, width


def _can(u, v, diag, rng):
    length = diag * 0.85
    width = length * rng.uniform(0.5, 0.6)
    mask = _rounded_rect(u, v, -length / 2, length / 2, width / 2, width * 0.2)
    rim = mask & (np.abs(u) > length / 2 - length * 0.1)
    return mask, rim, width


def _bag(u, v, diag, rng):
    radius = diag / 2.7
    rho = np.hypot(u, v)
    phi = np.arctan2(v, u)
    r = np.ones_like(phi)
    for k in (2, 3, 4, 5):
        r += rng.uniform(0.0, 0.12) * np.cos(k * phi + rng.uniform(0, 2 * math.pi))
    return rho <= radius * r, None, radius


def _paint(name: str, diag: float, angle: float, rng: np.random.Generator):
    size = int(math.ceil(diag)) + 4
    c = size / 2.0
    u, v = _local_frame(size, angle, c, c)
    if name in ("plastic_bottle", "glass_bottle"):
        mask, accent, width = _bottle(u, v, diag, rng)
    elif name == "can":
        mask, accent, width = _can(u, v, diag, rng)
    else:
        mask, accent, width = _bag(u, v, diag, rng)
    body = np.asarray(BODY_COLORS[name])
    shade = 1.0 + 0.04 * np.clip(v / max(width, 1.0), -1, 1)
    color = body[None, None, :] * shade[:, :, None]
    if accent is not None:
        accent_color = GLASS_STRIPE if name == "glass_bottle" else CAN_RIM
        if name != "plastic_bottle":
            color[accent] = accent_color
    return mask, np.clip(color, 0.0, 1.0)


def _mask_box(mask: np.ndarray, r0: int, c0: int, class_id: int) -> Box | None:
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    if rows.size == 0:
        return None
    return Box(float(c0 + cols[0]), float(r0 + rows[0]),
               float(c0 + cols[-1] + 1), float(r0 + rows[-1] + 1), class_id)


def _expand(b: Box, m: float) -> Box:
    return Box(b.x_min - m, b.y_min - m, b.x_max + m, b.y_max + m, b.class_id)


def generate_scene(config: SceneConfig, seed: int) -> Scene:
    rng = np.random.Generator(np.random.PCG64(int(seed) & U64_MASK))
    H, W = config.canvas_height, config.canvas_width
    canvas = render_background(H, W, config.background, rng)
    labels = np.full((H, W), -1, dtype=np.int32)
    weights = np.asarray(config.class_weights, dtype=np.float64)
    classes: list[int] = []
    existing: list[Box] = []
    for obj in range(config.object_count):
        class_id = int(rng.choice(len(CLASS_NAMES), p=weights / weights.sum()))
        name = CLASS_NAMES[class_id]
        for _attempt in range(MAX_REJECTIONS):
            diag = rng.uniform(*config.size_range)
            angle = rng.uniform(0, math.pi)
            mask, color = _paint(name, diag, angle, rng)
            size = mask.shape[0]
            if size > H or size > W:
                continue
            r0 = int(rng.integers(0, H - size + 1))
            c0 = int(rng.integers(0, W - size + 1))
            cand = _mask_box(mask, r0, c0, class_id)
            if cand is None:
                continue
            if any(iou(cand, b) > config.max_overlap_iou
                   or iou(_expand(cand, config.spacing), b) > config.max_overlap_iou
                   for b in existing):
                continue
            window = labels[r0:r0 + size, c0:c0 + size]
            covered = np.unique(window[mask])
            if any(np.count_nonzero(labels == j) == np.count_nonzero(window[mask] == j)
                   for j in covered if j >= 0):
                continue  # would hide an earlier object completely
            break
        else:
            raise PlacementError(
                f"placed {len(classes)} of {config.object_count} objects", len(classes))
        region = canvas[r0:r0 + size, c0:c0 + size]
        if name == "plastic_bottle":
            color = PLASTIC_ALPHA * color + (1 - PLASTIC_ALPHA) * region
        region[mask] = color[mask]
        labels[r0:r0 + size, c0:c0 + size][mask] = obj
        classes.append(class_id)
        existing = [_mask_box(labels == j, 0, 0, classes[j]) for j in range(len(classes))]
    annotations = [_mask_box(labels == j, 0, 0, classes[j]) for j in range(len(classes))]
    image = np.clip(canvas, 0.0, 1.0).astype(DTYPE)
    return Scene(image, annotations, int(seed))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def generate_corpus(config: SceneConfig, n_scenes: int, base_seed: int, output_dir,
                    threads: int = 1) -> dict:
    """Write ``n_scenes`` PNG + annotation pairs and a manifest with SHA-256 digests."""
    if n_scenes < 1:
        raise InvalidParameterError("n_scenes must be >= 1")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(index: int) -> dict:
        seed = base_seed + index
        scene = generate_scene(config, seed)
        stem = f"scene_{index:04d}"
        png, ann = out / f"{stem}.png", out / f"{stem}.json"
        write_png(png, scene.image)
        schemas.write_json(ann, schemas.annotations_to_json(
            png.name, scene.image.shape[1], scene.image.shape[0], scene.annotations))
        return {"index": index, "seed": seed, "image": png.name, "annotations": ann.name,
                "image_sha256": _sha256(png), "annotations_sha256": _sha256(ann)}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(one, range(n_scenes)))
    else:
        entries = [one(i) for i in range(n_scenes)]
    manifest = {"base_seed": base_seed, "n_scenes": n_scenes, "config": config.to_json(),
                "scenes": sorted(entries, key=lambda e: e["index"])}
    schemas.write_json(out / "manifest.json", manifest)
    return manifest


def load_corpus(corpus_dir) -> list[tuple[np.ndarray, list[Box], dict]]:
    """Read back every scene listed in a corpus manifest, in index order."""
    from .raster import read_png
    root = Path(corpus_dir)
    manifest = schemas.read_json(root / "manifest.json")
    scenes = []
    for entry in manifest["scenes"]:
        image = read_png(root / entry["image"])
        doc = schemas.read_annotations(root / entry["annotations"])
        scenes.append((image, doc.boxes, entry))
    return scenes
