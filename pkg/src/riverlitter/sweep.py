"""Magnification-factor sweep: degrade, reconstruct, detect, evaluate.

Every scene is cut into ``tile_size`` tiles. Each tile is degraded once to a
low-resolution input ``lr_scale`` times smaller (blur, bicubic downsample,
noise). The conditions are then

* ``HR``: the original tile,
* ``x1-LR``: the low-resolution tile upsampled bicubically to ``tile_size``,
* ``x{k}-SR``: the low-resolution tile reconstructed at ``k`` times its size
  and resized bicubically to ``tile_size`` when ``k != lr_scale``.

All conditions share the same low-resolution input and are detected and
scored at the same resolution. The report digest covers everything except
wall-clock fields.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import boxeval, quality, refdetect, schemas, srnet
from .boxes import Box, Detection
from .errors import InvalidParameterError
from .raster import DegradationSpec, bicubic_resize, degrade
from .refdetect import DetectorParams
from .tilemap import TileGrid, globalize_boxes, merge_seam_boxes, tile

log = logging.getLogger(__name__)

CSV_COLUMNS = ("condition", "psnr_db", "ssim", "precision", "recall", "f1", "map",
               "mean_confidence", "seconds")
TIMING_FIELDS = ("seconds",)


@dataclass(frozen=True)
class SweepConfig:
    corpus: str | None = None
    tile_size: int = 512
    factors: tuple[int, ...] = (1, 2, 3, 4, 5)
    sr_method: str = "bicubic"
    checkpoint: str | None = None
    lr_scale: int = 4
    blur_length: float = 3.0
    blur_angle: float = 0.0
    noise_sigma: float = 0.01
    detector: DetectorParams = field(default_factory=DetectorParams)
    iou_thresh: float = 0.5
    seed: int = 0
    merge_seams: bool = False

    def __post_init__(self):
        f = tuple(int(k) for k in self.factors)
        if not f or any(k < 1 for k in f) or list(f) != sorted(set(f)):
            raise InvalidParameterError("factors must be unique, ascending and >= 1")
        object.__setattr__(self, "factors", f)
        if self.sr_method not in ("bicubic", "network"):
            raise InvalidParameterError(f"unknown sr_method {self.sr_method!r}")
        if self.lr_scale < 1 or self.tile_size % self.lr_scale:
            raise InvalidParameterError("lr_scale must be >= 1 and divide tile_size")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["factors"] = list(self.factors)
        doc["detector"] = self.detector.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SweepConfig":
        doc = dict(doc)
        if "detector" in doc:
            doc["detector"] = DetectorParams.from_json(doc["detector"])
        if "factors" in doc:
            doc["factors"] = tuple(doc["factors"])
        return cls(**doc)


def condition_name(k: int) -> str:
    return "x1-LR" if k == 1 else f"x{k}-SR"


@dataclass
class SweepRow:
    condition: str
    psnr_db: float
    ssim: float
    report: boxeval.EvalReport
    mean_confidence: float
    seconds: float

    def csv_row(self) -> dict:
        return {"condition": self.condition, "psnr_db": quality.encode_db(self.psnr_db),
                "ssim": self.ssim, "precision": self.report.precision,
                "recall": self.report.recall, "f1": self.report.f1,
                "map": self.report.map_score, "mean_confidence": self.mean_confidence,
                "seconds": self.seconds}

    def to_json(self) -> dict:
        doc = self.csv_row()
        doc["eval"] = self.report.to_json()
        return doc


@dataclass
class SweepReport:
    config: SweepConfig
    rows: list[SweepRow]
    n_scenes: int
    n_tiles: int

    def row(self, condition: str) -> SweepRow:
        return next(r for r in self.rows if r.condition == condition)

    def to_json(self, with_digest: bool = True) -> dict:
        doc = {"config": self.config.to_json(),
               "metadata": {"n_scenes": self.n_scenes, "n_tiles": self.n_tiles,
                            "lr_tile_size": self.config.tile_size // self.config.lr_scale,
                            "evaluated_at_tile_size": True},
               "rows": [r.to_json() for r in self.rows]}
        if with_digest:
            doc["digest"] = report_digest(doc)
        return doc


def report_digest(doc: dict) -> str:
    """SHA-256 of the canonical report with timing fields and the digest removed."""
    def strip(node):
        if isinstance(node, dict):
            return {k: strip(v) for k, v in node.items()
                    if k not in TIMING_FIELDS and k != "digest"}
        if isinstance(node, list):
            return [strip(v) for v in node]
        return node
    return schemas.canonical_digest(strip(doc))


def _tile_seed(seed: int, scene: int, tile_index: int) -> int:
    return int(np.random.SeedSequence([seed, scene, tile_index]).generate_state(1)[0])


def reconstruct(lr: np.ndarray, k: int, tile_size: int, method: str,
                net: srnet.SrNetwork | None) -> np.ndarray:
    if k == 1:
        up = lr
    else:
        up = srnet.super_resolve(method, lr, k, net)
    if up.shape[:2] != (tile_size, tile_size):
        up = bicubic_resize(up, tile_size, tile_size)
    return up


def _scene_work(index: int, image: np.ndarray, gts: Sequence[Box], cfg: SweepConfig,
                net: srnet.SrNetwork | None) -> dict:
    """Per-condition detections, quality scores and timings for one scene."""
    grid, tiles = tile(image, cfg.tile_size)
    names = ["HR"] + [condition_name(k) for k in cfg.factors]
    dets = {n: [] for n in names}
    psnrs = {n: [] for n in names}
    ssims = {n: [] for n in names}
    secs = {n: 0.0 for n in names}
    for t_idx, (origin, hr) in enumerate(zip(grid.origins, tiles)):
        spec = DegradationSpec(cfg.blur_length, cfg.blur_angle, cfg.lr_scale,
                               cfg.noise_sigma, _tile_seed(cfg.seed, index, t_idx))
        lr = degrade(hr, spec)
        for name, k in [("HR", None)] + [(condition_name(k), k) for k in cfg.factors]:
            t0 = time.perf_counter()
            img = hr if k is None else reconstruct(lr, k, cfg.tile_size, cfg.sr_method, net)
            found = refdetect.detect(img, cfg.detector)
            secs[name] += time.perf_counter() - t0
            dets[name].extend(globalize_boxes(found, origin))
            psnrs[name].append(quality.psnr(hr, img))
            ssims[name].append(quality.ssim(hr, img))
    if cfg.merge_seams:
        dets = {n: merge_seam_boxes(d, grid) for n, d in dets.items()}
    return {"grid": grid, "dets": dets, "psnr": psnrs, "ssim": ssims, "seconds": secs,
            "gts": list(gts)}


def _mean_db(values: list[float]) -> float:
    return math.inf if any(math.isinf(v) for v in values) else float(np.mean(values))


def run_sweep(cfg: SweepConfig, scenes: Sequence[tuple[np.ndarray, Sequence[Box]]],
              net: srnet.SrNetwork | None = None, threads: int = 1) -> SweepReport:
    """Run every condition over ``scenes``; results are aggregated in scene order."""
    if cfg.sr_method == "network" and net is None:
        if cfg.checkpoint is None:
            raise InvalidParameterError("network sweep needs a checkpoint or a network")
        net = srnet.load_checkpoint(cfg.checkpoint)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            work = list(pool.map(lambda a: _scene_work(a[0], a[1][0], a[1][1], cfg, net),
                                 enumerate(scenes)))
    else:
        work = [_scene_work(i, img, gts, cfg, net) for i, (img, gts) in enumerate(scenes)]

    rows = []
    n_tiles = sum(len(w["grid"].origins) for w in work)
    for name in ["HR"] + [condition_name(k) for k in cfg.factors]:
        pairs = [(w["dets"][name], w["gts"]) for w in work]
        report = boxeval.evaluate_images(pairs, cfg.iou_thresh)
        all_dets: list[Detection] = [d for w in work for d in w["dets"][name]]
        rows.append(SweepRow(
            condition=name,
            psnr_db=_mean_db([v for w in work for v in w["psnr"][name]]),
            ssim=float(np.mean([v for w in work for v in w["ssim"][name]])),
            report=report,
            mean_confidence=refdetect.mean_confidence(all_dets),
            seconds=float(sum(w["seconds"][name] for w in work))))
        log.info("%s: map %.4f conf %.4f psnr %s", name, report.map_score,
                 rows[-1].mean_confidence, quality.encode_db(rows[-1].psnr_db))
    return SweepReport(cfg, rows, len(scenes), n_tiles)


def write_report(report: SweepReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, csv_path = out / "sweep_report.json", out / "sweep_report.csv"
    schemas.write_json(json_path, report.to_json())
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in report.rows:
            writer.writerow(r.csv_row())
    return json_path, csv_path
