"""Command line entry point: ``riverlitter <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import boxeval, experiments, refdetect, scenegen, schemas, srnet
from .boxes import Detection
from .errors import DataError, InvalidInputError
from .raster import DegradationSpec, read_png, write_png
from .refdetect import DetectorParams
from .scenegen import SceneConfig
from .sweep import SweepConfig, run_sweep, write_report
from .tilemap import TileGrid, merge_seam_boxes

log = logging.getLogger("riverlitter")

# outline colours per class id, 8-bit RGB
MAP_COLORS = ((255, 0, 255), (0, 255, 255), (255, 255, 0), (255, 128, 0))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class TrainJob:
    """Settings for ``train``: where pairs come from and how to optimise."""
    scales: tuple[int, ...] = (2,)
    n_pairs: int = 200
    l_sub: int = 32
    n_scenes: int = 12
    blur_length: float = 3.0
    blur_angle: float = 0.0
    noise_sigma: float = 0.01
    channels: int = 3
    train: srnet.TrainConfig = field(default_factory=lambda: experiments.SrBenefitConfig().train)

    @classmethod
    def from_json(cls, doc: dict) -> "TrainJob":
        doc = dict(doc)
        if "train" in doc:
            doc["train"] = srnet.TrainConfig(**doc["train"])
        if "scales" in doc:
            doc["scales"] = tuple(int(s) for s in doc["scales"])
        return cls(**doc)


def _config_doc(args) -> dict:
    if args.config is None:
        return {}
    doc = schemas.read_json(args.config)
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{args.config}: config must be a JSON object")
    return doc


def _from_json(factory, doc: dict, what: str):
    try:
        return factory(doc)
    except TypeError as exc:
        raise InvalidInputError(f"bad {what} config: {exc}") from exc


def _log_config(name: str, doc: dict) -> None:
    log.info("%s resolved config: %s", name, json.dumps(doc, sort_keys=True, default=str))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_path(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


# --------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    doc = _config_doc(args)
    if args.objects is not None:
        doc["object_count"] = args.objects
    config = _from_json(SceneConfig.from_json, doc, "scene")
    _log_config("gen", {"scene": config.to_json(), "n": args.n, "base_seed": args.seed})
    scenegen.generate_corpus(config, args.n, args.seed, _out_dir(args), threads=args.threads)
    return 0


def _train_images(job: TrainJob, args) -> list[np.ndarray]:
    if args.corpus:
        return [img for img, _, _ in scenegen.load_corpus(_require_path(args.corpus, "corpus"))]
    return [scenegen.generate_scene(experiments.TRAIN_SCENES, args.seed * 1_000_003 + i).image
            for i in range(job.n_scenes)]


def cmd_train(args) -> int:
    job = _from_json(TrainJob.from_json, _config_doc(args), "train")
    if args.epochs is not None:
        job.train = srnet.TrainConfig(**{**asdict(job.train), "max_epochs": args.epochs})
    _log_config("train", {**asdict(job), "seed": args.seed, "corpus": args.corpus})
    images = _train_images(job, args)
    if job.channels == 1:
        images = [img.mean(axis=2, keepdims=True) for img in images]
    pairs = []
    for k, s in enumerate(job.scales):
        spec = DegradationSpec(job.blur_length, job.blur_angle, s, job.noise_sigma, args.seed)
        n = job.n_pairs // len(job.scales) + (k < job.n_pairs % len(job.scales))
        pairs += srnet.make_pairs(images, spec, job.l_sub, n, args.seed + k)

    def report(epoch, loss, lr):
        log.info("epoch %d loss %.6f lr %.3e", epoch, loss, lr)

    result = srnet.train(srnet.init_network(job.channels, args.seed), pairs, job.train, log=report)
    path = _out_dir(args) / "srnet.bin"
    srnet.save_checkpoint(path, result.net, job.train, result.loss_history,
                          {"scales": list(job.scales), "seed": args.seed})
    log.info("wrote %s", path)
    return 0


def cmd_sr(args) -> int:
    image = read_png(_require_path(args.input, "input image"))
    net = None
    if args.method == "network":
        if not args.checkpoint:
            raise UsageError("--checkpoint is required for the network method")
        net = srnet.load_checkpoint(_require_path(args.checkpoint, "checkpoint"))
    _log_config("sr", {"input": args.input, "scale": args.scale, "method": args.method,
                       "checkpoint": args.checkpoint})
    out = srnet.super_resolve(args.method, image, args.scale, net)
    path = _out_dir(args) / (Path(args.input).stem + f"_x{args.scale}.png")
    write_png(path, out)
    log.info("wrote %s", path)
    return 0


def cmd_detect(args) -> int:
    params = _from_json(DetectorParams.from_json, _config_doc(args), "detector")
    _log_config("detect", {"input": args.input, "detector": params.to_json()})
    image = read_png(_require_path(args.input, "input image"))
    dets = refdetect.detect(image, params)
    path = _out_dir(args) / (Path(args.input).stem + "_detections.json")
    schemas.write_json(path, schemas.detections_to_json(
        Path(args.input).name, image.shape[1], image.shape[0], dets))
    log.info("%d detections -> %s", len(dets), path)
    return 0


EVAL_COLUMNS = ("detections", "annotations", "iou_thresh", "precision", "recall", "f1", "map")


def cmd_eval(args) -> int:
    dets = schemas.read_detections(_require_path(args.detections, "detections file"))
    gts = schemas.read_annotations(_require_path(args.annotations, "annotations file"))
    _log_config("eval", {"detections": args.detections, "annotations": args.annotations,
                         "iou_thresh": args.iou, "binary": args.binary})
    report = boxeval.evaluate(dets.detections, gts.boxes, args.iou, binary=args.binary)
    out = _out_dir(args)
    schemas.write_json(out / "eval_report.json", report.to_json())
    with open(out / "eval_report.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=EVAL_COLUMNS)
        writer.writeheader()
        writer.writerow({"detections": args.detections, "annotations": args.annotations,
                         "iou_thresh": args.iou, "precision": report.precision,
                         "recall": report.recall, "f1": report.f1, "map": report.map_score})
    log.info("mAP %.4f", report.map_score)
    return 0


def cmd_sweep(args) -> int:
    doc = _config_doc(args)
    for key, value in (("corpus", args.corpus), ("checkpoint", args.checkpoint),
                       ("sr_method", args.method), ("factors", args.factors)):
        if value is not None:
            doc[key] = value
    doc["seed"] = args.seed
    if args.merge_seams:
        doc["merge_seams"] = True
    config = _from_json(SweepConfig.from_json, doc, "sweep")
    if config.corpus is None:
        raise UsageError("a corpus is required (--corpus or config)")
    corpus = _require_path(config.corpus, "corpus")
    if config.sr_method == "network":
        if config.checkpoint is None:
            raise UsageError("the network method needs --checkpoint")
        _require_path(config.checkpoint, "checkpoint")
    _log_config("sweep", config.to_json())
    scenes = [(img, boxes) for img, boxes, _ in scenegen.load_corpus(corpus)]
    report = run_sweep(config, scenes, threads=args.threads)
    json_path, csv_path = write_report(report, _out_dir(args))
    log.info("wrote %s and %s", json_path, csv_path)
    return 0


def render_map(image: np.ndarray, detections: list[Detection]) -> Image.Image:
    """Panorama with a one-pixel class-coloured outline and confidence per box."""
    h, w = image.shape[:2]
    for d in detections:
        b = d.box
        if b.x_min < 0 or b.y_min < 0 or b.x_max > w or b.y_max > h:
            raise InvalidInputError(f"detection {b.as_tuple()} outside the {w}x{h} canvas")
    rgb = image if image.shape[2] == 3 else np.repeat(image, 3, axis=2)
    canvas = Image.fromarray(np.rint(np.clip(rgb, 0, 1) * 255).astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(canvas)
    for d in detections:
        b = d.box
        color = MAP_COLORS[d.class_id % len(MAP_COLORS)]
        x0, y0 = int(np.floor(b.x_min)), int(np.floor(b.y_min))
        x1, y1 = int(np.ceil(b.x_max)) - 1, int(np.ceil(b.y_max)) - 1
        draw.rectangle((x0, y0, x1, y1), outline=color, width=1)
        # label above the box, or just inside it near the top edge
        ty = y0 - 11 if y0 >= 11 else y0 + 2
        draw.text((x0 + 2, ty), f"{d.confidence:.2f}", fill=color)
    return canvas


def cmd_map(args) -> int:
    image = read_png(_require_path(args.image, "panorama image"))
    dets = schemas.read_detections(_require_path(args.detections, "detections file")).detections
    _log_config("map", {"image": args.image, "detections": args.detections,
                        "merge_seams": args.merge_seams, "tile": args.tile})
    if args.merge_seams:
        h, w = image.shape[:2]
        if args.tile <= min(h, w):
            dets = merge_seam_boxes(dets, TileGrid.build(h, w, args.tile))
    canvas = render_map(image, dets)
    out = _out_dir(args)
    stem = Path(args.image).stem
    canvas.save(out / f"{stem}_map.png")
    schemas.write_json(out / f"{stem}_map.json", schemas.detections_to_json(
        Path(args.image).name, image.shape[1], image.shape[0], dets))
    log.info("%d boxes on the map", len(dets))
    return 0


# --------------------------------------------------------------------------
# argument parsing

def _common(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(0), help="u64 seed")
    p.add_argument("--config", default=d(None), help="JSON config file")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riverlitter", description=__doc__.splitlines()[0],
                     parents=[_common(True)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_common(False)]

    p = sub.add_parser("gen", parents=common, help="generate a synthetic scene corpus")
    p.add_argument("--n", type=int, default=3, help="number of scenes")
    p.add_argument("--objects", type=int, help="objects per scene")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=common, help="train the SR network")
    p.add_argument("--corpus", help="corpus directory with HR scenes (default: synthetic)")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", parents=common, help="super-resolve one PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--method", choices=("bicubic", "network"), default="bicubic")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("detect", parents=common, help="run the reference detector on one PNG")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=common, help="score detections against annotations")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--iou", type=float, default=boxeval.DEFAULT_IOU)
    p.add_argument("--binary", action="store_true", help="collapse classes into 'litter'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=common, help="magnification-factor sweep")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--method", choices=("bicubic", "network"))
    p.add_argument("--factors", type=lambda s: [int(v) for v in s.split(",")])
    p.add_argument("--merge-seams", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("map", parents=common, help="render a litter distribution map")
    p.add_argument("--image", required=True)
    p.add_argument("--detections", required=True, help="detections in panorama coordinates")
    p.add_argument("--merge-seams", action="store_true")
    p.add_argument("--tile", type=int, default=512)
    p.set_defaults(func=cmd_map)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
