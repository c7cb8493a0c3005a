"""Tile a wide panorama, detect per tile, and show how seam merging repairs split objects.

    python3 scripts/seam_demo.py --out runs/seam_demo
"""
import argparse
from pathlib import Path

from riverlitter import boxeval, refdetect, scenegen, schemas
from riverlitter.cli import render_map
from riverlitter.raster import write_png
from riverlitter.scenegen import SceneConfig
from riverlitter.tilemap import globalize_boxes, merge_seam_boxes, tile


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--tile", type=int, default=256)
    ap.add_argument("--objects", type=int, default=40)
    ap.add_argument("--out", default="runs/seam_demo")
    args = ap.parse_args()

    cfg = SceneConfig(canvas_height=512, canvas_width=1024, object_count=args.objects)
    scene = scenegen.generate_scene(cfg, args.seed)
    grid, tiles = tile(scene.image, args.tile)
    dets = []
    for origin, t in zip(grid.origins, tiles):
        dets += globalize_boxes(refdetect.detect(t), origin)
    merged = merge_seam_boxes(dets, grid)
    whole = refdetect.detect(scene.image)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_png(out / "panorama.png", scene.image)
    render_map(scene.image, dets).save(out / "map_split.png")
    render_map(scene.image, merged).save(out / "map_merged.png")
    schemas.write_json(out / "merged.json", schemas.detections_to_json(
        "panorama.png", cfg.canvas_width, cfg.canvas_height, merged))
    for name, d in (("whole image", whole), ("tiled", dets), ("tiled + merge", merged)):
        rep = boxeval.evaluate(d, scene.annotations)
        print(f"{name:14s} boxes {len(d):3d}  mAP {rep.map_score:.3f}  recall {rep.recall:.3f}")


if __name__ == "__main__":
    main()
