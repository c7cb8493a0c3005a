"""Magnification-factor sweep on a generated corpus: HR, x1-LR and xk-SR rows.

    python3 scripts/magnification_sweep.py --checkpoint runs/sr_benefit/srnet.bin
    python3 scripts/magnification_sweep.py --method bicubic --scenes 5
"""
import argparse
import logging
import time

from riverlitter import scenegen, srnet
from riverlitter.scenegen import SceneConfig
from riverlitter.sweep import SweepConfig, run_sweep, write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--objects", type=int, default=5)
    ap.add_argument("--method", choices=("bicubic", "network"), default="network")
    ap.add_argument("--checkpoint", help="srnet.bin; trained on the spot when omitted")
    ap.add_argument("--factors", default="1,2,3,4,5")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    net = None
    if args.method == "network":
        if args.checkpoint:
            net = srnet.load_checkpoint(args.checkpoint)
        else:
            from riverlitter import experiments
            net = experiments.sr_benefit(experiments.SrBenefitConfig(seed=args.seed)).net

    scene_cfg = SceneConfig(object_count=args.objects)
    scenes = [(s.image, s.annotations) for s in
              (scenegen.generate_scene(scene_cfg, seed) for seed in range(args.scenes))]
    cfg = SweepConfig(factors=tuple(int(k) for k in args.factors.split(",")),
                      sr_method=args.method, checkpoint=args.checkpoint, seed=args.seed)
    t0 = time.perf_counter()
    report = run_sweep(cfg, scenes, net, threads=args.threads)
    write_report(report, args.out)

    print(f"{'condition':<10} {'psnr':>8} {'ssim':>7} {'mAP':>7} {'conf':>7} {'sec':>7}")
    for r in report.rows:
        print(f"{r.condition:<10} {r.psnr_db:8.3f} {r.ssim:7.4f} {r.report.map_score:7.4f} "
              f"{r.mean_confidence:7.4f} {r.seconds:7.1f}")
    print(f"{report.n_scenes} scenes, {report.n_tiles} tiles, {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
