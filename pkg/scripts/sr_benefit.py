"""Train the 3-layer SR network at desk scale and compare it to bicubic on held-out tiles.

    python3 scripts/sr_benefit.py --out runs/sr_benefit
"""
import argparse
import json
import logging
import time
from dataclasses import asdict
from pathlib import Path

from riverlitter import experiments, srnet


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sr_benefit")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    base = experiments.SrBenefitConfig(seed=args.seed)
    cfg = experiments.SrBenefitConfig(
        seed=args.seed,
        train=srnet.TrainConfig(**{**asdict(base.train), "max_epochs": args.epochs, "seed": args.seed}))
    t0 = time.perf_counter()
    res = experiments.sr_benefit(cfg)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    srnet.save_checkpoint(out / "srnet.bin", res.net, cfg.train, res.loss_history)
    summary = {"psnr_network": res.psnr_network, "psnr_bicubic": res.psnr_bicubic,
               "ssim_network": res.ssim_network, "ssim_bicubic": res.ssim_bicubic,
               "psnr_gain_db": res.psnr_network - res.psnr_bicubic, "seconds": elapsed}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"bicubic  PSNR {res.psnr_bicubic:.3f} dB  SSIM {res.ssim_bicubic:.4f}")
    print(f"network  PSNR {res.psnr_network:.3f} dB  SSIM {res.ssim_network:.4f}")
    print(f"gain {summary['psnr_gain_db']:+.3f} dB in {elapsed:.0f} s")


if __name__ == "__main__":
    main()
