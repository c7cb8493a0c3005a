"""Canned experiment setups shared by the scripts, the CLI and the acceptance tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import quality, scenegen, srnet
from .raster import DegradationSpec, degrade

log = logging.getLogger(__name__)

# Denser scenes than the survey corpus so that random crops mostly contain litter.
TRAIN_SCENES = scenegen.SceneConfig(canvas_height=256, canvas_width=256, object_count=14,
                                    size_range=(12.0, 48.0), spacing=2)


@dataclass
class SrBenefitConfig:
    n_train: int = 200
    n_test: int = 100
    l_sub: int = 32
    scale: int = 2
    seed: int = 0
    n_train_scenes: int = 12
    n_test_scenes: int = 6
    degradation: DegradationSpec = field(default_factory=DegradationSpec)
    # desk-scale overrides of the long-run defaults (300 epochs, lr 1e-4)
    train: srnet.TrainConfig = field(default_factory=lambda: srnet.TrainConfig(
        max_epochs=50, batch_size=8, initial_lr=1e-3, lr_halving_period_epochs=15, seed=0))


@dataclass
class SrBenefitResult:
    net: srnet.SrNetwork
    loss_history: list[float]
    psnr_network: float
    psnr_bicubic: float
    ssim_network: float
    ssim_bicubic: float


def build_pairs(cfg: SrBenefitConfig):
    spec = DegradationSpec(cfg.degradation.blur_length, cfg.degradation.blur_angle,
                           cfg.scale, cfg.degradation.noise_sigma, cfg.seed)
    base = cfg.seed * 1_000_003
    train_imgs = [scenegen.generate_scene(TRAIN_SCENES, base + i).image
                  for i in range(cfg.n_train_scenes)]
    test_imgs = [scenegen.generate_scene(TRAIN_SCENES, base + 10_000 + i).image
                 for i in range(cfg.n_test_scenes)]
    train = srnet.make_pairs(train_imgs, spec, cfg.l_sub, cfg.n_train, cfg.seed)
    test_spec = DegradationSpec(spec.blur_length, spec.blur_angle, spec.scale_s,
                                spec.noise_sigma, spec.seed + 10_000)
    test = srnet.make_pairs(test_imgs, test_spec, cfg.l_sub, cfg.n_test, cfg.seed + 1)
    return train, test


def evaluate_pairs(net: srnet.SrNetwork | None, pairs) -> tuple[float, float]:
    """Mean PSNR and SSIM of the network (or bicubic when ``net`` is None) on test pairs."""
    params = quality.SsimParams(size=7, sigma=1.5) if pairs[0][0].shape[0] < 11 else quality.SsimParams()
    ps, ss = [], []
    for up, hr in pairs:
        out = up if net is None else srnet.forward(net, up, dtype=np.float64)
        ps.append(quality.psnr(hr, out))
        ss.append(quality.ssim(hr, out, params))
    return float(np.mean(ps)), float(np.mean(ss))


def sr_benefit(cfg: SrBenefitConfig = SrBenefitConfig()) -> SrBenefitResult:
    train_pairs, test_pairs = build_pairs(cfg)
    net = srnet.init_network(3, cfg.seed)

    def report(epoch, loss, lr):
        log.info("epoch %d loss %.5f lr %.2e", epoch, loss, lr)

    result = srnet.train(net, train_pairs, cfg.train, log=report)
    p_net, s_net = evaluate_pairs(result.net, test_pairs)
    p_bic, s_bic = evaluate_pairs(None, test_pairs)
    return SrBenefitResult(result.net, result.loss_history, p_net, p_bic, s_net, s_bic)
