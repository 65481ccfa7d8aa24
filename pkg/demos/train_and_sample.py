"""
Training and sampling at desk scale
===================================

A short run of the whole pipeline: unmix, train the noise predictor on latent
patches, sample new abundance fields and decode them to spectra. Steps and
model size are cut down so it finishes in under a minute on one CPU core.
"""
import time

import numpy as np

from hud.diffusion import (
    TrainConfig,
    TrainingLog,
    build_denoiser,
    build_schedule,
    configure_threads,
    sample,
    train,
)
from hud.io import extract_patches
from hud.metrics import metric_report
from hud.synthetic import make_synthetic
from hud.unmixing import UnmixingAutoencoder, vca

configure_threads()  # HUD_THREADS, 0 = single-threaded and deterministic
scene = make_synthetic(bands=64, d=4, height=96, width=96, seed=0)
uae = UnmixingAutoencoder(vca(scene.cube, 4, seed=0))
patches = extract_patches(scene.cube, 32, 4096, seed=0)

###############################################################################
# Train
# -----
# 100 diffusion steps with a steeper beta range keep the chain short.

cfg = TrainConfig(steps=300, batch_size=8, learning_rate=2e-4, T=100,
                  beta_start=1e-3, beta_end=0.2, patch_size=32)
model = build_denoiser(4, base_width=16, depth=2, seed=0)
log = TrainingLog()
t0 = time.time()
train(model, patches, uae, cfg, log=log)
losses = np.array(log.losses)
print(f"trained {cfg.steps} steps in {time.time() - t0:.0f}s")
print("loss, first/last 50 steps:", losses[:50].mean().round(4), losses[-50:].mean().round(4))

###############################################################################
# Sample and score
# ----------------

cubes = sample(model, build_schedule(cfg.T, cfg.beta_start, cfg.beta_end), uae, count=4, size=32, seed=0)
rep = metric_report(cubes, scene.cube)
print(f"F_p={rep.F_p:.4f}  D_b={rep.D_b:.4f}  D_b/F_p={rep.ratio:.4f}")
