"""Noise-prediction training on latent abundance patches."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..io import PatchSet
from ..latent import to_latent
from ..unmixing import UnmixingAutoencoder, encode
from .schedule import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T, build_schedule
from .unet import UNet

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    learning_rate: float = 1e-4
    seed: int = 0
    T: int = DEFAULT_T
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    patch_size: int = 32
    checkpoint_interval: int = 0
    mode: str = "linear"

    def validate(self, model: UNet | None = None) -> None:
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        for name in ("batch_size", "learning_rate", "T", "patch_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.checkpoint_interval < 0:
            raise ValueError("checkpoint_interval must be >= 0")
        if self.mode not in ("linear", "fcls"):
            raise ValueError(f"unknown unmix mode {self.mode!r}")
        if model is not None and self.patch_size % model.spatial_multiple:
            raise ValueError(
                f"patch_size {self.patch_size} not divisible by {model.spatial_multiple}"
            )


class TrainingLog:
    """Per-step losses, optionally streamed to a ``step,loss`` CSV file."""

    def __init__(self, path=None):
        self.steps: list[int] = []
        self.losses: list[float] = []
        self._fh = None
        if path is not None:
            self._fh = open(path, "w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._fh)
            self._writer.writerow(["step", "loss"])

    def append(self, step: int, loss: float) -> None:
        self.steps.append(step)
        self.losses.append(loss)
        if self._fh is not None:
            self._writer.writerow([step, repr(loss)])

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def configure_threads(threads: int | None = None) -> int:
    """Apply the ``HUD_THREADS`` cap; 0 (the default) means single-threaded deterministic mode."""
    if threads is None:
        threads = int(os.environ.get("HUD_THREADS", "0"))
    if threads <= 0:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
        return 0
    torch.set_num_threads(threads)
    return threads


def encode_patches(data: PatchSet, uae: UnmixingAutoencoder, mode: str) -> np.ndarray:
    """Latent fields for every patch, shape ``(n, d, s, s)`` float32.

    Encoding is per pixel, so the source scene is encoded once and the latent
    field is cropped at the patch offsets.
    """
    x = encode(uae, data.source, mode=mode)
    z = to_latent(x).astype(np.float32)
    s = data.patch_size
    return np.stack([z[:, r : r + s, c : c + s] for r, c in data.source_offsets])


def training_loss(model: UNet, z0: torch.Tensor, t: torch.Tensor, eps: torch.Tensor, schedule) -> torch.Tensor:
    """Mean of ``(eps - eps_theta(sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, t))^2`` over the batch."""
    dtype = z0.dtype
    sqrt_ab = torch.from_numpy(np.sqrt(schedule.alpha_bar)).to(dtype)[t - 1]
    sqrt_1m_ab = torch.from_numpy(np.sqrt(1.0 - schedule.alpha_bar)).to(dtype)[t - 1]
    zt = sqrt_ab[:, None, None, None] * z0 + sqrt_1m_ab[:, None, None, None] * eps
    return torch.mean((eps - model(zt, t)) ** 2)


def train(
    model: UNet,
    data: PatchSet,
    uae: UnmixingAutoencoder,
    cfg: TrainConfig,
    log: TrainingLog | None = None,
    checkpoint_dir=None,
    checkpoint_meta: dict | None = None,
) -> UNet:
    """Fit ``model`` to predict the noise added to latent patches.

    Each step draws a minibatch of patches, a step ``t`` uniform on ``[1, T]``
    and standard normal noise per item, and takes one Adam step on the mean
    squared noise-prediction error. With ``checkpoint_dir`` set and a positive
    ``cfg.checkpoint_interval``, snapshots are written to
    ``checkpoint_dir/step_XXXXXXX``.
    """
    cfg.validate(model)
    if len(data) == 0:
        raise ValueError("empty training set")
    if data.patch_size != cfg.patch_size:
        raise ValueError(f"patches are {data.patch_size}px, config says {cfg.patch_size}")
    if not uae.frozen:
        raise ValueError("training expects a frozen unmixing autoencoder")
    if data.bands != uae.bands:
        raise ValueError(f"patches have {data.bands} bands, autoencoder expects {uae.bands}")
    if cfg.steps == 0:
        return model

    schedule = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    dtype = next(model.parameters()).dtype
    latents = torch.from_numpy(encode_patches(data, uae, cfg.mode)).to(dtype)

    gen = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    model.train()
    n = latents.shape[0]
    for step in range(1, cfg.steps + 1):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=gen)
        z0 = latents[idx]
        t = torch.randint(1, cfg.T + 1, (cfg.batch_size,), generator=gen)
        eps = torch.randn(z0.shape, generator=gen, dtype=dtype)
        loss = training_loss(model, z0, t, eps, schedule)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise FloatingPointError(
                f"non-finite loss at step {step} (t={t.tolist()}, "
                f"|z0|max={float(z0.abs().max()):.3g})"
            )
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        if log is not None:
            log.append(step, value)
        if (
            checkpoint_dir is not None
            and cfg.checkpoint_interval
            and step % cfg.checkpoint_interval == 0
        ):
            from .checkpoint import save_checkpoint

            save_checkpoint(
                Path(checkpoint_dir) / f"step_{step:07d}",
                model, cfg, uae, step=step, extra=checkpoint_meta,
            )
        if step % 100 == 0:
            logger.info("step %d loss %.5f", step, value)
    model.eval()
    return model
