"""Ancestral sampling from a trained denoiser, decoded back to spectra."""

from __future__ import annotations

import numpy as np
import torch

from ..io import HsiCube
from ..latent import from_latent
from ..unmixing import UnmixingAutoencoder, decode
from .schedule import NoiseSchedule, sample_step
from .unet import UNet


@torch.no_grad()
def sample_latents(model: UNet, s: NoiseSchedule, count: int, size: int, seed: int) -> np.ndarray:
    """Run the reverse chain from ``Z_T ~ N(0, I)`` down to ``Z_0``; returns ``(count, d, size, size)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if size < 1 or size % model.spatial_multiple:
        raise ValueError(f"size {size} must be a positive multiple of {model.spatial_multiple}")
    dtype = next(model.parameters()).dtype
    gen = torch.Generator().manual_seed(seed)
    shape = (count, model.channels, size, size)
    z = torch.randn(shape, generator=gen, dtype=dtype)
    model.eval()
    for t in range(s.T, 0, -1):
        eps_hat = model(z, torch.full((count,), t, dtype=torch.long))
        noise = torch.randn(shape, generator=gen, dtype=dtype) if t > 1 else torch.zeros(shape, dtype=dtype)
        z = sample_step(z, t, eps_hat, noise, s)
    return z.numpy().astype(np.float64)


def sample_abundances(model: UNet, s: NoiseSchedule, count: int, size: int, seed: int) -> np.ndarray:
    """Generated abundance fields ``(count, d, size, size)``; each pixel lies on the simplex."""
    return from_latent(sample_latents(model, s, count, size, seed))


def sample(
    model: UNet,
    s: NoiseSchedule,
    uae: UnmixingAutoencoder,
    count: int,
    size: int,
    seed: int,
) -> list[HsiCube]:
    if model.channels != uae.d:
        raise ValueError(f"model has {model.channels} channels, autoencoder d={uae.d}")
    return [decode(uae, x) for x in sample_abundances(model, s, count, size, seed)]
