"""Synthetic linear-mixture scenes for desk-scale experiments."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .io import HsiCube


class SyntheticScene(NamedTuple):
    cube: HsiCube
    endmembers: np.ndarray  # (c, d)
    abundances: np.ndarray  # (d, h, w)


def random_endmembers(bands: int, d: int, rng: np.random.Generator, peaks: int = 4) -> np.ndarray:
    """Smooth positive spectra, each a baseline plus a sum of Gaussian bumps."""
    grid = np.linspace(0.0, 1.0, bands)
    A = np.empty((bands, d))
    for j in range(d):
        centers = rng.uniform(0.0, 1.0, peaks)
        widths = rng.uniform(0.04, 0.2, peaks)
        heights = rng.uniform(0.2, 1.0, peaks)
        bumps = heights * np.exp(-0.5 * ((grid[:, None] - centers) / widths) ** 2)
        A[:, j] = 0.05 + bumps.sum(axis=1)
    return A / A.max()


def smooth_dirichlet_field(
    d: int,
    height: int,
    width: int,
    rng: np.random.Generator,
    concentration: float = 0.5,
    smoothness: float = 4.0,
    sharpness: float = 2.5,
) -> np.ndarray:
    """Spatially correlated abundances on the simplex.

    Per-pixel Gamma draws (the Dirichlet construction) are Gaussian-smoothed per
    endmember. Normalising those directly would average out to nearly uniform
    mixtures, so the standardized log-fields go through a softmax with gain
    ``sharpness``, giving patchy regions dominated by one material.
    """
    g = rng.gamma(concentration, size=(d, height, width))
    g = np.stack([gaussian_filter(ch, smoothness, mode="reflect") for ch in g])
    logs = np.log(g)
    logs = sharpness * (logs - logs.mean()) / logs.std()
    e = np.exp(logs - logs.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def make_synthetic(
    bands: int = 64,
    d: int = 4,
    height: int = 96,
    width: int = 96,
    noise: float = 0.0,
    pure_pixels: bool = True,
    seed: int = 0,
) -> SyntheticScene:
    """Generate ``Y = A X (+ noise)`` with known endmembers and abundances.

    With ``pure_pixels`` one randomly placed pixel per endmember is set to that
    endmember alone, so geometric extraction can recover ``A`` exactly.
    ``noise`` is the standard deviation of additive Gaussian noise relative to
    the scene maximum.
    """
    rng = np.random.default_rng(seed)
    A = random_endmembers(bands, d, rng)
    X = smooth_dirichlet_field(d, height, width, rng)
    if pure_pixels:
        flat = rng.choice(height * width, size=d, replace=False)
        for j, idx in enumerate(flat):
            r, c = divmod(int(idx), width)
            X[:, r, c] = 0.0
            X[j, r, c] = 1.0
    Y = np.tensordot(A, X, axes=(1, 0))
    if noise > 0:
        Y = Y + noise * Y.max() * rng.standard_normal(Y.shape)
    return SyntheticScene(HsiCube(Y), A, X)
