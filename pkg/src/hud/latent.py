"""Log/softmax projection pair between simplex-valued abundances and an
unconstrained latent space.

``to_latent`` adds an offset of ``exp(-ln d - 8) = e^-8 / d`` before the log so
zero abundances stay finite; ``from_latent`` is a per-pixel softmax. Their
composition is ``(x + e^-8/d) / (1 + e^-8)``, so the round trip moves any
abundance by at most ``e^-8``.

Both functions treat axis -3 as the endmember axis, so they accept a single
``(d, h, w)`` field or a batch ``(n, d, h, w)``.
"""

from __future__ import annotations

import numpy as np

from .unmixing import NONNEG_TOL

ROUND_TRIP_BOUND = float(np.exp(-8.0))


def latent_offset(d: int) -> float:
    return float(np.exp(-np.log(d) - 8.0))


def to_latent(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3:
        raise ValueError(f"expected (..., d, h, w), got shape {x.shape}")
    if x.min() < -NONNEG_TOL:
        raise ValueError("abundances must be non-negative")
    return np.log(np.maximum(x, 0.0) + latent_offset(x.shape[-3]))


def from_latent(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("latent field contains non-finite values")
    e = np.exp(z - z.max(axis=-3, keepdims=True))
    return e / e.sum(axis=-3, keepdims=True)


def round_trip_closed_form(x) -> np.ndarray:
    """Exact value of ``from_latent(to_latent(x))``."""
    x = np.asarray(x, dtype=np.float64)
    return (np.maximum(x, 0.0) + latent_offset(x.shape[-3])) / (1.0 + ROUND_TRIP_BOUND)


def to_latent_jvp(x, v) -> np.ndarray:
    """Directional derivative of :func:`to_latent` at ``x`` along ``v``."""
    x = np.asarray(x, dtype=np.float64)
    return np.asarray(v, dtype=np.float64) / (np.maximum(x, 0.0) + latent_offset(x.shape[-3]))


def from_latent_jvp(z, v) -> np.ndarray:
    """Directional derivative of :func:`from_latent` at ``z`` along ``v``.

    For ``p = softmax(z)``: ``dp = p * (v - sum(p * v))`` per pixel.
    """
    p = from_latent(z)
    v = np.asarray(v, dtype=np.float64)
    return p * (v - np.sum(p * v, axis=-3, keepdims=True))
