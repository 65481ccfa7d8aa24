"""Point fidelity and block diversity for generated hyperspectral images.

Point fidelity is the mean, over generated pixels, of the best cosine
similarity against any real pixel (higher means more realistic spectra).

Block diversity tiles each generated image into ``b x b`` blocks and, for each
block, finds the aligned real-image window (searched at stride 1) with the
highest mean per-pixel cosine similarity; the score is the mean of those
maxima over blocks (lower means less verbatim copying of the scene).

Zero-norm pixels have cosine 0 with everything and are counted in the report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .io import HsiCube


def _unit(data: np.ndarray) -> tuple[np.ndarray, int]:
    """Scale each pixel (axis 0) to unit norm; zero pixels stay zero."""
    data = np.asarray(data, dtype=np.float64)
    norm = np.sqrt(np.sum(data * data, axis=0, keepdims=True))
    zero = norm == 0
    out = np.divide(data, norm, out=np.zeros_like(data), where=~zero)
    return out, int(zero.sum())


def _as_list(generated) -> list[HsiCube]:
    if isinstance(generated, HsiCube):
        generated = [generated]
    generated = list(generated)
    if not generated:
        raise ValueError("no generated images")
    return generated


def _check_bands(generated, real):
    for g in generated:
        if g.bands != real.bands:
            raise ValueError(f"band mismatch: generated {g.bands}, real {real.bands}")


def point_fidelity(generated: Sequence[HsiCube] | HsiCube, real: HsiCube, chunk: int = 4096) -> float:
    generated = _as_list(generated)
    _check_bands(generated, real)
    R, _ = _unit(real.pixels())
    total = 0.0
    count = 0
    for g in generated:
        G, _ = _unit(g.pixels())
        for start in range(0, G.shape[1], chunk):
            sims = G[:, start : start + chunk].T @ R
            total += float(sims.max(axis=1).sum())
        count += G.shape[1]
    return total / count


def _block_offsets(n: int, size: int, stride: int) -> range:
    return range(0, n - size + 1, stride)


def best_window_similarity(block: np.ndarray, real_unit: np.ndarray) -> float:
    """Max over real windows of the mean per-pixel cosine with a unit-normalized block."""
    c, b, _ = block.shape
    _, H, W = real_unit.shape
    nh, nw = H - b + 1, W - b + 1
    acc = np.zeros((nh, nw))
    for p in range(b):
        for q in range(b):
            acc += np.tensordot(block[:, p, q], real_unit[:, p : p + nh, q : q + nw], axes=(0, 0))
    return float(acc.max() / (b * b))


def block_diversity(
    generated: Sequence[HsiCube] | HsiCube,
    real: HsiCube,
    block_size: int = 32,
    stride: int | None = None,
) -> float:
    return _block_scores(_as_list(generated), real, block_size, stride)[0]


def _block_scores(generated, real, block_size, stride):
    _check_bands(generated, real)
    stride = block_size if stride is None else stride
    if block_size < 1 or stride < 1:
        raise ValueError("block_size and stride must be >= 1")
    if block_size > min(real.height, real.width):
        raise ValueError(f"block_size {block_size} exceeds the real image")
    real_unit, _ = _unit(real.data)
    scores = []
    for g in generated:
        if block_size > min(g.height, g.width):
            raise ValueError(f"block_size {block_size} exceeds a generated image ({g.height}x{g.width})")
        gu, _ = _unit(g.data)
        for r in _block_offsets(g.height, block_size, stride):
            for c in _block_offsets(g.width, block_size, stride):
                block = gu[:, r : r + block_size, c : c + block_size]
                scores.append(best_window_similarity(block, real_unit))
    return float(np.mean(scores)), len(scores)


@dataclass
class MetricsReport:
    F_p: float
    D_b: float
    ratio: float | None
    block_size: int
    N_b: int
    generated_count: int
    pixel_count: int
    zero_norm_pixels: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def metric_report(
    generated: Sequence[HsiCube] | HsiCube,
    real: HsiCube,
    block_size: int | None = None,
    stride: int | None = None,
) -> MetricsReport:
    """Both metrics plus their ratio; ``block_size`` defaults to the generated image size."""
    generated = _as_list(generated)
    if block_size is None:
        block_size = min(min(g.height, g.width) for g in generated)
    fp = point_fidelity(generated, real)
    db, nb = _block_scores(generated, real, block_size, stride)
    zero = _unit(real.data)[1] + sum(_unit(g.data)[1] for g in generated)
    return MetricsReport(
        F_p=fp,
        D_b=db,
        ratio=db / fp if fp > 0 else None,
        block_size=int(block_size),
        N_b=nb,
        generated_count=len(generated),
        pixel_count=sum(g.height * g.width for g in generated),
        zero_norm_pixels=zero,
    )
