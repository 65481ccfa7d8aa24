"""Hyperspectral cube container, HSC1 persistence, patch sampling and pseudo-color export.

An HSC1 cube is stored as two files: a small UTF-8 JSON header at ``path`` and
a raw payload at ``path + ".raw"`` holding ``c*h*w`` little-endian float32
values in band-major order (band slowest, then row, then column).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = "HSC1"
PAYLOAD_SUFFIX = ".raw"
_DTYPE = np.dtype("<f4")


class CubeFormatError(ValueError):
    """Raised when an HSC1 header/payload pair is malformed."""


@dataclass(frozen=True)
class HsiCube:
    """A ``c x h x w`` hyperspectral cube stored band-major as float32.

    The array is copied to a read-only float32 buffer on construction, so two
    cubes built from the same values compare equal bit-for-bit.
    """

    data: np.ndarray
    band_names: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"cube data must be 3-D (c, h, w), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"cube dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cube contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if self.band_names is not None:
            names = tuple(str(n) for n in self.band_names)
            if len(names) != arr.shape[0]:
                raise ValueError(
                    f"band_names has {len(names)} entries for {arr.shape[0]} bands"
                )
            object.__setattr__(self, "band_names", names)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def pixels(self) -> np.ndarray:
        """Return the ``c x (h*w)`` pixel matrix as float64."""
        return self.data.reshape(self.bands, -1).astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, HsiCube):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.band_names == other.band_names
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None


def payload_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + PAYLOAD_SUFFIX)


def save_cube(cube: HsiCube, path) -> None:
    """Write ``cube`` as an HSC1 header at ``path`` plus its raw payload.

    Output bytes depend only on the cube contents.
    """
    if not isinstance(cube, HsiCube):
        cube = HsiCube(cube)
    path = Path(path)
    header = {
        "magic": MAGIC,
        "bands": cube.bands,
        "height": cube.height,
        "width": cube.width,
        "dtype": "f32le",
        "layout": "band-major",
    }
    if cube.band_names is not None:
        header["band_names"] = list(cube.band_names)
    path.write_text(json.dumps(header) + "\n", encoding="utf-8")
    payload_path(path).write_bytes(cube.data.astype(_DTYPE, copy=False).tobytes(order="C"))


def load_cube(path) -> HsiCube:
    """Read an HSC1 header/payload pair.

    Raises:
        FileNotFoundError: header or payload missing.
        CubeFormatError: bad magic, unsupported dtype/layout, or the payload
            size disagrees with the declared dimensions.
        ValueError: payload contains NaN or infinite values.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"cube header not found: {path}")
    raw_path = payload_path(path)
    if not raw_path.is_file():
        raise FileNotFoundError(f"cube payload not found: {raw_path}")
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CubeFormatError(f"{path}: header is not valid JSON ({exc})") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise CubeFormatError(f"{path}: magic mismatch, expected {MAGIC!r}")
    if header.get("dtype") != "f32le" or header.get("layout") != "band-major":
        raise CubeFormatError(f"{path}: unsupported dtype/layout")
    try:
        c, h, w = (int(header[k]) for k in ("bands", "height", "width"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CubeFormatError(f"{path}: missing or invalid dimensions") from exc
    if min(c, h, w) < 1:
        raise CubeFormatError(f"{path}: dimensions must be >= 1")

    payload = raw_path.read_bytes()
    expected = c * h * w * _DTYPE.itemsize
    if len(payload) != expected:
        raise CubeFormatError(
            f"{raw_path}: declared {c}x{h}x{w} needs {expected} bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=_DTYPE).reshape(c, h, w)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{raw_path}: payload contains non-finite values")
    return HsiCube(data, band_names=header.get("band_names"))


def normalize(cube: HsiCube) -> tuple[HsiCube, float]:
    """Divide by the global maximum; return the scaled cube and that maximum.

    A single global scale keeps the relative band magnitudes intact.
    """
    peak = float(cube.data.max())
    if peak <= 0.0:
        raise ValueError("cannot normalize a cube without strictly positive values")
    if peak == 1.0:
        return cube, 1.0
    scaled = (cube.data.astype(np.float64) / peak).astype(np.float32)
    # rounding may leave the peak a hair off 1
    scaled = np.minimum(scaled, np.float32(1.0))
    return HsiCube(scaled, band_names=cube.band_names), peak


@dataclass(frozen=True)
class PatchSet:
    """Square crops of one source cube.

    Patches are read-only views into ``source``, so large sets are cheap.
    """

    source: HsiCube
    patch_size: int
    source_offsets: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.source_offsets)

    def __getitem__(self, i: int) -> np.ndarray:
        r, c = self.source_offsets[i]
        s = self.patch_size
        return self.source.data[:, r : r + s, c : c + s]

    @property
    def patches(self) -> list[np.ndarray]:
        return [self[i] for i in range(len(self))]

    @property
    def bands(self) -> int:
        return self.source.bands


def extract_patches(cube: HsiCube, size: int, count: int, seed: int) -> PatchSet:
    """Draw ``count`` random ``size x size`` crops, offsets uniform and with replacement."""
    if size < 1 or count < 1:
        raise ValueError("size and count must be >= 1")
    if size > min(cube.height, cube.width):
        raise ValueError(
            f"patch size {size} exceeds cube extent {cube.height}x{cube.width}"
        )
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, cube.height - size + 1, size=count)
    cols = rng.integers(0, cube.width - size + 1, size=count)
    offsets = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    return PatchSet(cube, int(size), offsets)


def stretch_band(band: np.ndarray, low: float = 2.0, high: float = 98.0) -> np.ndarray:
    """Percentile-stretch one band to uint8; a constant band maps to 128."""
    band = np.asarray(band, dtype=np.float64)
    lo, hi = np.percentile(band, [low, high])
    if not hi > lo:
        return np.full(band.shape, 128, dtype=np.uint8)
    scaled = np.clip((band - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 255.0).astype(np.uint8)


def pseudocolor(cube: HsiCube, r: int, g: int, b: int) -> np.ndarray:
    """Return an ``h x w x 3`` uint8 RGB composite of three bands."""
    for idx in (r, g, b):
        if not 0 <= idx < cube.bands:
            raise IndexError(f"band index {idx} out of range for {cube.bands} bands")
    return np.stack([stretch_band(cube.data[i]) for i in (r, g, b)], axis=-1)


def export_pseudocolor(cube: HsiCube, r: int, g: int, b: int, path) -> None:
    """Write a 2%-98% stretched RGB PNG of bands ``(r, g, b)`` (0-based)."""
    from PIL import Image

    rgb = pseudocolor(cube, r, g, b)
    Image.fromarray(rgb).save(os.fspath(path), format="PNG")
