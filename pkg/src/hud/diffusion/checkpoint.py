"""Checkpoint directories.

Layout::

    <dir>/metadata.json    schedule, model hyperparameters, training config,
                           autoencoder reference, step, seed, parameter layout
    <dir>/params.f32       every tensor of ``model.state_dict()`` in its
                           iteration order, flattened C-order, float32 LE
    <dir>/endmembers.hsc   endmember matrix (+ .raw payload, .json sidecar)

The parameter order is the module registration order of :class:`UNet`; the
``parameter_layout`` entry of the metadata lists ``[name, shape]`` pairs in
that order so the blob can be decoded without this package.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from ..unmixing import UnmixingAutoencoder, load_endmembers, save_endmembers
from .schedule import NoiseSchedule, build_schedule
from .training import TrainConfig
from .unet import UNet, build_denoiser

FORMAT = "hud-checkpoint-1"
PARAMS_FILE = "params.f32"
ENDMEMBER_FILE = "endmembers.hsc"


@dataclass
class Checkpoint:
    model: UNet
    schedule: NoiseSchedule
    uae: UnmixingAutoencoder
    mode: str
    metadata: dict


def save_checkpoint(
    directory,
    model: UNet,
    cfg: TrainConfig,
    uae: UnmixingAutoencoder,
    step: int,
    extra: dict | None = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    layout = [[name, list(t.shape)] for name, t in state.items()]
    flat = np.concatenate(
        [t.detach().cpu().to(torch.float32).numpy().ravel() for t in state.values()]
    )
    (directory / PARAMS_FILE).write_bytes(flat.astype("<f4").tobytes())
    save_endmembers(uae.A, directory / ENDMEMBER_FILE, seed=(extra or {}).get("vca_seed"))
    meta = {
        "format": FORMAT,
        "step": int(step),
        "seed": int(cfg.seed),
        "schedule": {"T": cfg.T, "beta_start": cfg.beta_start, "beta_end": cfg.beta_end},
        "model": {**model.hparams(), "seed": int(getattr(model, "seed", 0))},
        "train": asdict(cfg),
        "uae": {"endmembers": ENDMEMBER_FILE, "mode": cfg.mode, "frozen": uae.frozen},
        "parameters": {
            "file": PARAMS_FILE,
            "dtype": "f32le",
            "count": int(flat.size),
            "layout": layout,
        },
    }
    if extra:
        meta["extra"] = extra
    (directory / "metadata.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return directory


def load_checkpoint(directory) -> Checkpoint:
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no checkpoint metadata at {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != FORMAT:
        raise ValueError(f"{meta_path}: unsupported checkpoint format {meta.get('format')!r}")

    hp = dict(meta["model"])
    model = build_denoiser(**hp)
    blob = np.frombuffer((directory / meta["parameters"]["file"]).read_bytes(), dtype="<f4")
    if blob.size != meta["parameters"]["count"]:
        raise ValueError(f"{directory}: parameter blob has {blob.size} values, expected {meta['parameters']['count']}")
    state = {}
    offset = 0
    for name, shape in meta["parameters"]["layout"]:
        size = int(np.prod(shape, dtype=np.int64))
        state[name] = torch.from_numpy(blob[offset : offset + size].reshape(shape).copy())
        offset += size
    model.load_state_dict(state, strict=True)
    model.eval()

    A, _ = load_endmembers(directory / meta["uae"]["endmembers"])
    uae = UnmixingAutoencoder(A, frozen=meta["uae"].get("frozen", True))
    sch = meta["schedule"]
    schedule = build_schedule(sch["T"], sch["beta_start"], sch["beta_end"])
    return Checkpoint(model, schedule, uae, meta["uae"]["mode"], meta)
