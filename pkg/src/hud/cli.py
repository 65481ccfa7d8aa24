"""Command-line front end: ``hud <subcommand> ...``.

Every output lands under ``--out`` in fixed subdirectories: ``endmembers/``,
``checkpoints/``, ``samples/`` and ``reports/``. All randomness derives from
``--seed``. ``HUD_THREADS`` caps torch threads; 0 (default) is the
single-threaded deterministic mode.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from . import metrics, unmixing
from .config import ConfigError, RunConfig, dump_config, load_config_file, resolve_config
from .synthetic import make_synthetic

log = logging.getLogger("hud")

ENDMEMBER_DIR = "endmembers"
CHECKPOINT_DIR = "checkpoints"
SAMPLE_DIR = "samples"
REPORT_DIR = "reports"


def _subdir(out, name) -> Path:
    path = Path(out) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dataset_digest(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    h.update(hio.payload_path(path).read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_make_synthetic(args) -> int:
    scene = make_synthetic(
        bands=args.bands, d=args.d, height=args.height, width=args.width,
        noise=args.noise, pure_pixels=not args.no_pure_pixels, seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hio.save_cube(scene.cube, out / "scene.hsc")
    truth = _subdir(out, "truth")
    unmixing.save_endmembers(scene.endmembers, truth / "endmembers.hsc", seed=args.seed, mode="synthetic")
    hio.save_cube(hio.HsiCube(scene.abundances), truth / "abundances.hsc")
    print(out / "scene.hsc")
    return 0


def cmd_unmix(args) -> int:
    cube = hio.load_cube(args.input)
    A = unmixing.vca(cube, args.d, seed=args.seed)
    uae = unmixing.UnmixingAutoencoder(A)
    x = unmixing.encode(uae, cube, mode=args.mode)
    em_dir = _subdir(args.out, ENDMEMBER_DIR)
    unmixing.save_endmembers(A, em_dir / "endmembers.hsc", seed=args.seed)
    hio.save_cube(hio.HsiCube(x), em_dir / "abundances.hsc")
    rep = unmixing.reconstruction_report(cube, unmixing.decode(uae, x))
    _write_json(
        _subdir(args.out, REPORT_DIR) / "unmix.json",
        {"d": args.d, "mode": args.mode, "seed": args.seed, **rep._asdict()},
    )
    print(json.dumps(rep._asdict()))
    return 0


_TRAIN_FLAGS = {
    "input": str, "out": str, "endmembers": str, "d": int, "mode": str,
    "patch_size": int, "patch_count": int, "T": int, "beta_start": float,
    "beta_end": float, "steps": int, "batch_size": int, "learning_rate": float,
    "base_width": int, "depth": int, "checkpoint_interval": int, "seed": int,
}


def _train_config(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name) for name in _TRAIN_FLAGS}
    return resolve_config(file_values, overrides)


def cmd_train(args) -> int:
    from .diffusion import TrainConfig, TrainingLog, build_denoiser, save_checkpoint, train

    cfg = _train_config(args)
    if args.dump_config:
        Path(args.dump_config).write_text(dump_config(cfg), encoding="utf-8")
        print(args.dump_config)
        return 0
    cfg.validate()

    cube = hio.load_cube(cfg.input)
    digest = _dataset_digest(cfg.input)
    ckpt_dir = _subdir(cfg.out, CHECKPOINT_DIR)
    marker = ckpt_dir / "dataset.json"
    if marker.is_file():
        previous = json.loads(marker.read_text(encoding="utf-8"))
        if previous.get("sha256") != digest:
            raise ConfigError(
                f"{ckpt_dir} already holds a model for {previous.get('input')}; "
                "use a separate --out per dataset"
            )
    _write_json(marker, {"input": str(cfg.input), "sha256": digest})

    em_path = Path(cfg.endmembers) if cfg.endmembers else Path(cfg.out) / ENDMEMBER_DIR / "endmembers.hsc"
    if em_path.is_file():
        A, _ = unmixing.load_endmembers(em_path)
        if cfg.d and cfg.d != A.shape[1]:
            raise ConfigError(f"--d {cfg.d} disagrees with {em_path} (d={A.shape[1]})")
    else:
        if not cfg.d:
            raise ConfigError(f"no endmember file at {em_path}; pass --d to extract them")
        A = unmixing.vca(cube, cfg.d, seed=cfg.seed)
        unmixing.save_endmembers(A, _subdir(cfg.out, ENDMEMBER_DIR) / "endmembers.hsc", seed=cfg.seed)
    uae = unmixing.UnmixingAutoencoder(A)

    patches = hio.extract_patches(cube, cfg.patch_size, cfg.patch_count, cfg.seed)
    model = build_denoiser(uae.d, base_width=cfg.base_width, depth=cfg.depth, seed=cfg.seed)
    tcfg = TrainConfig(
        steps=cfg.steps, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
        seed=cfg.seed, T=cfg.T, beta_start=cfg.beta_start, beta_end=cfg.beta_end,
        patch_size=cfg.patch_size, checkpoint_interval=cfg.checkpoint_interval, mode=cfg.mode,
    )
    meta = {"dataset_sha256": digest, "vca_seed": cfg.seed}
    log_path = _subdir(cfg.out, REPORT_DIR) / "train_log.csv"
    with TrainingLog(log_path) as tlog:
        train(model, patches, uae, tcfg, log=tlog, checkpoint_dir=ckpt_dir, checkpoint_meta=meta)
    final = save_checkpoint(ckpt_dir / "final", model, tcfg, uae, step=cfg.steps, extra=meta)
    print(final)
    return 0


def cmd_sample(args) -> int:
    from .diffusion import load_checkpoint, sample_abundances

    ckpt = load_checkpoint(args.checkpoint)
    size = args.size or ckpt.metadata["train"]["patch_size"]
    x = sample_abundances(ckpt.model, ckpt.schedule, args.count, size, args.seed)
    out = _subdir(args.out, SAMPLE_DIR)
    for i, xi in enumerate(x):
        unmixing.check_abundances(xi)
        hio.save_cube(unmixing.decode(ckpt.uae, xi), out / f"cube_{i:03d}.hsc")
        hio.save_cube(hio.HsiCube(xi), out / f"abundance_{i:03d}.hsc")
    print(out)
    return 0


def _collect_samples(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(sorted(p.glob("cube_*.hsc")))
        else:
            found.append(p)
    if not found:
        raise FileNotFoundError("no generated cubes found")
    return found


def cmd_eval(args) -> int:
    real = hio.load_cube(args.real)
    generated = [hio.load_cube(p) for p in _collect_samples(args.samples)]
    report = metrics.metric_report(generated, real, block_size=args.block_size, stride=args.stride)
    path = _subdir(args.out, REPORT_DIR) / "metrics.json"
    path.write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.to_json())
    return 0


def cmd_export_rgb(args) -> int:
    cube = hio.load_cube(args.input)
    r, g, b = args.bands
    hio.export_pseudocolor(cube, r, g, b, args.output)
    print(args.output)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hud", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("make-synthetic", help="write a synthetic linear-mixture scene")
    p.add_argument("--out", required=True)
    p.add_argument("--bands", type=int, default=64)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--no-pure-pixels", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_synthetic)

    p = sub.add_parser("unmix", help="extract endmembers and abundances")
    p.add_argument("--input", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=("linear", "fcls"), default="linear")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("train", help="train the latent diffusion model")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--dump-config", metavar="PATH", help="write the effective config and exit")
    for name, kind in _TRAIN_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate cubes from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="point fidelity / block diversity report")
    p.add_argument("--real", required=True)
    p.add_argument("--samples", nargs="+", required=True, help="cube files or sample directories")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-rgb", help="pseudo-color PNG of three bands")
    p.add_argument("--input", required=True)
    p.add_argument("--bands", type=int, nargs=3, required=True, metavar=("R", "G", "B"))
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_export_rgb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    from .diffusion import configure_threads

    try:
        configure_threads()
        return args.func(args)
    except (OSError, ValueError, np.linalg.LinAlgError, FloatingPointError, IndexError, KeyError) as exc:
        print(f"hud {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
