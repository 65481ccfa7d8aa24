import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hud.cli import main
from hud.config import ConfigError, RunConfig, dump_config, parse_config_text, resolve_config
from hud.io import load_cube, payload_path
from hud.unmixing import check_abundances, load_endmembers


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert _run("make-synthetic", "--out", out, "--bands", 16, "--d", 3,
                "--height", 20, "--width", 20, "--seed", 3) == 0
    return out / "scene.hsc"


TINY = ["--patch-size", 8, "--patch-count", 16, "--T", 10, "--beta-start", 1e-3,
        "--beta-end", 0.3, "--steps", 3, "--batch-size", 2, "--base-width", 8,
        "--depth", 2, "--learning-rate", 1e-3]


@pytest.fixture(scope="module")
def trained(scene, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert _run("unmix", "--input", scene, "--d", 3, "--out", out) == 0
    assert _run("train", "--input", scene, "--out", out, *TINY) == 0
    return out


def test_make_synthetic_layout(scene):
    root = scene.parent
    assert load_cube(scene).shape == (16, 20, 20)
    A, meta = load_endmembers(root / "truth" / "endmembers.hsc")
    assert A.shape == (16, 3) and meta["mode"] == "synthetic"
    check_abundances(load_cube(root / "truth" / "abundances.hsc").data.astype(float), unity_tol=1e-6)


@pytest.mark.parametrize("mode", ["linear", "fcls"])
def test_unmix_writes_artifacts(scene, tmp_path, mode):
    assert _run("unmix", "--input", scene, "--d", 3, "--mode", mode, "--out", tmp_path) == 0
    A, meta = load_endmembers(tmp_path / "endmembers" / "endmembers.hsc")
    assert A.shape == (16, 3) and meta["d"] == 3
    x = load_cube(tmp_path / "endmembers" / "abundances.hsc")
    assert x.shape == (3, 20, 20)
    rep = json.loads((tmp_path / "reports" / "unmix.json").read_text())
    assert rep["mode"] == mode
    assert rep["rmse"] < 1e-3


def test_train_outputs(trained):
    ckpt = trained / "checkpoints" / "final"
    meta = json.loads((ckpt / "metadata.json").read_text())
    assert meta["step"] == 3 and meta["schedule"]["T"] == 10
    blob = (ckpt / "params.f32").read_bytes()
    assert len(blob) == 4 * meta["parameters"]["count"]
    lines = (trained / "reports" / "train_log.csv").read_text().splitlines()
    assert lines[0] == "step,loss" and len(lines) == 4
    assert all(float(l.split(",")[1]) > 0 for l in lines[1:])


def test_sample_is_deterministic(trained, tmp_path):
    ckpt = trained / "checkpoints" / "final"
    for name in ("a", "b"):
        assert _run("sample", "--checkpoint", ckpt, "--count", 4, "--seed", 7, "--out", tmp_path / name) == 0
    files = sorted(p.name for p in (tmp_path / "a" / "samples").iterdir())
    assert len(files) == 16  # 4 cubes + 4 abundances, each header + payload
    for f in files:
        assert (tmp_path / "a" / "samples" / f).read_bytes() == (tmp_path / "b" / "samples" / f).read_bytes()
    x = load_cube(tmp_path / "a" / "samples" / "abundance_000.hsc")
    assert x.shape == (3, 8, 8)


def test_sample_seed_changes_output(trained, tmp_path):
    ckpt = trained / "checkpoints" / "final"
    _run("sample", "--checkpoint", ckpt, "--count", 1, "--seed", 1, "--out", tmp_path / "a")
    _run("sample", "--checkpoint", ckpt, "--count", 1, "--seed", 2, "--out", tmp_path / "b")
    a = payload_path(tmp_path / "a" / "samples" / "cube_000.hsc").read_bytes()
    b = payload_path(tmp_path / "b" / "samples" / "cube_000.hsc").read_bytes()
    assert a != b


def test_eval_writes_report(scene, trained, tmp_path):
    _run("sample", "--checkpoint", trained / "checkpoints" / "final", "--count", 2, "--out", tmp_path)
    assert _run("eval", "--real", scene, "--samples", tmp_path / "samples", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "reports" / "metrics.json").read_text())
    assert rep["N_b"] == 2 and rep["block_size"] == 8
    assert 0 < rep["F_p"] <= 1


def test_train_refuses_other_dataset(trained, tmp_path):
    other = tmp_path / "other"
    assert _run("make-synthetic", "--out", other, "--bands", 16, "--d", 3,
                "--height", 20, "--width", 20, "--seed", 4) == 0
    assert _run("train", "--input", other / "scene.hsc", "--out", trained, *TINY) == 1


def test_train_needs_d_without_endmembers(scene, tmp_path, capsys):
    assert _run("train", "--input", scene, "--out", tmp_path, *TINY) == 1
    assert "--d" in capsys.readouterr().err


def test_missing_config_names_file(tmp_path, capsys):
    missing = tmp_path / "missing.toml"
    assert _run("train", "--config", missing) != 0
    assert "missing.toml" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert _run("frobnicate") != 0


def test_bad_numeric_flag(scene, tmp_path, capsys):
    assert _run("train", "--input", scene, "--out", tmp_path, "--d", 3, "--steps", -1) == 1
    assert "error" in capsys.readouterr().err


def test_dump_config_round_trip(scene, tmp_path):
    cfg_file = tmp_path / "base.cfg"
    cfg_file.write_text(f'input = "{scene}"\nsteps = 50  # short\nlearning_rate = 3e-4\n')
    dumped = tmp_path / "dumped.cfg"
    assert _run("train", "--config", cfg_file, "--seed", 9, "--dump-config", dumped) == 0
    again = tmp_path / "again.cfg"
    assert _run("train", "--config", dumped, "--dump-config", again) == 0
    assert dumped.read_text() == again.read_text()
    values = parse_config_text(dumped.read_text())
    assert values["steps"] == 50 and values["seed"] == 9 and values["learning_rate"] == 3e-4
    assert resolve_config(values, {}) == resolve_config(parse_config_text(again.read_text()), {})


def test_config_flags_override_file():
    cfg = resolve_config({"steps": 10, "seed": 1}, {"steps": 20, "seed": None})
    assert cfg.steps == 20 and cfg.seed == 1
    assert resolve_config({}, {}) == RunConfig()


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("colour = red\n")


def test_config_text_is_flat_key_value():
    text = dump_config(RunConfig(input="x.hsc", d=4))
    for line in text.splitlines():
        if line and not line.startswith("#"):
            assert " = " in line


def test_export_rgb(scene, tmp_path):
    assert _run("export-rgb", "--input", scene, "--bands", 10, 5, 1, "--output", tmp_path / "rgb.png") == 0
    assert (tmp_path / "rgb.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_export_rgb_bad_band(scene, tmp_path, capsys):
    assert _run("export-rgb", "--input", scene, "--bands", 10, 5, 99, "--output", tmp_path / "rgb.png") == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "hud", "make-synthetic", "--out", str(tmp_path),
         "--bands", "8", "--d", "2", "--height", "8", "--width", "8"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert Path(res.stdout.strip()).name == "scene.hsc"
