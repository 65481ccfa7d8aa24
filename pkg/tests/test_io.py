import json

import numpy as np
import pytest
from PIL import Image

from hud.io import (
    CubeFormatError,
    HsiCube,
    export_pseudocolor,
    extract_patches,
    load_cube,
    normalize,
    payload_path,
    pseudocolor,
    save_cube,
)
from oracles import percentile_linear


@pytest.fixture
def cube(rng):
    return HsiCube(rng.uniform(0, 3, size=(5, 7, 6)))


def test_round_trip_is_bit_exact(tmp_path, cube):
    save_cube(cube, tmp_path / "c.hsc")
    back = load_cube(tmp_path / "c.hsc")
    assert back == cube
    assert back.data.tobytes() == cube.data.tobytes()


def test_round_trip_keeps_band_names(tmp_path):
    cube = HsiCube(np.ones((2, 1, 1)), band_names=["blue", "red"])
    save_cube(cube, tmp_path / "n.hsc")
    assert load_cube(tmp_path / "n.hsc").band_names == ("blue", "red")


def test_degenerate_cube(tmp_path):
    save_cube(HsiCube(np.full((1, 1, 1), 0.5)), tmp_path / "one.hsc")
    back = load_cube(tmp_path / "one.hsc")
    assert back.shape == (1, 1, 1)
    assert back.data.ravel().tolist() == [0.5]


def test_header_and_payload_layout(tmp_path):
    data = np.arange(12, dtype=np.float32).reshape(3, 2, 2)
    save_cube(HsiCube(data), tmp_path / "c.hsc")
    header = json.loads((tmp_path / "c.hsc").read_text())
    assert header == {
        "magic": "HSC1", "bands": 3, "height": 2, "width": 2,
        "dtype": "f32le", "layout": "band-major",
    }
    raw = payload_path(tmp_path / "c.hsc").read_bytes()
    assert len(raw) == 12 * 4
    # band varies slowest, then row, then column
    assert np.frombuffer(raw, "<f4").tolist() == list(range(12))


def test_saving_twice_gives_identical_files(tmp_path, cube):
    save_cube(cube, tmp_path / "a.hsc")
    save_cube(HsiCube(cube.data.copy()), tmp_path / "b.hsc")
    assert (tmp_path / "a.hsc").read_bytes() == (tmp_path / "b.hsc").read_bytes()
    assert payload_path(tmp_path / "a.hsc").read_bytes() == payload_path(tmp_path / "b.hsc").read_bytes()


def test_nan_cube_rejected_before_write(tmp_path):
    data = np.ones((2, 2, 2))
    data[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        save_cube(data, tmp_path / "bad.hsc")
    assert not (tmp_path / "bad.hsc").exists()


def test_size_mismatch(tmp_path):
    (tmp_path / "s.hsc").write_text(json.dumps(
        {"magic": "HSC1", "bands": 2, "height": 2, "width": 2, "dtype": "f32le", "layout": "band-major"}
    ))
    payload_path(tmp_path / "s.hsc").write_bytes(np.zeros(7, "<f4").tobytes())
    with pytest.raises(CubeFormatError, match="needs 32 bytes"):
        load_cube(tmp_path / "s.hsc")


def test_magic_mismatch(tmp_path, cube):
    save_cube(cube, tmp_path / "m.hsc")
    header = json.loads((tmp_path / "m.hsc").read_text())
    header["magic"] = "HSC2"
    (tmp_path / "m.hsc").write_text(json.dumps(header))
    with pytest.raises(CubeFormatError, match="magic"):
        load_cube(tmp_path / "m.hsc")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_cube(tmp_path / "nope.hsc")


def test_non_finite_payload(tmp_path, cube):
    save_cube(cube, tmp_path / "f.hsc")
    raw = bytearray(payload_path(tmp_path / "f.hsc").read_bytes())
    raw[:4] = np.array([np.inf], "<f4").tobytes()
    payload_path(tmp_path / "f.hsc").write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="non-finite"):
        load_cube(tmp_path / "f.hsc")


# -- patches -----------------------------------------------------------------

def test_full_size_patch_has_single_position(rng):
    cube = HsiCube(rng.random((3, 64, 64)))
    ps = extract_patches(cube, 64, 3, seed=1)
    assert ps.source_offsets == ((0, 0),) * 3
    for p in ps.patches:
        np.testing.assert_array_equal(p, cube.data)


def test_patches_reproducible_and_contiguous(rng):
    cube = HsiCube(rng.random((4, 20, 17)))
    a = extract_patches(cube, 8, 50, seed=3)
    b = extract_patches(cube, 8, 50, seed=3)
    assert a.source_offsets == b.source_offsets
    for (r, c), p in zip(a.source_offsets, a.patches):
        assert 0 <= r <= 20 - 8 and 0 <= c <= 17 - 8
        assert p.shape == (4, 8, 8)
        np.testing.assert_array_equal(p, cube.data[:, r : r + 8, c : c + 8])


def test_patch_too_large(rng):
    with pytest.raises(ValueError):
        extract_patches(HsiCube(rng.random((2, 10, 12))), 11, 1, seed=0)


def test_offsets_uniform_over_positions(rng):
    # 33x33 with 32px patches: 4 positions, each Binomial(10000, 1/4)
    cube = HsiCube(rng.random((1, 33, 33)))
    ps = extract_patches(cube, 32, 10_000, seed=1234)
    counts = {}
    for off in ps.source_offsets:
        counts[off] = counts.get(off, 0) + 1
    assert set(counts) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    for n in counts.values():
        assert abs(n - 2500) <= 3 * sigma


# -- normalize ------------------------------------------------------------------

def test_normalize_scale(rng):
    data = rng.uniform(0, 4000, size=(3, 4, 4))
    data[1, 2, 3] = 4000
    out, scale = normalize(HsiCube(data))
    assert scale == 4000.0
    assert out.data.max() == 1.0


def test_normalize_idempotent(rng):
    once, _ = normalize(HsiCube(rng.uniform(0, 9, size=(3, 4, 4))))
    twice, scale = normalize(once)
    assert scale == 1.0
    assert twice == once


def test_normalize_preserves_spectral_direction(rng):
    cube = HsiCube(rng.uniform(0.1, 50, size=(6, 5, 5)))
    out, _ = normalize(cube)
    a = cube.pixels()
    b = out.pixels()
    cos = np.sum(a * b, axis=0) / (np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=0))
    np.testing.assert_allclose(cos, 1.0, atol=1e-7)


def test_normalize_all_zero():
    with pytest.raises(ValueError):
        normalize(HsiCube(np.zeros((2, 2, 2))))


# -- pseudo-color -----------------------------------------------------------------

def test_constant_band_is_mid_gray():
    data = np.zeros((3, 4, 5))
    data[0] = 0.7
    data[1] = np.linspace(0, 1, 20).reshape(4, 5)
    rgb = pseudocolor(HsiCube(data), 0, 1, 2)
    assert np.all(rgb[..., 0] == 128)
    assert np.all(rgb[..., 2] == 128)


def test_ramp_matches_percentile_oracle():
    values = np.arange(256) / 255.0
    cube = HsiCube(np.tile(values.reshape(1, 16, 16), (3, 1, 1)))
    rgb = pseudocolor(cube, 0, 1, 2)
    lo = percentile_linear(values, 2)
    hi = percentile_linear(values, 98)
    expected = np.clip((values - lo) / (hi - lo), 0, 1) * 255
    got = rgb[..., 0].ravel().astype(float)
    assert np.max(np.abs(got - expected)) <= 1.0
    assert got[0] == 0 and got[-1] == 255


def test_export_png(tmp_path, rng):
    cube = HsiCube(rng.random((220, 6, 9)))
    export_pseudocolor(cube, 46, 17, 11, tmp_path / "rgb.png")
    img = Image.open(tmp_path / "rgb.png")
    assert img.mode == "RGB" and img.size == (9, 6)


def test_export_band_out_of_range(tmp_path, rng):
    with pytest.raises(IndexError):
        export_pseudocolor(HsiCube(rng.random((3, 2, 2))), 0, 1, 3, tmp_path / "x.png")
