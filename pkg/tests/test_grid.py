import json
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chimneysim.grid import (Grid2D, GridFormatError, GridIOError, MaskGrid, SeismicImage,
                             VelocityModel, read_grid, render_grid, write_grid, write_image)


def test_write_encodes_little_endian_float32(tmp_path):
    write_grid(Grid2D([[3.5]], 4.0), tmp_path / "a.f32")
    assert (tmp_path / "a.f32").read_bytes() == bytes([0x00, 0x00, 0x60, 0x40])
    meta = json.loads((tmp_path / "a.json").read_text())
    assert meta["nz"] == 1 and meta["nx"] == 1 and meta["dx_m"] == 4.0
    assert meta["crc32"] == zlib.crc32(bytes([0x00, 0x00, 0x60, 0x40]))


def test_smallest_round_trip(tmp_path):
    (tmp_path / "g.f32").write_bytes(np.array([1.0, 2.0], "<f4").tobytes())
    (tmp_path / "g.json").write_text(json.dumps({"nz": 1, "nx": 2, "dx_m": 4}))
    g = read_grid(tmp_path / "g.f32")
    assert g.shape == (1, 2) and g.dx == 4.0
    np.testing.assert_array_equal(g.values, [[1.0, 2.0]])


def test_size_mismatch_is_reported(tmp_path):
    (tmp_path / "g.f32").write_bytes(bytes(12))
    (tmp_path / "g.json").write_text(json.dumps({"nz": 2, "nx": 2, "dx_m": 4}))
    with pytest.raises(GridFormatError) as e:
        read_grid(tmp_path / "g.f32")
    assert e.value.expected == 16 and e.value.actual == 12
    assert "16" in str(e.value) and "12" in str(e.value)


def test_non_finite_payload_names_first_index(tmp_path):
    v = np.zeros(6, "<f4")
    v[4] = np.nan
    v[5] = np.inf
    (tmp_path / "g.f32").write_bytes(v.tobytes())
    (tmp_path / "g.json").write_text(json.dumps({"nz": 2, "nx": 3, "dx_m": 1}))
    with pytest.raises(GridFormatError) as e:
        read_grid(tmp_path / "g.f32")
    assert e.value.index == 4


def test_crc_mismatch_detected(tmp_path):
    write_grid(Grid2D(np.ones((2, 2)), 1.0), tmp_path / "g.f32")
    (tmp_path / "g.f32").write_bytes(np.zeros(4, "<f4").tobytes())
    with pytest.raises(GridFormatError, match="CRC"):
        read_grid(tmp_path / "g.f32")


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(GridIOError):
        read_grid(tmp_path / "nope.f32")


finite32 = st.floats(allow_nan=False, allow_infinity=False, width=32)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=finite32),
       st.floats(0.1, 100.0))
def test_round_trip_is_bit_exact(tmp_path_factory, values, dx):
    d = tmp_path_factory.mktemp("rt")
    g = SeismicImage(values, dx)
    write_grid(g, d / "g.f32")
    back = read_grid(d / "g.f32")
    assert isinstance(back, SeismicImage)
    assert back.values.astype(np.float32).tobytes() == values.tobytes()
    assert back == g


def test_index_convention(tmp_path):
    v = np.zeros((3, 5))
    v[2, 1] = 7.0
    write_grid(Grid2D(v, 2.0), tmp_path / "g.f32")
    raw = np.frombuffer((tmp_path / "g.f32").read_bytes(), "<f4")
    assert np.flatnonzero(raw).tolist() == [2 * 5 + 1]


def test_mask_round_trip_one_byte_per_cell(tmp_path):
    m = MaskGrid(np.eye(3, 4, dtype=bool), 4.0)
    write_grid(m, tmp_path / "m.u8")
    assert len((tmp_path / "m.u8").read_bytes()) == 12
    assert read_grid(tmp_path / "m.u8") == m


def test_kind_dispatch(tmp_path):
    v = VelocityModel(np.full((2, 2), 1500.0), 4.0)
    write_grid(v, tmp_path / "v.f32")
    assert isinstance(read_grid(tmp_path / "v.f32"), VelocityModel)
    assert json.loads((tmp_path / "v.json").read_text())["kind"] == "velocity"


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.zeros(3), np.zeros((2, 2, 2))])
def test_invalid_shapes_rejected(bad):
    with pytest.raises(ValueError):
        Grid2D(bad, 1.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(np.zeros((2, 2)), 0.0)
    with pytest.raises(GridFormatError):
        Grid2D([[0.0, np.nan]], 1.0)
    with pytest.raises(ValueError, match="sanity"):
        VelocityModel([[50.0]], 1.0)
    VelocityModel([[50.0]], 1.0, vmin=10.0)


def test_values_are_read_only():
    g = Grid2D(np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        g.values[0, 0] = 1.0


def test_render_constant_grid_is_mid_gray():
    img = render_grid(Grid2D(np.full((3, 4), 2.5), 1.0))
    assert img.startswith(b"P5\n4 3\n255\n")
    assert set(img[len(b"P5\n4 3\n255\n"):]) == {128}


def test_render_two_valued_grid_hits_endpoints():
    img = render_grid(Grid2D([[0.0, 1.0], [1.0, 0.0]], 1.0), 0, 100)
    assert sorted(set(img[-4:])) == [0, 255]


def test_render_percentile_clip_fraction():
    rng = np.random.default_rng(0)
    img = render_grid(Grid2D(rng.standard_normal((100, 100)), 1.0), 1, 99)
    pix = np.frombuffer(img[len(b"P5\n100 100\n255\n"):], np.uint8)
    assert np.mean((pix == 0) | (pix == 255)) <= 0.02 + 1e-9


def test_render_rejects_bad_percentiles():
    with pytest.raises(ValueError):
        render_grid(Grid2D([[1.0]], 1.0), 50, 50)


def test_png_output(tmp_path):
    pytest.importorskip("PIL")
    write_image(Grid2D(np.arange(6.0).reshape(2, 3), 1.0), tmp_path / "a.png")
    assert (tmp_path / "a.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
