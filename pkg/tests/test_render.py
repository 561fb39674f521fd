import struct
import zlib

import numpy as np
import pytest

from protolife.engine import World
from protolife.render import FLOOR, encode_png, render

from conftest import small_config


def decode_png(data: bytes) -> np.ndarray:
    """Minimal reader for the 8-bit RGB, filter-0 images the renderer writes."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, idat, size = 8, b"", None
    while pos < len(data):
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        tag, body = data[pos + 4:pos + 8], data[pos + 8:pos + 8 + n]
        assert struct.unpack(">I", data[pos + 8 + n:pos + 12 + n])[0] == zlib.crc32(tag + body)
        if tag == b"IHDR":
            size = struct.unpack(">II", body[:8])
        elif tag == b"IDAT":
            idat += body
        pos += 12 + n
    w, h = size
    raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8).reshape(h, 1 + 3 * w)
    assert (raw[:, 0] == 0).all()
    return raw[:, 1:].reshape(h, w, 3)


def u8(c):
    return tuple(int(round(v * 255)) for v in c)


def empty_world():
    return World(small_config(n_plants=0, n_protozoa=0, n_formations=0), populate=False)


def test_png_round_trip():
    img = np.random.default_rng(0).integers(0, 256, (7, 5, 3), dtype=np.uint8)
    assert np.array_equal(decode_png(encode_png(img)), img)


def test_empty_world_is_arena_and_void():
    w = empty_world()
    img = render(w, 4.0)
    R = w.cfg.world_radius
    n = img.shape[0]
    assert img.shape == (int(np.ceil(2 * R * 4.0)), int(np.ceil(2 * R * 4.0)), 3)
    colours = {tuple(p) for p in img.reshape(-1, 3)}
    assert colours == {u8(FLOOR), (0, 0, 0)}
    assert tuple(img[n // 2, n // 2]) == u8(FLOOR)
    assert tuple(img[0, 0]) == (0, 0, 0)
    # arena pixel count matches the disc area
    floor = (img == np.array(u8(FLOOR))).all(axis=2).sum()
    assert floor / 16.0 == pytest.approx(np.pi * R * R, rel=0.02)


def test_one_plant():
    w = empty_world()
    w.add_plant(0.0, 0.0)
    w.run(100)
    img = render(w, 8.0)
    n = img.shape[0]
    shade = u8(w.cells[0].render_colour)
    assert tuple(img[n // 2, n // 2]) == shade
    assert shade[1] > shade[0] and shade[1] > shade[2]
    green = (img == np.array(shade)).all(axis=2)
    r = w.cells[0].radius(w.cfg)
    assert green.sum() / 64.0 == pytest.approx(np.pi * r * r, rel=0.2)
    # chemical glow: tinted floor pixels around the plant
    glow = ~(img == np.array(u8(FLOOR))).all(axis=2) & ~green & (img.sum(axis=2) > 0)
    rows, cols = np.nonzero(glow)
    assert glow.sum() > 0
    # each blur pass spreads one grid pixel per axis; deposits cover pixels under the disc
    passes = 100 // w.cfg.grid_tick_interval + 1
    reach = r + (passes + 1) * w.grid.pixel + 1.0 / 8.0
    R = w.cfg.world_radius
    xs, ys = (cols + 0.5) / 8.0 - R, R - (rows + 0.5) / 8.0
    assert np.abs(xs).max() <= reach and np.abs(ys).max() <= reach


def test_render_deterministic():
    w = World(small_config())
    w.run(50)
    assert encode_png(render(w, 6.0)) == encode_png(render(w, 6.0))


def test_bad_scale():
    with pytest.raises(ValueError):
        render(empty_world(), 0.0)


def test_glow_tone_map():
    from protolife.render import glow
    chem = np.array([[0.0, 0.0, 0.0], [0.0, 1e-8, 0.0], [0.0, 1e-6, 0.0], [0.0, 1.0, 0.0], [2e-6, 1e-6, 0.0]])
    out = glow(chem)
    assert tuple(out[0]) == FLOOR
    assert out[1, 1] < out[2, 1] < out[3, 1] <= 1.0
    assert out[1, 0] == FLOOR[0] and out[1, 2] == FLOOR[2]
    # hue follows the channel ratio
    assert out[4, 0] - FLOOR[0] == pytest.approx(2 * (out[4, 1] - FLOOR[1]))
