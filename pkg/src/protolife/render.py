"""Static raster frames of a world, written as 8-bit RGB PNG.

The PNG encoder uses only ``zlib`` and ``struct``. Drawing order: void,
arena floor tinted by the chemical solution (log tone map), rocks, cells, bindings, attachment
glyphs. Same world and scale give the same bytes.
"""

from __future__ import annotations

import math
import struct
import zlib

import numpy as np

from .cells import CellKind
from .engine import World

VOID = (0.0, 0.0, 0.0)
FLOOR = (0.08, 0.08, 0.1)
ROCK = (0.45, 0.42, 0.4)
LINK = (1.0, 1.0, 1.0)
GLYPH = {  # attachment kind -> glyph colour
    0: (0.2, 0.9, 0.9),
    1: (1.0, 0.3, 0.1),
    2: (0.9, 0.2, 0.9),
    3: (1.0, 1.0, 0.2),
    4: (0.3, 0.5, 1.0),
}


def write_png(path, rgb: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(rgb))


def encode_png(rgb: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array."""
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 array")
    h, w, _ = rgb.shape
    raw = np.concatenate([np.zeros((h, 1), dtype=np.uint8), rgb.reshape(h, w * 3)], axis=1)

    def chunk(tag: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    return (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw.tobytes(), 9))
            + chunk(b"IEND", b""))


GLOW_FLOOR = 1e-9  # solution total that starts to show
GLOW_DECADES = 9.0  # log10 span from first visible to full brightness
GLOW_GAIN = 0.8


def glow(chem: np.ndarray) -> np.ndarray:
    """Floor colour tinted by solution hue; brightness is logarithmic in concentration.

    Solution values span about 1e-9 at blur fringes to near 1 under plants;
    a fixed log tone map shows both. Empty pixels stay exactly FLOOR.
    """
    total = chem.sum(axis=-1, keepdims=True)
    safe = np.where(total > 0.0, total, 1.0)
    level = np.clip(np.log10(np.maximum(safe, GLOW_FLOOR) / GLOW_FLOOR) / GLOW_DECADES, 0.0, 1.0)
    level = np.where(total > 0.0, level, 0.0)
    hue = chem / np.maximum(chem.max(axis=-1, keepdims=True), 1e-300)
    return np.clip(np.asarray(FLOOR) + GLOW_GAIN * level * hue, 0.0, 1.0)


class Canvas:
    def __init__(self, world_radius: float, scale: float) -> None:
        self.R = world_radius
        self.scale = scale
        self.n = max(1, int(math.ceil(2.0 * world_radius * scale)))
        self.img = np.zeros((self.n, self.n, 3), dtype=np.float64)
        c = (np.arange(self.n) + 0.5) / scale - world_radius
        self.xs = c
        self.ys = c[::-1]  # image row 0 is the top (+y)

    def _box(self, x0: float, y0: float, x1: float, y1: float):
        s, R, n = self.scale, self.R, self.n
        c0 = max(0, int(math.floor((x0 + R) * s)))
        c1 = min(n, int(math.ceil((x1 + R) * s)) + 1)
        r0 = max(0, int(math.floor((R - y1) * s)))
        r1 = min(n, int(math.ceil((R - y0) * s)) + 1)
        return r0, r1, c0, c1

    def disc(self, x: float, y: float, r: float, colour) -> None:
        r = max(r, 0.5 / self.scale)
        r0, r1, c0, c1 = self._box(x - r, y - r, x + r, y + r)
        if r0 >= r1 or c0 >= c1:
            return
        dx = self.xs[c0:c1][None, :] - x
        dy = self.ys[r0:r1][:, None] - y
        m = dx * dx + dy * dy <= r * r
        self.img[r0:r1, c0:c1][m] = colour

    def triangle(self, verts, colour) -> None:
        xs = [v[0] for v in verts]
        ys = [v[1] for v in verts]
        r0, r1, c0, c1 = self._box(min(xs), min(ys), max(xs), max(ys))
        if r0 >= r1 or c0 >= c1:
            return
        px = self.xs[c0:c1][None, :]
        py = self.ys[r0:r1][:, None]
        (ax, ay), (bx, by), (cx, cy) = verts
        d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
        d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
        d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        self.img[r0:r1, c0:c1][~(neg & pos)] = colour

    def line(self, x0: float, y0: float, x1: float, y1: float, colour) -> None:
        steps = max(2, int(math.hypot(x1 - x0, y1 - y0) * self.scale * 2) + 1)
        for t in np.linspace(0.0, 1.0, steps):
            x, y = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            c = int((x + self.R) * self.scale)
            r = int((self.R - y) * self.scale)
            if 0 <= r < self.n and 0 <= c < self.n:
                self.img[r, c] = colour

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.img * 255.0), 0, 255).astype(np.uint8)


def render(world: World, scale: float = 8.0) -> np.ndarray:
    """Draw ``world`` at ``scale`` pixels per metre; returns (H, W, 3) uint8."""
    if scale <= 0:
        raise ValueError("render scale must be positive")
    R = world.cfg.world_radius
    cv = Canvas(R, scale)
    xx, yy = np.meshgrid(cv.xs, cv.ys)
    inside = xx * xx + yy * yy <= R * R
    g = world.grid
    col = np.clip(((xx + R) / g.pixel).astype(int), 0, g.size - 1)
    row = np.clip(((yy + R) / g.pixel).astype(int), 0, g.size - 1)
    cv.img[inside] = glow(g.pixels[row, col][inside])

    for formation in world.rocks:
        for tri in formation:
            cv.triangle(tri, ROCK)
    order = [world.cells[i] for i in sorted(world.cells)]
    # engulfed prey first so the predator draws over them
    for cell in sorted(order, key=lambda c: (c.engulfed_by < 0, c.id)):
        b = world.physics.bodies[cell.body_id]
        cv.disc(b.x, b.y, b.radius, cell.render_colour)
    for bid in sorted(world.bindings):
        bnd = world.bindings[bid]
        a = world.physics.bodies[world.cells[bnd.cell_a].body_id]
        b = world.physics.bodies[world.cells[bnd.cell_b].body_id]
        cv.line(a.x, a.y, b.x, b.y, LINK)
    for cell in order:
        if cell.kind is not CellKind.PROTOZOAN:
            continue
        b = world.physics.bodies[cell.body_id]
        for node in cell.nodes:
            a = b.angle + node.angle
            gx, gy = b.x + b.radius * math.cos(a), b.y + b.radius * math.sin(a)
            colour = GLYPH[int(node.attachment.kind)] if node.attachment is not None else (0.6, 0.6, 0.6)
            cv.disc(gx, gy, 0.15 * b.radius, colour)
    return cv.to_uint8()
