"""Chemical solution: an RGB field over the arena.

Plants and meat paint their colour into it, a 3x3 box blur spreads it, and
protozoa skim plant-green or meat-red pixels back out as food.

Mass bookkeeping: a pixel holding channel value ``v`` carries
``v * mass_per_unit`` mass, where ``mass_per_unit`` is
``chem_mass_per_area`` times the pixel area. Each channel carries energy at
a fixed density (red = meat, green = plant, blue configurable), so food
pulled out of a channel brings exactly the energy that went in.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import uniform_filter

RED, GREEN, BLUE = 0, 1, 2


class ChemGrid:
    def __init__(self, size: int, world_radius: float, *, mass_per_area: float = 2.0,
                 channel_energy: tuple[float, float, float] = (2.0, 1.0, 1.0),
                 dominant_min: float = 0.5, dominance_ratio: float = 1.5,
                 dominance_additive: bool = False) -> None:
        self.size = size
        self.world_radius = world_radius
        self.pixel = 2.0 * world_radius / size
        self.mass_per_unit = mass_per_area * self.pixel * self.pixel
        self.channel_energy = np.array(channel_energy, dtype=np.float64)
        self.dominant_min = dominant_min
        self.dominance_ratio = dominance_ratio
        self.dominance_additive = dominance_additive
        self.pixels = np.zeros((size, size, 3), dtype=np.float64)
        centres = -world_radius + (np.arange(size) + 0.5) * self.pixel
        self.centres = centres
        yy, xx = np.meshgrid(centres, centres, indexing="ij")
        self.mask = (xx * xx + yy * yy) <= world_radius * world_radius
        self._mask_f = self.mask.astype(np.float64)[..., None]

    @classmethod
    def from_config(cls, cfg) -> "ChemGrid":
        return cls(cfg.chem_grid_size, cfg.world_radius,
                   mass_per_area=cfg.chem_mass_per_area,
                   channel_energy=(cfg.energy_density_meat, cfg.energy_density_plant,
                                   cfg.blue_energy_density),
                   dominant_min=cfg.dominant_min, dominance_ratio=cfg.dominance_ratio,
                   dominance_additive=cfg.dominance_additive)

    # -- geometry -----------------------------------------------------------

    def to_grid(self, x: float, y: float) -> tuple[float, float]:
        """World point -> fractional (col, row)."""
        return (x + self.world_radius) / self.pixel, (y + self.world_radius) / self.pixel

    def footprint(self, cx: float, cy: float, r: float):
        """(row slice, col slice, bool mask) of in-arena pixels whose centre lies in the disc.

        A disc smaller than a pixel still claims the pixel under its centre.
        """
        n = self.size
        p = self.pixel
        R = self.world_radius
        c0 = max(0, math.floor((cx - r + R) / p))
        c1 = min(n, math.ceil((cx + r + R) / p) + 1)
        r0 = max(0, math.floor((cy - r + R) / p))
        r1 = min(n, math.ceil((cy + r + R) / p) + 1)
        if c0 >= c1 or r0 >= r1:
            return None
        xs = self.centres[c0:c1] - cx
        ys = self.centres[r0:r1] - cy
        inside = (ys[:, None] ** 2 + xs[None, :] ** 2) <= r * r
        inside &= self.mask[r0:r1, c0:c1]
        if not inside.any():
            col = math.floor((cx + R) / p)
            row = math.floor((cy + R) / p)
            if not (0 <= col < n and 0 <= row < n) or not self.mask[row, col]:
                return None
            return slice(row, row + 1), slice(col, col + 1), np.ones((1, 1), dtype=bool)
        return slice(r0, r1), slice(c0, c1), inside

    # -- totals -------------------------------------------------------------

    def channel_sums(self) -> np.ndarray:
        return np.einsum("ijk->k", self.pixels)

    def resident_mass(self) -> float:
        return float(self.channel_sums().sum()) * self.mass_per_unit

    def resident_energy(self) -> float:
        return float(self.channel_sums() @ self.channel_energy) * self.mass_per_unit

    # -- operations ---------------------------------------------------------

    def deposit(self, cx: float, cy: float, r: float, colour, fraction: float,
                max_mass: float = math.inf, max_energy: float = math.inf) -> tuple[float, float]:
        """Blend pixels under the disc toward ``colour`` by ``fraction``.

        Channels already at or above the colour are left alone, so a deposit
        only ever adds material. The blend shrinks if the moved mass or
        energy would exceed the budgets. Returns (mass, energy) moved.
        """
        if not 0.0 < fraction <= 1.0:
            raise ValueError("deposit fraction must be in (0, 1]")
        fp = self.footprint(cx, cy, r)
        if fp is None:
            return 0.0, 0.0
        rows, cols, inside = fp
        block = self.pixels[rows, cols]
        target = np.asarray(colour, dtype=np.float64)
        gap = np.clip(target - block, 0.0, None) * inside[..., None]
        per_channel = gap.sum(axis=(0, 1))
        mass = float(per_channel.sum()) * fraction * self.mass_per_unit
        energy = float(per_channel @ self.channel_energy) * fraction * self.mass_per_unit
        if mass <= 0.0:
            return 0.0, 0.0
        scale = 1.0
        if mass > max_mass:
            scale = max_mass / mass
        if energy > max_energy:
            scale = min(scale, max_energy / energy)
        if scale <= 0.0:
            return 0.0, 0.0
        a = fraction * scale
        delta = a * gap
        self.pixels[rows, cols] = block + delta
        moved = delta.sum(axis=(0, 1))
        return (float(moved.sum()) * self.mass_per_unit,
                float(moved @ self.channel_energy) * self.mass_per_unit)

    def classify(self, block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Boolean (plant-like, meat-like) masks for an (..., 3) pixel array."""
        r, g, b = block[..., RED], block[..., GREEN], block[..., BLUE]
        k = self.dominance_ratio
        if self.dominance_additive:
            plant = (g > self.dominant_min) & (g > r + k) & (g > b + k)
            meat = (r > self.dominant_min) & (r > g + k) & (r > b + k)
        else:
            plant = (g > self.dominant_min) & (g > k * r) & (g > k * b)
            meat = (r > self.dominant_min) & (r > k * g) & (r > k * b)
        return plant, meat

    def extract(self, cx: float, cy: float, r: float, fraction: float) -> tuple[float, float]:
        """Skim ``fraction`` of the dominant channel from classified pixels under the disc.

        Returns (plant food mass, meat food mass). Only the dominant channel
        drops, which pulls the pixel toward grey.
        """
        fp = self.footprint(cx, cy, r)
        if fp is None or fraction <= 0.0:
            return 0.0, 0.0
        rows, cols, inside = fp
        block = self.pixels[rows, cols]
        plant, meat = self.classify(block)
        plant &= inside
        meat &= inside
        if not plant.any() and not meat.any():
            return 0.0, 0.0
        dg = np.where(plant, fraction * block[..., GREEN], 0.0)
        dr = np.where(meat, fraction * block[..., RED], 0.0)
        block = block.copy()
        block[..., GREEN] -= dg
        block[..., RED] -= dr
        self.pixels[rows, cols] = block
        return float(dg.sum()) * self.mass_per_unit, float(dr.sum()) * self.mass_per_unit

    def diffuse(self) -> tuple[float, float]:
        """3x3 box blur; material landing in the void or off the grid is lost.

        Returns the (mass, energy) lost, which the caller tallies as the
        diffusion sink.
        """
        before = self.channel_sums()
        blurred = uniform_filter(self.pixels, size=(3, 3, 1), mode="constant", cval=0.0)
        blurred *= self._mask_f
        np.clip(blurred, 0.0, 1.0, out=blurred)
        self.pixels = blurred
        lost = before - self.channel_sums()
        return float(lost.sum()) * self.mass_per_unit, float(lost @ self.channel_energy) * self.mass_per_unit

    def to_bytes(self) -> bytes:
        return self.pixels.astype("<f8").tobytes()

    def load_bytes(self, data: bytes) -> None:
        arr = np.frombuffer(data, dtype="<f8")
        if arr.size != self.size * self.size * 3:
            raise ValueError("chemical grid size mismatch")
        self.pixels = arr.reshape(self.size, self.size, 3).astype(np.float64)
