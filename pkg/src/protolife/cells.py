"""Cell state, metabolism and the world resource ledger.

Mass and energy are both conserved quantities. Where they sit:

* ``tissue`` is the cell body (mass = density * pi * r^2); ``tissue_energy``
  is the energy paid to build it.
* ``construction_mass`` / ``energy`` are the free stores.
* ``plant_food`` / ``meat_food`` are undigested mass. Food embodies energy at
  the fixed densities ``energy_density_plant`` / ``energy_density_meat``;
  digestion releases exactly that.
* ``molecules`` maps lattice index to quantity; one unit weighs one mass unit.

Anything spent (repairs, movement, molecule production energy, finished
construction projects, corpses rotting away) goes to a named sink in
``Ledger``; photosynthesis is the only source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .config import RngStream, SimConfig


class CellKind(str, Enum):
    PLANT = "plant"
    MEAT = "meat"
    PROTOZOAN = "protozoan"


SINKS = ("decay", "metabolism", "motion", "construction", "division", "diffusion")


@dataclass
class Ledger:
    """Running totals of what entered and left the world's stocks. Never decrease."""

    credit_mass: float = 0.0
    credit_energy: float = 0.0
    sinks: dict[str, list[float]] = field(default_factory=lambda: {s: [0.0, 0.0] for s in SINKS})

    def credit(self, mass: float, energy: float) -> None:
        self.credit_mass += mass
        self.credit_energy += energy

    def sink(self, name: str, mass: float = 0.0, energy: float = 0.0) -> None:
        if mass < 0.0 or energy < 0.0:
            raise ValueError(f"negative sink tally for {name}: {mass}, {energy}")
        s = self.sinks[name]
        s[0] += mass
        s[1] += energy

    @property
    def sink_mass(self) -> float:
        return sum(v[0] for v in self.sinks.values())

    @property
    def sink_energy(self) -> float:
        return sum(v[1] for v in self.sinks.values())

    def to_dict(self) -> dict[str, Any]:
        return {"credit_mass": self.credit_mass, "credit_energy": self.credit_energy,
                "sinks": {k: list(v) for k, v in self.sinks.items()}}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Ledger":
        return cls(d["credit_mass"], d["credit_energy"], {k: list(v) for k, v in d["sinks"].items()})


@dataclass(eq=False)
class Cell:
    id: int
    kind: CellKind
    body_id: int = -1
    tissue: float = 0.0
    tissue_energy: float = 0.0
    energy: float = 0.0
    construction_mass: float = 0.0
    plant_food: float = 0.0
    meat_food: float = 0.0
    molecules: dict[int, float] = field(default_factory=dict)
    health: float = 1.0
    colour: tuple = (1.0, 1.0, 1.0)
    render_colour: tuple = (1.0, 1.0, 1.0)
    generation: int = 0
    parent_id: int = -1
    birth_tick: int = 0
    age: float = 0.0
    alive: bool = True
    # protozoan-only state
    genome: Any = None
    grn_state: np.ndarray | None = None
    nodes: list = field(default_factory=list)
    traits: dict[str, float] = field(default_factory=dict)
    rng: RngStream | None = None
    # engulfment
    engulfed_by: int = -1
    prey: list[int] = field(default_factory=list)
    prey_start_mass: float = 0.0
    engulf_dx: float = 0.0
    engulf_dy: float = 0.0
    last_prey_kind: str = ""
    last_prey_id: int = -1

    # -- derived ------------------------------------------------------------

    def body_mass(self) -> float:
        return self.construction_mass if self.kind is CellKind.MEAT else self.tissue

    def radius(self, cfg: SimConfig) -> float:
        r = math.sqrt(max(self.body_mass(), 0.0) / (cfg.density * math.pi))
        return max(r, cfg.min_cell_radius)

    def total_mass(self) -> float:
        return (self.tissue + self.construction_mass + self.plant_food + self.meat_food
                + sum(self.molecules.values()))

    def total_energy(self, cfg: SimConfig) -> float:
        return (self.energy + self.tissue_energy + cfg.energy_density_plant * self.plant_food
                + cfg.energy_density_meat * self.meat_food)

    def trait(self, name: str, default: float = 0.0) -> float:
        return self.traits.get(name, default)


def draw(store: float, amount: float) -> float:
    """``store - amount``, snapped to zero when the draw takes everything (guards 1-ulp negatives)."""
    return store - amount if amount < store else 0.0


def tissue_for_radius(r: float, cfg: SimConfig) -> float:
    return cfg.density * math.pi * r * r


# ---------------------------------------------------------------------------
# metabolism


def digest(cell: Cell, dt: float, cfg: SimConfig) -> None:
    rate = cell.trait("digestion_rate")
    total = cell.plant_food + cell.meat_food
    if rate <= 0.0 or total <= 0.0:
        return
    amount = min(rate * dt, total)
    share = amount / total
    dp = cell.plant_food * share
    dm = cell.meat_food * share
    if amount >= total:
        dp, dm = cell.plant_food, cell.meat_food
    cell.plant_food -= dp
    cell.meat_food -= dm
    cell.construction_mass += dp + dm
    cell.energy += cfg.energy_density_plant * dp + cfg.energy_density_meat * dm


def repair(cell: Cell, dt: float, cfg: SimConfig, ledger: Ledger, reserve: float = 0.0) -> float:
    """Spend stores above ``reserve`` to restore health; returns health gained."""
    want = min(cfg.max_repair_rate * dt, 1.0 - cell.health)
    if want <= 0.0:
        return 0.0
    m_avail = max(cell.construction_mass - reserve, 0.0)
    e_avail = max(cell.energy - reserve, 0.0)
    mc = cfg.repair_mass_per_health * want
    ec = cfg.repair_energy_per_health * want
    s = 1.0
    if mc > 0.0:
        s = min(s, m_avail / mc)
    if ec > 0.0:
        s = min(s, e_avail / ec)
    if s <= 0.0:
        return 0.0
    gain = want * s
    cell.construction_mass = draw(cell.construction_mass, mc * s)
    cell.energy = draw(cell.energy, ec * s)
    ledger.sink("metabolism", mc * s, ec * s)
    cell.health = min(1.0, cell.health + gain)
    return gain


def update_metabolism(cell: Cell, dt: float, cfg: SimConfig, ledger: Ledger) -> None:
    """Health decay, digestion and repair for a live cell.

    Cells whose repair priority is below one half are growth-first: they
    repair only from stores above ``repair_reserve``, leaving the rest for
    ``grow``. The others repair from everything they have.
    """
    if not cell.alive:
        return
    cell.health -= cfg.health_decay_rate * dt
    digest(cell, dt, cfg)
    if cell.trait("repair_priority") >= 0.5:
        repair(cell, dt, cfg, ledger)
    else:
        repair(cell, dt, cfg, ledger, reserve=cfg.repair_reserve)
    check_death(cell, cfg)


def check_death(cell: Cell, cfg: SimConfig) -> bool:
    if cell.health < cfg.death_health:
        cell.alive = False
    return not cell.alive


def grow(cell: Cell, dt: float, cfg: SimConfig, *, rate: float | None = None,
         max_radius: float | None = None, energy_per_mass: float | None = None) -> float:
    """Grow the radius by up to ``rate * dt``, paid for from the free stores.

    New tissue costs ``density * pi * (r1^2 - r0^2)`` mass plus
    ``energy_per_mass`` per unit of it; both move into the tissue. Short
    stores scale the added tissue down. Returns tissue mass added.
    """
    if not cell.alive:
        return 0.0
    rate = cell.trait("growth_rate") if rate is None else rate
    max_radius = cfg.max_protozoan_radius if max_radius is None else max_radius
    epm = cfg.growth_energy_per_mass if energy_per_mass is None else energy_per_mass
    r0 = math.sqrt(cell.tissue / (cfg.density * math.pi))
    dr = min(rate * dt, max_radius - r0)
    if dr <= 0.0:
        return 0.0
    dm = tissue_for_radius(r0 + dr, cfg) - cell.tissue
    if dm <= 0.0:
        return 0.0
    de = epm * dm
    s = min(1.0, cell.construction_mass / dm)
    if de > 0.0:
        s = min(s, cell.energy / de)
    if s <= 0.0:
        return 0.0
    add = dm * s
    cell.construction_mass = draw(cell.construction_mass, add)
    cell.energy = draw(cell.energy, de * s)
    cell.tissue += add
    cell.tissue_energy += de * s
    return add


def produce_molecule(cell: Cell, signature: float, amount: float, cfg: SimConfig, ledger: Ledger) -> float:
    """Turn construction mass into molecules at lattice ``signature``; returns amount made."""
    idx = round(signature * cfg.molecule_count)
    if abs(idx / cfg.molecule_count - signature) > 1e-12 or not 0 <= idx < cfg.molecule_count:
        raise ValueError(f"signature {signature!r} is not on the molecule lattice")
    if amount <= 0.0:
        return 0.0
    cost = cfg.molecule_energy_cost * amount
    s = min(1.0, cell.construction_mass / amount)
    if cost > 0.0:
        s = min(s, cell.energy / cost)
    if s <= 0.0:
        return 0.0
    made = amount * s
    cell.construction_mass = draw(cell.construction_mass, made)
    cell.energy = draw(cell.energy, cost * s)
    ledger.sink("metabolism", 0.0, cost * s)
    cell.molecules[idx] = cell.molecules.get(idx, 0.0) + made
    return made


def photosynthesize(plant: Cell, dt: float, cfg: SimConfig, ledger: Ledger) -> None:
    """Plants make mass and energy from nothing; the world's only source."""
    if dt <= 0.0 or not plant.alive or plant.construction_mass >= cfg.plant_store_cap:
        return
    m = cfg.plant_mass_rate * dt
    e = cfg.plant_energy_rate * dt
    plant.construction_mass += m
    plant.energy += e
    ledger.credit(m, e)


# ---------------------------------------------------------------------------
# death


@dataclass
class MeatSpawn:
    x: float
    y: float
    mass: float
    energy: float
    molecules: dict[int, float]


def die_to_meat(cell: Cell, x: float, y: float, cfg: SimConfig, ledger: Ledger,
                *, engulfed: bool = False) -> list[MeatSpawn]:
    """Split a dead protozoan into meat cells holding ``meat_fraction`` of everything.

    Tissue and undigested food count as construction mass; food's embodied
    energy counts as energy. The rest goes to the decay sink. An engulfed
    victim leaves no meat: its resources already went to the engulfer.
    """
    cell.alive = False
    if engulfed:
        return []
    f = cfg.meat_fraction
    mass = cell.tissue + cell.construction_mass + cell.plant_food + cell.meat_food
    energy = cell.total_energy(cfg)
    mols = {k: v for k, v in sorted(cell.molecules.items()) if v > 0.0}
    r = cell.radius(cfg)
    n = max(1, min(4, int(r / cfg.meat_chunk_radius)))
    spawns = []
    for i in range(n):
        if n == 1:
            px, py = x, y
        else:
            a = 2.0 * math.pi * i / n
            px, py = x + 0.5 * r * math.cos(a), y + 0.5 * r * math.sin(a)
        spawns.append(MeatSpawn(px, py, f * mass / n, f * energy / n,
                                {k: f * v / n for k, v in mols.items()}))
    kept_mass = sum(s.mass + sum(s.molecules.values()) for s in spawns)
    kept_energy = sum(s.energy for s in spawns)
    total_mass = mass + sum(mols.values())
    ledger.sink("decay", max(total_mass - kept_mass, 0.0), max(energy - kept_energy, 0.0))
    cell.tissue = cell.tissue_energy = cell.energy = cell.construction_mass = 0.0
    cell.plant_food = cell.meat_food = 0.0
    cell.molecules = {}
    return spawns


def dissolve(cell: Cell, cfg: SimConfig, ledger: Ledger) -> None:
    """Remove a cell entirely, sending all of its stores to the decay sink."""
    ledger.sink("decay", cell.total_mass(), cell.total_energy(cfg))
    cell.tissue = cell.tissue_energy = cell.energy = cell.construction_mass = 0.0
    cell.plant_food = cell.meat_food = 0.0
    cell.molecules = {}
    cell.alive = False


def absorb(prey: Cell, predator: Cell, share: float, cfg: SimConfig) -> None:
    """Move ``share`` of the prey's material into the predator.

    Prey tissue (plants) or body mass (meat) becomes food of the matching
    kind, as far as the prey's energy covers the food's embodied energy;
    leftover mass and energy go straight to the predator's free stores, and
    molecules move across unchanged.
    """
    share = min(max(share, 0.0), 1.0)
    if prey.kind is CellKind.PLANT:
        density = cfg.energy_density_plant
        bm, be = prey.tissue * share, prey.tissue_energy * share
        food = min(bm, be / density) if density > 0 else 0.0
        prey.tissue -= bm
        prey.tissue_energy -= be
        predator.plant_food += food
        predator.construction_mass += bm - food
        predator.energy += be - density * food
        fm, fe = prey.construction_mass * share, prey.energy * share
        prey.construction_mass -= fm
        prey.energy -= fe
        predator.construction_mass += fm
        predator.energy += fe
    else:
        density = cfg.energy_density_meat
        bm, be = prey.construction_mass * share, prey.energy * share
        food = min(bm, be / density) if density > 0 else 0.0
        prey.construction_mass -= bm
        prey.energy -= be
        predator.meat_food += food
        predator.construction_mass += bm - food
        predator.energy += be - density * food
        bm2, be2 = prey.tissue * share, prey.tissue_energy * share
        prey.tissue -= bm2
        prey.tissue_energy -= be2
        predator.construction_mass += bm2
        predator.energy += be2
    for k in sorted(prey.molecules):
        q = prey.molecules[k] * share
        if q > 0.0:
            prey.molecules[k] -= q
            predator.molecules[k] = predator.molecules.get(k, 0.0) + q
    for name in ("plant_food", "meat_food"):
        q = getattr(prey, name) * share
        if q > 0.0:
            setattr(prey, name, getattr(prey, name) - q)
            setattr(predator, name, getattr(predator, name) + q)
