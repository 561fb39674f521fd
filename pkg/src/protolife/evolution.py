"""Cell division, inheritance and mutation of the unregulated traits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cells import Cell, Ledger, tissue_for_radius
from .config import RngStream, SimConfig
from .grn import Genome, InnovationCounter, NodeGene, add_node_channels, mutate_genome, \
    remove_node_channels


def division_check(cell: Cell, cfg: SimConfig) -> bool:
    """Big enough for its GRN-chosen threshold and healthy enough to split."""
    if not cell.alive:
        return False
    threshold = cell.trait("division_threshold", cfg.r_max_div)
    return cell.radius(cfg) >= threshold and cell.health > cfg.division_health


def expected_children(radius: float, cfg: SimConfig) -> float:
    """2 at ``r_min_div`` rising linearly to 6 at ``r_max_div``."""
    t = (radius - cfg.r_min_div) / (cfg.r_max_div - cfg.r_min_div)
    return 2.0 + 4.0 * min(max(t, 0.0), 1.0)


def sample_child_count(radius: float, rng: RngStream, cfg: SimConfig) -> int:
    mu = expected_children(radius, cfg)
    base = math.floor(mu)
    n = base + (1 if rng.random() < mu - base else 0)
    return min(max(n, 2), 6)


def fan_child_radius(parent_radius: float, n: int) -> float:
    """Largest radius letting ``n`` equal discs sit in a ring inside the parent without overlap."""
    s = math.sin(math.pi / n)
    return parent_radius * s / (1.0 + s)


@dataclass
class ChildSpec:
    x: float
    y: float
    tissue: float
    tissue_energy: float
    energy: float
    construction_mass: float
    plant_food: float
    meat_food: float
    molecules: dict[int, float]
    genome: Genome | None = None
    extra: dict = field(default_factory=dict)


def split_resources(parent: Cell, x: float, y: float, n: int, rng: RngStream,
                    cfg: SimConfig, ledger: Ledger) -> list[ChildSpec]:
    """Divide the parent's material between ``n`` children placed in a ring.

    ``division_overhead`` of everything is lost to the division sink; the
    remainder is shared equally. Each child's tissue is what its packed
    radius needs; surplus tissue returns to its free stores.
    """
    R = parent.radius(cfg)
    while n > 2 and fan_child_radius(R, n) < cfg.min_cell_radius:
        n -= 1
    rc = fan_child_radius(R, n)
    keep = 1.0 - cfg.division_overhead
    o = cfg.division_overhead
    mols = {k: v for k, v in sorted(parent.molecules.items()) if v > 0.0}
    ledger.sink("division",
                o * (parent.tissue + parent.construction_mass + parent.plant_food + parent.meat_food
                     + sum(mols.values())),
                o * parent.total_energy(cfg))

    share_t = keep * parent.tissue / n
    share_te = keep * parent.tissue_energy / n
    child_t = min(tissue_for_radius(rc, cfg), share_t)
    child_te = share_te * (child_t / share_t) if share_t > 0.0 else 0.0
    ring = rc / math.sin(math.pi / n)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    out = []
    for i in range(n):
        a = phase + 2.0 * math.pi * i / n
        out.append(ChildSpec(
            x=x + ring * math.cos(a), y=y + ring * math.sin(a),
            tissue=child_t, tissue_energy=child_te,
            energy=keep * parent.energy / n + (share_te - child_te),
            construction_mass=keep * parent.construction_mass / n + (share_t - child_t),
            plant_food=keep * parent.plant_food / n,
            meat_food=keep * parent.meat_food / n,
            molecules={k: keep * v / n for k, v in mols.items()},
        ))
    return out


def divide(parent: Cell, x: float, y: float, rng: RngStream, cfg: SimConfig, ledger: Ledger,
           innovations: InnovationCounter) -> list[ChildSpec]:
    """Split a protozoan into 2-6 children, each with a mutated copy of its genome."""
    n = sample_child_count(parent.radius(cfg), rng, cfg)
    children = split_resources(parent, x, y, n, rng, cfg, ledger)
    for child in children:
        g = mutate_genome(parent.genome, rng, cfg, innovations)
        child.genome = mutate_unregulated(g, rng, cfg, innovations)
    return children


def mutate_unregulated(genome: Genome, rng: RngStream, cfg: SimConfig,
                       innovations: InnovationCounter) -> Genome:
    """Node add/delete/angle changes and colour drift, on a copy of ``genome``.

    A new node gets fresh GRN channels wired like a newborn's; a deleted
    node takes its channels with it. Surviving nodes keep their order.
    """
    g = genome.copy()
    if rng.random() < cfg.p_node_add:
        uid = g.next_node_uid
        g.next_node_uid += 1
        angle = rng.uniform(0.0, 2.0 * math.pi)
        pos = rng.integers(0, len(g.nodes) + 1)
        g.nodes.insert(pos, NodeGene(uid, angle))
        add_node_channels(g, uid, rng, cfg, innovations)
    if rng.random() < cfg.p_node_del and len(g.nodes) > 1:
        victim = g.nodes.pop(rng.integers(0, len(g.nodes)))
        remove_node_channels(g, victim.uid)
    if rng.random() < cfg.p_node_angle:
        node = g.nodes[rng.integers(0, len(g.nodes))]
        node.angle = (node.angle + rng.normal(0.0, cfg.node_angle_sigma)) % (2.0 * math.pi)
        if node.angle >= 2.0 * math.pi:
            node.angle = 0.0
    if rng.random() < cfg.p_colour:
        ch = rng.integers(0, 3)
        step = cfg.colour_step if rng.random() < 0.5 else -cfg.colour_step
        colour = list(g.colour)
        colour[ch] = min(1.0, max(0.0, colour[ch] + step))
        g.colour = tuple(colour)
    g.invalidate()
    return g
