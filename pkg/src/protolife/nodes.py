"""Surface nodes: ordered IO sites on a protozoan and the attachments built on them.

Each node takes four numbers from the GRN (three control values and a
construction signature) and hands three sensor values back. The table below
is the stable channel layout used by snapshots and debug dumps.

=============  ==========================  ==============================
attachment     control[0..2]               sensor[0..2]
=============  ==========================  ==============================
none           unused                      0, 0, 0
Flagellum      thrust, torque, unused      propulsion success, 0, 0
Spike          extend (>= 0) / retract     depth, victim kind, damage/s
Phagoreceptor  eat plants, eat meat, --    prey is plant, prey is meat,
                                           prey health
Photoreceptor  unused                      mean R, G, B of ray hits
Adhesion       outgoing signal triple      partner's outgoing triple
=============  ==========================  ==============================

Kind codes (snapshot ``attachment`` field): 0 flagellum, 1 spike,
2 phagoreceptor, 3 photoreceptor, 4 adhesion; -1 for none.
Victim kind codes: plant 1/3, meat 2/3, protozoan 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .cells import Cell, CellKind, Ledger, draw
from .config import SimConfig
from .lockkey import N_KINDS, AttachmentKind, cycle_distance, lattice_potency, \
    matching_coefficient, select_project

VICTIM_CODE = {CellKind.PLANT: 1.0 / 3.0, CellKind.MEAT: 2.0 / 3.0, CellKind.PROTOZOAN: 1.0}


@dataclass
class Attachment:
    kind: AttachmentKind
    extended: bool = False
    partner: int = -1  # bound cell id (adhesion)
    binding: int = -1
    outgoing: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": int(self.kind), "extended": self.extended, "partner": self.partner,
                "binding": self.binding, "outgoing": list(self.outgoing)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Attachment":
        return cls(AttachmentKind(d["kind"]), d["extended"], d["partner"], d["binding"],
                   tuple(d["outgoing"]))


@dataclass
class SurfaceNode:
    uid: int
    angle: float
    attachment: Attachment | None = None
    progress: list[float] = field(default_factory=lambda: [0.0] * N_KINDS)
    control: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    signature: float = 0.0
    sensors: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])

    @property
    def kind(self) -> AttachmentKind | None:
        return None if self.attachment is None else self.attachment.kind

    def to_dict(self) -> dict[str, Any]:
        return {"uid": self.uid, "angle": self.angle,
                "attachment": None if self.attachment is None else self.attachment.to_dict(),
                "progress": list(self.progress), "control": list(self.control),
                "signature": self.signature, "sensors": list(self.sensors)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SurfaceNode":
        att = d["attachment"]
        return cls(d["uid"], d["angle"], None if att is None else Attachment.from_dict(att),
                   list(d["progress"]), list(d["control"]), d["signature"], list(d["sensors"]))


def node_world_position(x: float, y: float, body_angle: float, r: float, node_angle: float):
    a = body_angle + node_angle
    return x + r * math.cos(a), y + r * math.sin(a)


# ---------------------------------------------------------------------------
# construction


def project_target(node: SurfaceNode, cell: Cell, cfg: SimConfig) -> tuple[int, float]:
    """(kind, drive) of the strongest construction drive at this node; kind -1 if none."""
    drive = select_project(node.signature, cell.molecules, cfg.molecule_count, N_KINDS)
    best = max(drive)
    if best <= 0.0:
        return -1, 0.0
    return drive.index(best), best


def usable_molecules(node: SurfaceNode, cell: Cell, kind: int, cfg: SimConfig) -> list[tuple[int, float]]:
    """Molecules that can feed a ``kind`` project here, best match first: (index, k_matching)."""
    d_crit = 0.5 / N_KINDS
    table = lattice_potency(cfg.molecule_count, N_KINDS)
    out = []
    for idx in sorted(cell.molecules):
        if cell.molecules[idx] <= 0.0 or table[idx][0] != kind:
            continue
        k_match = matching_coefficient(cycle_distance(node.signature, idx / cfg.molecule_count), d_crit)
        if k_match <= 0.0:
            continue
        out.append((idx, k_match))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def advance_construction(node: SurfaceNode, cell: Cell, dt: float, cfg: SimConfig,
                         ledger: Ledger) -> tuple[float, float, float]:
    """Push the node's strongest project forward by one step.

    Full speed (drive >= 1, enough of everything) completes a project in
    ``build_time``. Shortfalls slow it by the availability ratio of the
    scarcest ingredient. A molecule matching the signature with coefficient
    k supplies only k of a unit toward the molecule requirement. Returns the
    (mass, energy, molecule units) consumed; they go to the construction sink.
    """
    if node.attachment is not None or not cell.alive:
        return 0.0, 0.0, 0.0
    kind, drive = project_target(node, cell, cfg)
    if kind < 0:
        return 0.0, 0.0, 0.0
    d = min(1.0, drive)
    step = d * dt / cfg.build_time
    m_req = cfg.construction_mass * step
    e_req = cfg.construction_energy * step
    q_req = cfg.construction_molecules * step
    usable = usable_molecules(node, cell, kind, cfg)
    supply = sum(cell.molecules[i] * k for i, k in usable)

    ratio = 1.0
    if m_req > 0.0:
        ratio = min(ratio, cell.construction_mass / m_req)
    if e_req > 0.0:
        ratio = min(ratio, cell.energy / e_req)
    if q_req > 0.0:
        ratio = min(ratio, supply / q_req)
    remaining = 1.0 - node.progress[kind]
    if step * ratio > remaining:
        ratio = remaining / step
    if ratio <= 0.0:
        return 0.0, 0.0, 0.0

    m, e = m_req * ratio, e_req * ratio
    cell.construction_mass = max(cell.construction_mass - m, 0.0)
    cell.energy = max(cell.energy - e, 0.0)
    need = q_req * ratio
    used = 0.0
    for idx, k in usable:
        if need <= 0.0:
            break
        have = cell.molecules[idx]
        take = min(have, need / k)
        if take >= have or have - take < 1e-15:
            take = have
        cell.molecules[idx] = have - take
        if cell.molecules[idx] <= 0.0:
            del cell.molecules[idx]
        used += take
        need -= take * k
    ledger.sink("construction", m + used, e)

    node.progress[kind] += step * ratio
    if node.progress[kind] >= 1.0 - 1e-12:
        node.progress[kind] = 1.0
        node.attachment = Attachment(AttachmentKind(kind))
    return m, e, used


# ---------------------------------------------------------------------------
# actuation


def actuate(cell: Cell, body, thrust: float, torque: float, dir_x: float, dir_y: float,
            cfg: SimConfig, ledger: Ledger, dt: float) -> float:
    """Apply up to ``thrust`` along (dir_x, dir_y) and ``torque``, limited by energy.

    Returns the propulsion success ratio: produced over requested, 1 for a
    zero request.
    """
    need = (abs(thrust) * cfg.thrust_energy_cost + abs(torque) * cfg.torque_energy_cost) * dt
    if need <= 0.0:
        return 1.0
    s = min(1.0, cell.energy / need) if cell.energy > 0.0 else 0.0
    if s <= 0.0:
        return 0.0
    spent = need * s
    cell.energy = draw(cell.energy, spent)
    ledger.sink("motion", 0.0, spent)
    body.apply_force(thrust * s * dir_x, thrust * s * dir_y)
    body.torque += torque * s
    return s


def flagellum_step(node: SurfaceNode, cell: Cell, body, cfg: SimConfig, ledger: Ledger, dt: float) -> None:
    """Thrust along node -> centre, torque from control[1]; sensor[0] = success."""
    mult = cfg.flagellum_multiplier
    a = body.angle + node.angle
    success = actuate(cell, body, node.control[0] * cfg.default_thrust * mult,
                      node.control[1] * cfg.default_torque * mult,
                      -math.cos(a), -math.sin(a), cfg, ledger, dt)
    node.sensors = [success, 0.0, 0.0]


def default_motility(cell: Cell, body, cfg: SimConfig, ledger: Ledger, dt: float) -> float:
    """Flagellum-free movement along the cell's heading at 1/multiplier of flagellum strength."""
    return actuate(cell, body, cell.trait("motility_thrust") * cfg.default_thrust,
                   cell.trait("motility_torque") * cfg.default_torque,
                   math.cos(body.angle), math.sin(body.angle), cfg, ledger, dt)


def spike_tip(node: SurfaceNode, body, cfg: SimConfig) -> tuple[float, float, float]:
    """(x, y, length) of an extended spike's tip."""
    length = cfg.spike_length * body.radius
    a = body.angle + node.angle
    reach = body.radius + length
    return body.x + reach * math.cos(a), body.y + reach * math.sin(a), length


def spike_penetration(tip_x: float, tip_y: float, length: float, ox: float, oy: float, r: float) -> float:
    """How deep a spike tip sits inside a disc, capped at the spike length."""
    depth = r - math.hypot(tip_x - ox, tip_y - oy)
    return min(max(depth, 0.0), length)


def photoreceptor_sense(node: SurfaceNode, body, world, cfg: SimConfig) -> list[float]:
    """Weighted mean colour of the nearest hits of rays fanned around the node.

    Weights fall off quadratically: w = (1 - d / range)^2.
    """
    n = cfg.n_rays
    cone = math.radians(cfg.ray_cone_deg)
    max_range = cfg.ray_range_radii * body.radius
    a0 = body.angle + node.angle
    ox, oy = node_world_position(body.x, body.y, body.angle, body.radius * 1.001, node.angle)
    tot = [0.0, 0.0, 0.0]
    wsum = 0.0
    for i in range(n):
        a = a0 if n == 1 else a0 - 0.5 * cone + cone * i / (n - 1)
        hit = world.raycast(ox, oy, math.cos(a), math.sin(a), max_range, exclude=body.id)
        if hit is None:
            continue
        w = (1.0 - hit.distance / max_range) ** 2
        wsum += w
        for c in range(3):
            tot[c] += w * hit.surface_colour[c]
    if wsum <= 0.0:
        return [0.0, 0.0, 0.0]
    return [t / wsum for t in tot]


# ---------------------------------------------------------------------------
# phagocytosis


def within_acceptance(body, node: SurfaceNode, tx: float, ty: float, acceptance_deg: float) -> bool:
    """True if direction to (tx, ty) lies within the node's angular acceptance window."""
    a = body.angle + node.angle
    to = math.atan2(ty - body.y, tx - body.x)
    diff = (to - a + math.pi) % (2.0 * math.pi) - math.pi
    return abs(diff) <= 0.5 * math.radians(acceptance_deg)


def engulf_capacity_ok(predator_radius: float, held_radii: list[float], prey_radius: float,
                       capacity: float) -> bool:
    """Total engulfed prey area may not exceed ``capacity`` of the predator's area."""
    held = sum(r * r for r in held_radii)
    return held + prey_radius * prey_radius <= capacity * predator_radius * predator_radius


def engulf_permitted(node: SurfaceNode, prey_kind: CellKind) -> bool:
    if node.kind is not AttachmentKind.PHAGORECEPTOR:
        return False
    if prey_kind is CellKind.PLANT:
        return node.control[0] > 0.0
    if prey_kind is CellKind.MEAT:
        return node.control[1] > 0.0
    return False


def engulf_admissible(body, node: SurfaceNode, prey_kind: CellKind, prey_x: float, prey_y: float,
                      prey_radius: float, held_radii: list[float], cfg: SimConfig) -> bool:
    """Permission signal, angular window and capacity all satisfied."""
    return (engulf_permitted(node, prey_kind)
            and within_acceptance(body, node, prey_x, prey_y, cfg.phago_acceptance_deg)
            and engulf_capacity_ok(body.radius, held_radii, prey_radius, cfg.engulf_capacity))


def phago_sensors(cell: Cell, cells: dict[int, Cell]) -> list[float]:
    prey = cells.get(cell.last_prey_id)
    if prey is None or prey.engulfed_by != cell.id:
        return [0.0, 0.0, 0.0]
    return [1.0 if prey.kind is CellKind.PLANT else 0.0,
            1.0 if prey.kind is CellKind.MEAT else 0.0,
            prey.health]


def adhesion_candidates(cell: Cell) -> list[SurfaceNode]:
    """Completed, unbound adhesion receptors in node-list order."""
    return [n for n in cell.nodes
            if n.kind is AttachmentKind.ADHESION and n.attachment.partner < 0]
