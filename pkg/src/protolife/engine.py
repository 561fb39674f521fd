"""World orchestration: setup, the fixed per-step phase order, stats.

Phase order of ``World.step`` (part of the determinism contract):

1. GRN ticks (every ``grn_tick_interval`` steps): sense, load inputs, tick,
   unload traits and node controls
2. node IO: default motility, flagella, spike extension, adhesion signals
3. physics step
4. interactions: engulfment, binding creation, binding upkeep, spike
   damage, digestion of engulfed prey
5. metabolism, growth, molecule production, construction, photosynthesis
6. chemical grid (every ``grid_tick_interval`` steps): deposit, extract, blur
7. void damage
8. deaths
9. divisions
10. stats (every ``stats_interval`` steps)

Cells are always visited in ascending id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any

import networkx as nx
import numpy as np

from . import grn
from .cells import Cell, CellKind, Ledger, absorb, check_death, die_to_meat, dissolve, grow, \
    photosynthesize, produce_molecule, tissue_for_radius, update_metabolism
from .chemgrid import ChemGrid
from .config import RngStream, SimConfig
from .evolution import ChildSpec, divide, division_check, split_resources
from .lockkey import AttachmentKind, N_KINDS, snap_signature
from .nodes import VICTIM_CODE, SurfaceNode, adhesion_candidates, advance_construction, \
    default_motility, engulf_admissible, flagellum_step, phago_sensors, photoreceptor_sense, \
    spike_penetration, spike_tip
from .physics import PhysicsParams, PhysicsWorld, SpatialHash
from .terrain import generate_environment

PLANT_COLOUR = (0.2, 0.8, 0.2)
MEAT_COLOUR = (0.8, 0.2, 0.2)
ROCK_COLOUR = (0.5, 0.5, 0.5)
GREY = (0.5, 0.5, 0.5)

KIND_NAMES = ("flagellum", "spike", "phagoreceptor", "photoreceptor", "adhesion")


@dataclass
class Binding:
    id: int
    cell_a: int
    node_a: int  # node uid on cell_a
    cell_b: int
    node_b: int
    joint_id: int

    def to_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class StatsRow:
    tick: int
    time: float
    max_generation: int
    n_protozoa: int
    n_plants: int
    n_meat: int
    freq_flagellum: float = 0.0
    freq_spike: float = 0.0
    freq_phagoreceptor: float = 0.0
    freq_photoreceptor: float = 0.0
    freq_adhesion: float = 0.0
    mc_components: int = 0
    mc_min: float | None = None
    mc_mean: float | None = None
    mc_max: float | None = None
    no_protozoa: bool = False
    mass_drift: float = 0.0
    energy_drift: float = 0.0

    @staticmethod
    def header() -> list[str]:
        return [f.name for f in fields(StatsRow)]

    def values(self) -> list[Any]:
        return [getattr(self, f.name) for f in fields(self)]


def void_damage(x: float, y: float, cfg: SimConfig) -> float:
    """Health loss rate for a cell centred at (x, y)."""
    d = math.hypot(x, y)
    if d <= cfg.world_radius:
        return 0.0
    return cfg.void_decay_rate * (d - cfg.world_radius)


def _squash(v: float) -> float:
    return v / (1.0 + v) if v > 0.0 else 0.0


def _output_plan(net: grn.CompiledNetwork, cfg: SimConfig) -> list[tuple]:
    """Parsed (target, uid, j, lo, hi) per output channel, cached on the network."""
    plan = getattr(net, "plan", None)
    if plan is None:
        plan = []
        for name in net.output_names:
            lo, hi = grn.output_range(name, cfg)
            if name.startswith("node:"):
                _, uid, ch = name.split(":")
                if ch == "signature":
                    plan.append(("signature", int(uid), 0, lo, hi))
                else:
                    plan.append(("control", int(uid), int(ch[len("control"):]), lo, hi))
            else:
                plan.append(("trait", name, 0, lo, hi))
        net.plan = plan
    return plan


class World:
    """All simulation state plus the step function."""

    def __init__(self, cfg: SimConfig, *, populate: bool = True) -> None:
        self.cfg = cfg
        self.tick = 0
        self.physics = PhysicsWorld(PhysicsParams.from_config(cfg))
        self.grid = ChemGrid.from_config(cfg)
        self.cells: dict[int, Cell] = {}
        self.bindings: dict[int, Binding] = {}
        self.next_cell_id = 0
        self.next_binding_id = 0
        self.ledger = Ledger()
        self.innovations = grn.InnovationCounter()
        self.root = RngStream.root(cfg.master_seed)
        self.cell_streams = self.root.fork("cells")
        self.engine_rng = self.root.fork("engine")
        self.rocks: list[list] = []
        self.stats: list[StatsRow] = []
        self.baseline = (0.0, 0.0)
        if populate:
            self.rocks = generate_environment(self.root.fork("environment"), cfg)
            for formation in self.rocks:
                for tri in formation:
                    b = self.physics.add_triangle(tri)
                    b.colour = ROCK_COLOUR
            self._populate(self.root.fork("population"))
        self.baseline = self.ledger_residual()

    # -- setup ----------------------------------------------------------------

    def _open_spot(self, rng: RngStream, r: float) -> tuple[float, float] | None:
        lim = self.cfg.world_radius - r
        if lim <= 0.0:
            return None
        for _ in range(100):
            rho = lim * math.sqrt(rng.random())
            phi = rng.uniform(0.0, 2.0 * math.pi)
            x, y = rho * math.cos(phi), rho * math.sin(phi)
            if self._free(x, y, r):
                return x, y
        return None

    def _free(self, x: float, y: float, r: float) -> bool:
        from .physics import disc_triangle_contact
        for bid in sorted(self.physics.bodies):
            b = self.physics.bodies[bid]
            if b.kind == "disc":
                if math.hypot(b.x - x, b.y - y) < b.radius + r:
                    return False
            elif disc_triangle_contact(x, y, r, b.vertices) is not None:
                return False
        return True

    def _populate(self, rng: RngStream) -> None:
        cfg = self.cfg
        for _ in range(cfg.n_plants):
            spot = self._open_spot(rng, cfg.plant_initial_radius)
            if spot is not None:
                self.add_plant(*spot)
        for _ in range(cfg.n_protozoa):
            spot = self._open_spot(rng, cfg.initial_protozoan_radius)
            if spot is None:
                continue
            n_nodes = rng.integers(cfg.protozoan_nodes_min, cfg.protozoan_nodes_max + 1)
            genome = grn.init_genome(n_nodes, rng, cfg, self.innovations)
            mol = rng.integers(0, cfg.molecule_count)
            self.add_protozoan(*spot, genome, angle=rng.uniform(0.0, 2.0 * math.pi),
                               molecules={mol: cfg.initial_molecules})

    def _new_cell(self, kind: CellKind, x: float, y: float, tissue_radius: float | None, *,
                  colour, angle: float = 0.0, vx: float = 0.0, vy: float = 0.0,
                  with_rng: bool = True) -> Cell:
        cfg = self.cfg
        cid = self.next_cell_id
        self.next_cell_id += 1
        cell = Cell(id=cid, kind=kind, colour=tuple(colour), render_colour=tuple(colour),
                    birth_tick=self.tick)
        if tissue_radius is not None:
            cell.tissue = tissue_for_radius(tissue_radius, cfg)
            cell.tissue_energy = cfg.growth_energy_per_mass * cell.tissue
        if with_rng:
            cell.rng = self.cell_streams.fork(str(cid))
        self.cells[cid] = cell
        return cell

    def _attach_body(self, cell: Cell, x: float, y: float, angle: float = 0.0,
                     vx: float = 0.0, vy: float = 0.0) -> None:
        b = self.physics.add_disc(x, y, cell.radius(self.cfg), angle=angle, vx=vx, vy=vy,
                                  colour=cell.render_colour, cell_id=cell.id)
        cell.body_id = b.id

    def add_plant(self, x: float, y: float, radius: float | None = None) -> Cell:
        """New plant; its tissue and tissue energy enter the world as initial stock."""
        cfg = self.cfg
        r = cfg.plant_initial_radius if radius is None else radius
        cell = self._new_cell(CellKind.PLANT, x, y, r, colour=PLANT_COLOUR)
        self._attach_body(cell, x, y)
        return cell

    def add_meat(self, x: float, y: float, mass: float, energy: float,
                 molecules: dict[int, float] | None = None) -> Cell:
        cell = self._new_cell(CellKind.MEAT, x, y, None, colour=MEAT_COLOUR, with_rng=False)
        cell.construction_mass = mass
        cell.energy = energy
        cell.molecules = dict(molecules or {})
        self._attach_body(cell, x, y)
        return cell

    def add_protozoan(self, x: float, y: float, genome: grn.Genome, *, radius: float | None = None,
                      angle: float = 0.0, energy: float | None = None, mass: float | None = None,
                      molecules: dict[int, float] | None = None, generation: int = 0,
                      parent_id: int = -1) -> Cell:
        cfg = self.cfg
        r = cfg.initial_protozoan_radius if radius is None else radius
        cell = self._new_cell(CellKind.PROTOZOAN, x, y, r, colour=genome.colour)
        cell.genome = genome
        cell.energy = cfg.initial_energy if energy is None else energy
        cell.construction_mass = cfg.initial_mass if mass is None else mass
        cell.molecules = dict(molecules or {})
        cell.generation = generation
        cell.parent_id = parent_id
        cell.nodes = [SurfaceNode(g.uid, g.angle) for g in genome.nodes]
        cell.grn_state = np.zeros(len(genome.neurons))
        self._attach_body(cell, x, y, angle)
        return cell

    # -- queries --------------------------------------------------------------

    def body(self, cell: Cell):
        return self.physics.bodies[cell.body_id]

    def live(self, kind: CellKind | None = None) -> list[Cell]:
        return [self.cells[i] for i in sorted(self.cells)
                if self.cells[i].alive and (kind is None or self.cells[i].kind is kind)]

    @property
    def time(self) -> float:
        return self.tick * self.cfg.physics_dt

    def stock(self) -> tuple[float, float]:
        """(mass, energy) held by live cells and the chemical grid."""
        m = e = 0.0
        for cid in sorted(self.cells):
            c = self.cells[cid]
            m += c.total_mass()
            e += c.total_energy(self.cfg)
        return m + self.grid.resident_mass(), e + self.grid.resident_energy()

    def ledger_residual(self) -> tuple[float, float]:
        """stock + sinks - credits; constant over a run if nothing leaks."""
        m, e = self.stock()
        return (m + self.ledger.sink_mass - self.ledger.credit_mass,
                e + self.ledger.sink_energy - self.ledger.credit_energy)

    def ledger_drift(self) -> tuple[float, float]:
        m, e = self.ledger_residual()
        return m - self.baseline[0], e - self.baseline[1]

    # -- the step -------------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        dt = cfg.physics_dt
        if self.tick % cfg.grn_tick_interval == 0:
            self.phase_grn()
        self.phase_node_io(dt)
        self.physics.step(dt)
        self.phase_interactions(dt)
        self.phase_metabolism(dt)
        if self.tick % cfg.grid_tick_interval == 0:
            self.phase_grid(dt * cfg.grid_tick_interval)
        self.phase_void(dt)
        self.phase_deaths()
        self.phase_divisions()
        self.tick += 1
        if self.tick % cfg.stats_interval == 0:
            self.stats.append(self.collect_stats())

    def run(self, steps: int) -> None:
        for _ in range(steps):
            self.step()

    # phase 1 ------------------------------------------------------------------

    def grn_inputs(self, cell: Cell, net: grn.CompiledNetwork) -> np.ndarray:
        cfg = self.cfg
        by_uid = {n.uid: n for n in cell.nodes}
        base = {
            "bias": 1.0,
            "random": cell.rng.uniform(-1.0, 1.0),
            "health": cell.health,
            "size": min(cell.radius(cfg) / cfg.max_protozoan_radius, 1.0),
            "energy": _squash(cell.energy),
            "construction_mass": _squash(cell.construction_mass),
            "plant_food": _squash(cell.plant_food),
            "meat_food": _squash(cell.meat_food),
            "generation": _squash(cell.generation / 10.0),
        }
        vals = np.empty(len(net.input_names))
        for i, name in enumerate(net.input_names):
            v = base.get(name)
            if v is None:
                _, uid, ch = name.split(":")
                v = by_uid[int(uid)].sensors[int(ch[len("sensor"):])]
            vals[i] = min(1.0, max(-1.0, v))
        return vals

    def express(self, cell: Cell) -> None:
        """One GRN tick for a protozoan: sense, tick, unload outputs."""
        cfg = self.cfg
        body = self.body(cell)
        for node in cell.nodes:
            k = node.kind
            if k is AttachmentKind.PHOTORECEPTOR:
                node.sensors = photoreceptor_sense(node, body, self.physics, cfg)
            elif k is AttachmentKind.PHAGORECEPTOR:
                node.sensors = phago_sensors(cell, self.cells)
        net = cell.genome.compiled()
        cell.grn_state, raw = grn.tick(net, cell.grn_state, self.grn_inputs(cell, net))
        by_uid = {n.uid: n for n in cell.nodes}
        for (target, key, j, lo, hi), r in zip(_output_plan(net, cfg), raw.tolist()):
            v = grn.output_value(r, lo, hi)
            if target == "trait":
                cell.traits[key] = v
            elif target == "control":
                by_uid[key].control[j] = v
            else:
                by_uid[key].signature = v

    def phase_grn(self) -> None:
        for cell in self.live(CellKind.PROTOZOAN):
            self.express(cell)

    # phase 2 ------------------------------------------------------------------

    def phase_node_io(self, dt: float) -> None:
        cfg = self.cfg
        for cell in self.live(CellKind.PROTOZOAN):
            body = self.body(cell)
            default_motility(cell, body, cfg, self.ledger, dt)
            for node in cell.nodes:
                k = node.kind
                if k is AttachmentKind.FLAGELLUM:
                    flagellum_step(node, cell, body, cfg, self.ledger, dt)
                elif k is AttachmentKind.SPIKE:
                    node.attachment.extended = node.control[0] >= 0.0
                elif k is AttachmentKind.ADHESION:
                    node.attachment.outgoing = tuple(node.control)

    # phase 4 ------------------------------------------------------------------

    def _cell_of(self, body_id: int) -> Cell | None:
        b = self.physics.bodies.get(body_id)
        if b is None or b.cell_id < 0:
            return None
        c = self.cells.get(b.cell_id)
        return c if c is not None and c.alive else None

    def phase_interactions(self, dt: float) -> None:
        engulf_requests: list[tuple[int, int]] = []
        bind_requests: list[tuple[int, int]] = []
        for ct in self.physics.contacts:
            a, b = self._cell_of(ct.a), self._cell_of(ct.b)
            if a is None or b is None:
                continue
            for p, q in ((a, b), (b, a)):
                if p.kind is CellKind.PROTOZOAN and q.kind in (CellKind.PLANT, CellKind.MEAT):
                    engulf_requests.append((p.id, q.id))
            if a.kind is CellKind.PROTOZOAN and b.kind is CellKind.PROTOZOAN:
                bind_requests.append((min(a.id, b.id), max(a.id, b.id)))
        for pid, qid in sorted(set(engulf_requests)):
            self.try_engulf(self.cells[pid], self.cells[qid])
        for aid, bid in sorted(set(bind_requests)):
            self.try_bind(self.cells[aid], self.cells[bid])
        self.update_bindings(dt)
        self.spike_damage(dt)
        self.digest_prey(dt)

    def try_engulf(self, pred: Cell, prey: Cell) -> bool:
        """Engulf ``prey`` through the first phagoreceptor that admits it."""
        cfg = self.cfg
        if not (pred.alive and prey.alive) or prey.engulfed_by >= 0 or pred.engulfed_by >= 0:
            return False
        pb, qb = self.body(pred), self.body(prey)
        held = [self.cells[i].radius(cfg) for i in pred.prey]
        r = prey.radius(cfg)
        for node in pred.nodes:
            if engulf_admissible(pb, node, prey.kind, qb.x, qb.y, r, held, cfg):
                prey.engulfed_by = pred.id
                prey.engulf_dx, prey.engulf_dy = qb.x - pb.x, qb.y - pb.y
                pred.prey.append(prey.id)
                pred.last_prey_id = prey.id
                pred.last_prey_kind = prey.kind.value
                qb.collide = False
                return True
        return False

    def try_bind(self, a: Cell, b: Cell) -> Binding | None:
        cfg = self.cfg
        if self.physics.joint_between(a.body_id, b.body_id) is not None:
            return None
        na, nb = adhesion_candidates(a), adhesion_candidates(b)
        if not na or not nb:
            return None
        ba, bb = self.body(a), self.body(b)
        dx, dy = bb.x - ba.x, bb.y - ba.y
        d = math.hypot(dx, dy) or 1.0
        ux, uy = dx / d, dy / d
        anchors = []
        for body, sx, sy in ((ba, ux, uy), (bb, -ux, -uy)):
            c, s = math.cos(body.angle), math.sin(body.angle)
            # closest surface point, in the body frame
            anchors.append((body.radius * (c * sx + s * sy), body.radius * (-s * sx + c * sy)))
        joint = self.physics.add_joint(ba.id, bb.id, anchors[0], anchors[1],
                                       frequency=cfg.joint_frequency,
                                       damping_ratio=cfg.joint_damping_ratio,
                                       angular_frequency=cfg.joint_angular_frequency,
                                       rest_length=max(d - ba.radius - bb.radius, 0.0))
        bnd = Binding(self.next_binding_id, a.id, na[0].uid, b.id, nb[0].uid, joint.id)
        self.next_binding_id += 1
        self.bindings[bnd.id] = bnd
        for node, other in ((na[0], b.id), (nb[0], a.id)):
            node.attachment.partner = other
            node.attachment.binding = bnd.id
        return bnd

    def _binding_nodes(self, bnd: Binding) -> tuple[SurfaceNode, SurfaceNode]:
        a = next(n for n in self.cells[bnd.cell_a].nodes if n.uid == bnd.node_a)
        b = next(n for n in self.cells[bnd.cell_b].nodes if n.uid == bnd.node_b)
        return a, b

    def unbind(self, bid: int) -> None:
        bnd = self.bindings.pop(bid)
        self.physics.remove_joint(bnd.joint_id)
        for cid, uid in ((bnd.cell_a, bnd.node_a), (bnd.cell_b, bnd.node_b)):
            cell = self.cells.get(cid)
            if cell is None:
                continue
            for n in cell.nodes:
                if n.uid == uid and n.attachment is not None:
                    n.attachment.partner = -1
                    n.attachment.binding = -1
                    n.sensors = [0.0, 0.0, 0.0]

    def update_bindings(self, dt: float) -> None:
        """Break overstretched bindings, swap signals, equalise stores."""
        cfg = self.cfg
        cap = cfg.binding_transfer_rate * dt
        for bid in sorted(self.bindings):
            bnd = self.bindings[bid]
            a, b = self.cells[bnd.cell_a], self.cells[bnd.cell_b]
            j = self.physics.joints[bnd.joint_id]
            ba, bb = self.body(a), self.body(b)
            pax, pay = ba.local_to_world(*j.anchor_a)
            pbx, pby = bb.local_to_world(*j.anchor_b)
            if math.hypot(pbx - pax, pby - pay) - j.rest_length > cfg.joint_break_distance:
                self.unbind(bid)
                continue
            na, nb = self._binding_nodes(bnd)
            na.sensors = list(nb.attachment.outgoing)
            nb.sensors = list(na.attachment.outgoing)
            for name in ("energy", "construction_mass"):
                va, vb = getattr(a, name), getattr(b, name)
                flow = min(max(0.5 * (va - vb), -cap), cap)
                setattr(a, name, va - flow)
                setattr(b, name, vb + flow)

    def _disc_hash(self) -> SpatialHash:
        h = SpatialHash(2.0)
        for b in self.physics.discs():
            if b.collide:
                h.insert_aabb(b.id, b.x - b.radius, b.y - b.radius, b.x + b.radius, b.y + b.radius)
        return h

    def spike_damage(self, dt: float) -> None:
        cfg = self.cfg
        hashed = None
        damage: list[tuple[int, float]] = []
        for cell in self.live(CellKind.PROTOZOAN):
            spikes = [n for n in cell.nodes if n.kind is AttachmentKind.SPIKE]
            if not spikes:
                continue
            if hashed is None:
                hashed = self._disc_hash()
            body = self.body(cell)
            for node in spikes:
                if not node.attachment.extended:
                    node.sensors = [0.0, 0.0, 0.0]
                    continue
                tx, ty, length = spike_tip(node, body, cfg)
                best = (0.0, None)
                for bid in hashed.query_aabb(tx, ty, tx, ty):
                    if bid == body.id:
                        continue
                    victim = self._cell_of(bid)
                    if victim is None:
                        continue
                    ob = self.physics.bodies[bid]
                    depth = spike_penetration(tx, ty, length, ob.x, ob.y, ob.radius)
                    if depth > best[0]:
                        best = (depth, victim)
                depth, victim = best
                if victim is None:
                    node.sensors = [0.0, 0.0, 0.0]
                    continue
                rate = cfg.spike_damage_rate * depth
                damage.append((victim.id, rate * dt))
                node.sensors = [depth / length if length > 0 else 0.0, VICTIM_CODE[victim.kind], rate]
        for vid, dh in damage:
            self.cells[vid].health -= dh

    def digest_prey(self, dt: float) -> None:
        cfg = self.cfg
        share = min(cfg.engulf_drain_rate * dt, 1.0)
        pull = math.exp(-cfg.engulf_pull_rate * dt)
        for pred in self.live(CellKind.PROTOZOAN):
            if not pred.prey:
                continue
            pb = self.body(pred)
            keep = []
            for qid in list(pred.prey):
                prey = self.cells[qid]
                if prey.total_mass() <= cfg.engulf_min_mass:
                    absorb(prey, pred, 1.0, cfg)
                    self._remove_cell(prey)
                    continue
                absorb(prey, pred, share, cfg)
                prey.health *= 1.0 - share
                prey.engulf_dx *= pull
                prey.engulf_dy *= pull
                qb = self.body(prey)
                qb.x, qb.y = pb.x + prey.engulf_dx, pb.y + prey.engulf_dy
                qb.vx, qb.vy = pb.vx, pb.vy
                keep.append(qid)
            pred.prey = keep

    # phase 5 ------------------------------------------------------------------

    def phase_metabolism(self, dt: float) -> None:
        cfg = self.cfg
        ledger = self.ledger
        for cell in self.live():
            if cell.engulfed_by >= 0:
                continue
            if cell.kind is CellKind.PROTOZOAN:
                update_metabolism(cell, dt, cfg, ledger)
                if not cell.alive:
                    continue
                grow(cell, dt, cfg)
                rate = cell.trait("production_rate")
                if rate > 0.0:
                    idx = snap_signature(cell.trait("production_signature"), cfg.molecule_count)
                    produce_molecule(cell, idx / cfg.molecule_count, rate * dt, cfg, ledger)
                if cell.molecules:
                    for node in cell.nodes:
                        if node.attachment is None:
                            advance_construction(node, cell, dt, cfg, ledger)
            elif cell.kind is CellKind.PLANT:
                photosynthesize(cell, dt, cfg, ledger)
                grow(cell, dt, cfg, rate=cfg.plant_growth_rate, max_radius=cfg.plant_division_radius)
            cell.age += dt
            self._recover_colour(cell, dt)
        self.sync_bodies()

    def _recover_colour(self, cell: Cell, dt: float) -> None:
        k = min(self.cfg.colour_recovery_rate * dt, 1.0)
        if k > 0.0 and cell.render_colour != cell.colour:
            cell.render_colour = tuple(r + k * (c - r) for r, c in zip(cell.render_colour, cell.colour))

    def sync_bodies(self) -> None:
        """Push cell radius and colour into the physics bodies."""
        cfg = self.cfg
        for cid in sorted(self.cells):
            cell = self.cells[cid]
            if not cell.alive:
                continue
            b = self.physics.bodies[cell.body_id]
            r = cell.radius(cfg)
            if r != b.radius:
                self.physics.set_radius(b, r)
            b.colour = cell.render_colour

    # phase 6 ------------------------------------------------------------------

    def phase_grid(self, interval: float) -> None:
        cfg = self.cfg
        g = self.grid
        budget = min(cfg.deposit_rate * interval, 1.0)
        for cell in self.live():
            if cell.engulfed_by >= 0:
                continue
            b = self.body(cell)
            if cell.kind is CellKind.PROTOZOAN:
                pf, mf = g.extract(b.x, b.y, b.radius, cfg.extraction_fraction)
                cell.plant_food += pf
                cell.meat_food += mf
                continue
            if budget <= 0.0:
                continue
            m, e = g.deposit(b.x, b.y, b.radius, cell.colour, cfg.deposit_blend,
                             max_mass=budget * cell.construction_mass, max_energy=budget * cell.energy)
            if m > 0.0 or e > 0.0:
                cell.construction_mass = max(cell.construction_mass - m, 0.0)
                cell.energy = max(cell.energy - e, 0.0)
                k = min(cfg.deposit_greying * cfg.deposit_blend, 1.0)
                cell.render_colour = tuple(r + k * (q - r) for r, q in zip(cell.render_colour, GREY))
        lost_m, lost_e = g.diffuse()
        self.ledger.sink("diffusion", max(lost_m, 0.0), max(lost_e, 0.0))
        # a blur of values already inside [0, 1] cannot gain mass; guard rounding
        if lost_m < 0.0 or lost_e < 0.0:
            self.ledger.credit(max(-lost_m, 0.0), max(-lost_e, 0.0))

    # phase 7 ------------------------------------------------------------------

    def phase_void(self, dt: float) -> None:
        for cell in self.live():
            if cell.engulfed_by >= 0:
                continue
            b = self.body(cell)
            cell.health -= void_damage(b.x, b.y, self.cfg) * dt

    # phase 8 ------------------------------------------------------------------

    def _release_prey(self, pred: Cell) -> None:
        for qid in pred.prey:
            prey = self.cells[qid]
            prey.engulfed_by = -1
            prey.engulf_dx = prey.engulf_dy = 0.0
            self.body(prey).collide = True
        pred.prey = []

    def _remove_cell(self, cell: Cell) -> None:
        """Drop a cell and its body; leftover stores go to the decay sink."""
        for bid in sorted(self.bindings):
            bnd = self.bindings[bid]
            if cell.id in (bnd.cell_a, bnd.cell_b):
                self.unbind(bid)
        self._release_prey(cell)
        if cell.engulfed_by >= 0:
            pred = self.cells.get(cell.engulfed_by)
            if pred is not None and cell.id in pred.prey:
                pred.prey.remove(cell.id)
        dissolve(cell, self.cfg, self.ledger)
        self.physics.remove_body(cell.body_id)
        del self.cells[cell.id]

    def phase_deaths(self) -> None:
        cfg = self.cfg
        for cell in self.live():
            if cell.kind is CellKind.MEAT and cell.engulfed_by < 0 and cell.age >= cfg.meat_lifetime:
                self._remove_cell(cell)
                continue
            if not check_death(cell, cfg):
                continue
            if cell.kind is CellKind.PROTOZOAN:
                b = self.body(cell)
                x, y, vx, vy = b.x, b.y, b.vx, b.vy
                self._release_prey(cell)
                spawns = die_to_meat(cell, x, y, cfg, self.ledger)
                self._remove_cell(cell)
                for s in spawns:
                    meat = self.add_meat(s.x, s.y, s.mass, s.energy, s.molecules)
                    mb = self.body(meat)
                    mb.vx, mb.vy = vx, vy
            else:
                self._remove_cell(cell)

    # phase 9 ------------------------------------------------------------------

    def phase_divisions(self) -> None:
        cfg = self.cfg
        n_plants = len(self.live(CellKind.PLANT))
        for cell in self.live():
            if cell.engulfed_by >= 0:
                continue
            if cell.kind is CellKind.PROTOZOAN:
                if division_check(cell, cfg):
                    self.divide_protozoan(cell)
            elif cell.kind is CellKind.PLANT:
                if (cell.radius(cfg) >= cfg.plant_division_radius - 1e-9 and n_plants < cfg.max_plants
                        and cell.health > cfg.division_health):
                    self.divide_plant(cell)
                    n_plants += 1

    def _replace_with_children(self, parent: Cell, children: list[ChildSpec]) -> list[Cell]:
        b = self.body(parent)
        vx, vy, angle = b.vx, b.vy, b.angle
        self._release_prey(parent)
        # stores now live in the children; empty the parent before removal
        parent.tissue = parent.tissue_energy = parent.energy = parent.construction_mass = 0.0
        parent.plant_food = parent.meat_food = 0.0
        parent.molecules = {}
        self._remove_cell(parent)
        out = []
        cfg = self.cfg
        for spec in children:
            if parent.kind is CellKind.PROTOZOAN:
                child = self.add_protozoan(spec.x, spec.y, spec.genome, radius=cfg.min_cell_radius,
                                           angle=angle, energy=spec.energy, mass=spec.construction_mass,
                                           molecules=spec.molecules, generation=parent.generation + 1,
                                           parent_id=parent.id)
            else:
                child = self.add_plant(spec.x, spec.y)
                child.energy = spec.energy
                child.construction_mass = spec.construction_mass
                child.molecules = dict(spec.molecules)
                child.generation = parent.generation + 1
                child.parent_id = parent.id
            child.tissue = spec.tissue
            child.tissue_energy = spec.tissue_energy
            child.plant_food = spec.plant_food
            child.meat_food = spec.meat_food
            cb = self.body(child)
            self.physics.set_radius(cb, child.radius(cfg))
            cb.vx, cb.vy = vx, vy
            out.append(child)
        return out

    def divide_protozoan(self, cell: Cell) -> list[Cell]:
        b = self.body(cell)
        specs = divide(cell, b.x, b.y, cell.rng, self.cfg, self.ledger, self.innovations)
        return self._replace_with_children(cell, specs)

    def divide_plant(self, cell: Cell) -> list[Cell]:
        b = self.body(cell)
        specs = split_resources(cell, b.x, b.y, 2, cell.rng, self.cfg, self.ledger)
        return self._replace_with_children(cell, specs)

    # phase 10 -----------------------------------------------------------------

    def binding_graph(self) -> nx.Graph:
        g = nx.Graph()
        for bid in sorted(self.bindings):
            bnd = self.bindings[bid]
            g.add_edge(bnd.cell_a, bnd.cell_b)
        return g

    def collect_stats(self) -> StatsRow:
        protozoa = self.live(CellKind.PROTOZOAN)
        counts = [0] * N_KINDS
        for c in protozoa:
            for n in c.nodes:
                if n.attachment is not None:
                    counts[int(n.attachment.kind)] += 1
        n = len(protozoa)
        sizes = sorted(len(comp) for comp in nx.connected_components(self.binding_graph()))
        sizes = [s for s in sizes if s >= 2]
        dm, de = self.ledger_drift()
        row = StatsRow(
            tick=self.tick, time=self.time,
            max_generation=max((c.generation for c in protozoa), default=0),
            n_protozoa=n, n_plants=len(self.live(CellKind.PLANT)), n_meat=len(self.live(CellKind.MEAT)),
            mc_components=len(sizes),
            mc_min=float(min(sizes)) if sizes else None,
            mc_mean=float(sum(sizes) / len(sizes)) if sizes else None,
            mc_max=float(max(sizes)) if sizes else None,
            no_protozoa=n == 0,
            mass_drift=dm, energy_drift=de,
        )
        if n:
            for k, name in enumerate(KIND_NAMES):
                setattr(row, f"freq_{name}", counts[k] / n)
        return row

    # -- consistency ----------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise AssertionError if structural invariants are broken."""
        bodies = self.physics.bodies
        for cid in sorted(self.cells):
            c = self.cells[cid]
            assert c.alive, f"dead cell {cid} still stored"
            assert c.body_id in bodies and bodies[c.body_id].cell_id == cid, f"cell {cid} body mismatch"
            for name in ("tissue", "energy", "construction_mass", "plant_food", "meat_food"):
                assert getattr(c, name) >= -1e-12, f"cell {cid} negative {name}"
            assert all(v >= -1e-12 for v in c.molecules.values()), f"cell {cid} negative molecules"
            assert c.health <= 1.0 + 1e-12
        disc_cells = sum(1 for b in bodies.values() if b.kind == "disc")
        assert disc_cells == len(self.cells), "body count does not match cell count"
        joint_ids = sorted(b.joint_id for b in self.bindings.values())
        assert joint_ids == sorted(self.physics.joints), "binding/joint mismatch"
        for bnd in self.bindings.values():
            na, nb = self._binding_nodes(bnd)
            assert na.attachment.binding == bnd.id and nb.attachment.binding == bnd.id
            assert na.attachment.partner == bnd.cell_b and nb.attachment.partner == bnd.cell_a
