"""Genomes and the recurrent gene regulatory network that expresses them.

Every neuron holds a state value. A tick loads the input neurons, then
computes each non-input neuron from the previous state snapshot::

    pre[n]  = sum(w * prev[src] for enabled src -> n)
    next[n] = tanh(pre[n])

Output channels read ``pre`` of their neuron and map it into the channel's
range with ``output_value``: a linear map of [-1, 1] onto [lo, hi] that
wraps cyclically outside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import RngStream, SimConfig

GENOME_FORMAT = 1

CELL_INPUTS = ("bias", "random", "health", "size", "energy", "construction_mass",
               "plant_food", "meat_food", "generation")
# whole-cell outputs; the first group starts wired to bias only (traits),
# the second is wired like per-node controls
CELL_TRAIT_OUTPUTS = ("growth_rate", "digestion_rate", "division_threshold", "repair_priority",
                      "production_signature", "production_rate")
CELL_CONTROL_OUTPUTS = ("motility_thrust", "motility_torque")
NODE_SENSORS = 3
NODE_CONTROLS = 3


def sensor_channel(uid: int, j: int) -> str:
    return f"node:{uid}:sensor{j}"


def control_channel(uid: int, j: int) -> str:
    return f"node:{uid}:control{j}"


def signature_channel(uid: int) -> str:
    return f"node:{uid}:signature"


def is_trait_channel(name: str) -> bool:
    return name in CELL_TRAIT_OUTPUTS or name.endswith(":signature")


def remap_cyclic(x: float, lo: float, hi: float) -> float:
    """Wrap ``x`` into [lo, hi) with a non-negative modulo."""
    w = hi - lo
    y = lo + math.fmod(x - lo, w)
    if y < lo:
        y += w
    if y >= hi:  # fmod rounding at the top edge
        y = lo
    return y


def output_range(channel: str, cfg: SimConfig) -> tuple[float, float]:
    if channel.endswith(":signature") or channel in ("production_signature", "repair_priority"):
        return 0.0, 1.0
    if channel == "growth_rate":
        return 0.0, cfg.max_growth_rate
    if channel == "digestion_rate":
        return 0.0, cfg.max_digestion_rate
    if channel == "production_rate":
        return 0.0, cfg.max_production_rate
    if channel == "division_threshold":
        return cfg.r_min_div, cfg.r_max_div
    return -1.0, 1.0


def output_value(raw: float, lo: float, hi: float) -> float:
    return remap_cyclic(lo + 0.5 * (raw + 1.0) * (hi - lo), lo, hi)


def raw_for_value(value: float, lo: float, hi: float) -> float:
    """Raw output in [-1, 1) that ``output_value`` maps to ``value``."""
    return 2.0 * (value - lo) / (hi - lo) - 1.0


# ---------------------------------------------------------------------------
# genome data


@dataclass
class Neuron:
    id: int
    role: str  # "input" | "output" | "hidden"


@dataclass
class Connection:
    src: int
    dst: int
    weight: float
    enabled: bool
    innovation: int


@dataclass
class NodeGene:
    uid: int
    angle: float


@dataclass
class Genome:
    neurons: list[Neuron] = field(default_factory=list)
    connections: list[Connection] = field(default_factory=list)
    inputs: dict[str, int] = field(default_factory=dict)
    outputs: dict[str, int] = field(default_factory=dict)
    nodes: list[NodeGene] = field(default_factory=list)
    colour: tuple[float, float, float] = (1.0, 1.0, 1.0)
    next_neuron: int = 0
    next_node_uid: int = 0
    _compiled: "CompiledNetwork | None" = field(default=None, repr=False, compare=False)

    def copy(self) -> "Genome":
        return Genome.from_dict(self.to_dict())

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": GENOME_FORMAT,
            "neurons": [[n.id, n.role] for n in self.neurons],
            "connections": [[c.src, c.dst, c.weight, c.enabled, c.innovation] for c in self.connections],
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
            "nodes": [[g.uid, g.angle] for g in self.nodes],
            "colour": list(self.colour),
            "next_neuron": self.next_neuron,
            "next_node_uid": self.next_node_uid,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Genome":
        if d.get("format") != GENOME_FORMAT:
            raise ValueError(f"unsupported genome format {d.get('format')!r}")
        return cls(
            neurons=[Neuron(i, r) for i, r in d["neurons"]],
            connections=[Connection(s, t, w, bool(e), k) for s, t, w, e, k in d["connections"]],
            inputs=dict(d["inputs"]),
            outputs=dict(d["outputs"]),
            nodes=[NodeGene(u, a) for u, a in d["nodes"]],
            colour=tuple(d["colour"]),
            next_neuron=d["next_neuron"],
            next_node_uid=d["next_node_uid"],
        )

    def invalidate(self) -> None:
        self._compiled = None

    def compiled(self) -> "CompiledNetwork":
        if self._compiled is None:
            self._compiled = CompiledNetwork(self)
        return self._compiled

    def _add_neuron(self, role: str) -> int:
        nid = self.next_neuron
        self.next_neuron += 1
        self.neurons.append(Neuron(nid, role))
        return nid

    def dump(self) -> str:
        """Human-readable listing of nodes, channels and connections."""
        names = {v: k for k, v in self.inputs.items()}
        names.update({v: k for k, v in self.outputs.items()})
        lines = [f"colour {tuple(round(c, 4) for c in self.colour)}",
                 "nodes " + " ".join(f"{g.uid}@{g.angle:.3f}" for g in self.nodes)]
        for n in self.neurons:
            lines.append(f"  n{n.id:<4} {n.role:<6} {names.get(n.id, '')}")
        for c in self.connections:
            flag = "" if c.enabled else " (disabled)"
            lines.append(f"  [{c.innovation}] n{c.src} -> n{c.dst} w={c.weight:+.4f}{flag}")
        return "\n".join(lines)


class InnovationCounter:
    """Run-wide source of connection innovation numbers."""

    def __init__(self, start: int = 0) -> None:
        self.value = start

    def next(self) -> int:
        v = self.value
        self.value += 1
        return v


class CompiledNetwork:
    """Index arrays for fast ticking; rebuilt whenever the genome changes."""

    def __init__(self, genome: Genome) -> None:
        self.ids = [n.id for n in genome.neurons]
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        self.size = len(self.ids)
        enabled = [c for c in genome.connections if c.enabled]
        self.src = np.array([self.index[c.src] for c in enabled], dtype=np.intp)
        self.dst = np.array([self.index[c.dst] for c in enabled], dtype=np.intp)
        self.weight = np.array([c.weight for c in enabled], dtype=np.float64)
        self.input_names = list(genome.inputs)
        self.input_idx = np.array([self.index[genome.inputs[k]] for k in self.input_names], dtype=np.intp)
        self.output_names = list(genome.outputs)
        self.output_idx = np.array([self.index[genome.outputs[k]] for k in self.output_names], dtype=np.intp)
        computed = np.ones(self.size, dtype=bool)
        computed[self.input_idx] = False
        self.computed = computed


def tick(net: CompiledNetwork, state: np.ndarray, input_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous update.

    ``input_values`` follows ``net.input_names``. Returns the new state and
    the pre-activation values of the output neurons (``net.output_names``).
    """
    prev = state.copy()
    prev[net.input_idx] = input_values
    pre = np.bincount(net.dst, weights=net.weight * prev[net.src], minlength=net.size)
    new = np.where(net.computed, np.tanh(pre), prev)
    return new, pre[net.output_idx]


def dense_tick(genome: Genome, state: np.ndarray, input_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reference tick via an explicit dense weight matrix (for checking ``tick``)."""
    idx = {n.id: i for i, n in enumerate(genome.neurons)}
    n = len(genome.neurons)
    w = np.zeros((n, n))
    for c in genome.connections:
        if c.enabled:
            w[idx[c.dst], idx[c.src]] += c.weight
    prev = np.array(state, dtype=float)
    for name, v in zip(genome.inputs, input_values):
        prev[idx[genome.inputs[name]]] = v
    pre = w @ prev
    new = np.tanh(pre)
    for name in genome.inputs:
        i = idx[genome.inputs[name]]
        new[i] = prev[i]
    return new, np.array([pre[idx[genome.outputs[k]]] for k in genome.outputs])


# ---------------------------------------------------------------------------
# construction


def _wire_output(genome: Genome, channel: str, nid: int, rng: RngStream,
                 cfg: SimConfig, innovations: InnovationCounter) -> None:
    if is_trait_channel(channel):
        w = rng.uniform(-1.0, 1.0)
        genome.connections.append(Connection(genome.inputs["bias"], nid, w, True, innovations.next()))
        return
    for name in list(genome.inputs):
        if rng.random() < cfg.control_connection_probability:
            w = rng.normal(0.0, cfg.init_weight_sigma)
            genome.connections.append(Connection(genome.inputs[name], nid, w, True, innovations.next()))


def add_node_channels(genome: Genome, uid: int, rng: RngStream, cfg: SimConfig,
                      innovations: InnovationCounter) -> None:
    """Create the 3 sensor inputs and 4 outputs of surface node ``uid``, wired like a newborn's."""
    for j in range(NODE_SENSORS):
        genome.inputs[sensor_channel(uid, j)] = genome._add_neuron("input")
    chans = [control_channel(uid, j) for j in range(NODE_CONTROLS)] + [signature_channel(uid)]
    for ch in chans:
        genome.outputs[ch] = genome._add_neuron("output")
    for ch in chans:
        _wire_output(genome, ch, genome.outputs[ch], rng, cfg, innovations)
    genome.invalidate()


def remove_node_channels(genome: Genome, uid: int) -> None:
    prefix = f"node:{uid}:"
    dead = {nid for name, nid in genome.inputs.items() if name.startswith(prefix)}
    dead |= {nid for name, nid in genome.outputs.items() if name.startswith(prefix)}
    genome.inputs = {k: v for k, v in genome.inputs.items() if not k.startswith(prefix)}
    genome.outputs = {k: v for k, v in genome.outputs.items() if not k.startswith(prefix)}
    genome.neurons = [n for n in genome.neurons if n.id not in dead]
    genome.connections = [c for c in genome.connections if c.src not in dead and c.dst not in dead]
    genome.invalidate()


def init_genome(node_count: int, rng: RngStream, cfg: SimConfig, innovations: InnovationCounter,
                colour: tuple[float, float, float] | None = None) -> Genome:
    """Fresh genome: controls 50%-wired to every input, traits wired to bias only."""
    if node_count < 1:
        raise ValueError("a protozoan needs at least one surface node")
    g = Genome()
    for name in CELL_INPUTS:
        g.inputs[name] = g._add_neuron("input")
    uids = []
    for _ in range(node_count):
        uid = g.next_node_uid
        g.next_node_uid += 1
        g.nodes.append(NodeGene(uid, rng.uniform(0.0, 2.0 * math.pi)))
        uids.append(uid)
        for j in range(NODE_SENSORS):
            g.inputs[sensor_channel(uid, j)] = g._add_neuron("input")
    out_channels = list(CELL_TRAIT_OUTPUTS) + list(CELL_CONTROL_OUTPUTS)
    for uid in uids:
        out_channels += [control_channel(uid, j) for j in range(NODE_CONTROLS)] + [signature_channel(uid)]
    for ch in out_channels:
        g.outputs[ch] = g._add_neuron("output")
    for ch in out_channels:
        _wire_output(g, ch, g.outputs[ch], rng, cfg, innovations)
    if colour is None:
        colour = (rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0))
    g.colour = colour
    return g


# ---------------------------------------------------------------------------
# mutation


def mutate_genome(genome: Genome, rng: RngStream, cfg: SimConfig,
                  innovations: InnovationCounter) -> Genome:
    """NEAT-style mutation of a copy of ``genome``; the input is left untouched."""
    g = genome.copy()
    p_reset, p_perturb = cfg.p_weight_reset, cfg.p_weight_perturb
    if p_reset > 0.0 or p_perturb > 0.0:
        for c in g.connections:
            u = rng.random()
            if u < p_reset:
                c.weight = rng.normal(0.0, cfg.init_weight_sigma)
            elif u < p_reset + p_perturb:
                c.weight += rng.normal(0.0, cfg.weight_perturb_sigma)

    if cfg.p_add_connection > 0.0 and rng.random() < cfg.p_add_connection:
        srcs = [n.id for n in g.neurons]
        dsts = [n.id for n in g.neurons if n.role != "input"]
        src = srcs[rng.integers(0, len(srcs))]
        dst = dsts[rng.integers(0, len(dsts))]
        w = rng.normal(0.0, cfg.init_weight_sigma)
        if not any(c.src == src and c.dst == dst for c in g.connections):
            g.connections.append(Connection(src, dst, w, True, innovations.next()))

    if cfg.p_add_neuron > 0.0 and rng.random() < cfg.p_add_neuron:
        enabled = [c for c in g.connections if c.enabled]
        if enabled:
            old = enabled[rng.integers(0, len(enabled))]
            split_connection(g, old, innovations)

    if cfg.p_toggle_enable > 0.0 and rng.random() < cfg.p_toggle_enable and g.connections:
        c = g.connections[rng.integers(0, len(g.connections))]
        c.enabled = not c.enabled

    g.invalidate()
    return g


def split_connection(g: Genome, old: Connection, innovations: InnovationCounter) -> int:
    """Insert a hidden neuron into ``old``: src -(1)-> new -(w)-> dst, old disabled."""
    old.enabled = False
    nid = g._add_neuron("hidden")
    g.connections.append(Connection(old.src, nid, 1.0, True, innovations.next()))
    g.connections.append(Connection(nid, old.dst, old.weight, True, innovations.next()))
    g.invalidate()
    return nid


def validate_genome(g: Genome) -> None:
    """Raise ``AssertionError`` describing the first broken invariant."""
    ids = [n.id for n in g.neurons]
    assert len(ids) == len(set(ids)), "duplicate neuron ids"
    roles = {n.id: n.role for n in g.neurons}
    assert all(i < g.next_neuron for i in ids), "neuron id beyond counter"
    for name, nid in g.inputs.items():
        assert roles.get(nid) == "input", f"input {name} not bound to an input neuron"
    for name, nid in g.outputs.items():
        assert roles.get(nid) == "output", f"output {name} not bound to an output neuron"
    bound = list(g.inputs.values()) + list(g.outputs.values())
    assert len(bound) == len(set(bound)), "neuron bound to two channels"
    assert sum(1 for n in g.neurons if n.role == "input") == len(g.inputs), "unbound input neuron"
    assert sum(1 for n in g.neurons if n.role == "output") == len(g.outputs), "unbound output neuron"
    assert "bias" in g.inputs and "random" in g.inputs, "bias/random inputs missing"
    for name in CELL_INPUTS:
        assert name in g.inputs, f"missing input {name}"
    for name in CELL_TRAIT_OUTPUTS + CELL_CONTROL_OUTPUTS:
        assert name in g.outputs, f"missing output {name}"
    assert len(g.nodes) >= 1, "no surface nodes"
    uids = [n.uid for n in g.nodes]
    assert len(uids) == len(set(uids)), "duplicate node uids"
    for uid in uids:
        for j in range(NODE_SENSORS):
            assert sensor_channel(uid, j) in g.inputs, f"node {uid} missing sensor {j}"
        for j in range(NODE_CONTROLS):
            assert control_channel(uid, j) in g.outputs, f"node {uid} missing control {j}"
        assert signature_channel(uid) in g.outputs, f"node {uid} missing signature"
    n_node_channels = sum(1 for k in list(g.inputs) + list(g.outputs) if k.startswith("node:"))
    assert n_node_channels == 7 * len(uids), "channels for unknown nodes"
    innovs = [c.innovation for c in g.connections]
    assert len(innovs) == len(set(innovs)), "duplicate innovation numbers"
    pairs = [(c.src, c.dst) for c in g.connections if c.enabled]
    assert len(pairs) == len(set(pairs)), "duplicate enabled connection"
    for c in g.connections:
        assert c.src in roles and c.dst in roles, "dangling connection"
        assert roles[c.dst] != "input", "connection into an input neuron"
        assert math.isfinite(c.weight), "non-finite weight"
    for a in (n.angle for n in g.nodes):
        assert 0.0 <= a < 2.0 * math.pi, "node angle out of range"
    assert all(0.0 <= c <= 1.0 for c in g.colour), "colour out of range"
