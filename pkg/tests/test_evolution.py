import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from protolife import grn
from protolife.cells import Cell, CellKind, Ledger, tissue_for_radius
from protolife.config import RngStream
from protolife.evolution import divide, division_check, expected_children, fan_child_radius, \
    mutate_unregulated, sample_child_count, split_resources

from conftest import small_config

NO_GRN_MUTATION = dict(p_weight_perturb=0.0, p_weight_reset=0.0, p_add_connection=0.0,
                       p_add_neuron=0.0, p_toggle_enable=0.0)
NO_NODE_MUTATION = dict(p_node_add=0.0, p_node_del=0.0, p_node_angle=0.0, p_colour=0.0)


def sized(cfg, r, health=1.0, threshold=None):
    c = Cell(id=0, kind=CellKind.PROTOZOAN, tissue=tissue_for_radius(r, cfg), health=health)
    if threshold is not None:
        c.traits = {"division_threshold": threshold}
    return c


def test_division_check_examples(cfg):
    assert not division_check(sized(cfg, 1.0, health=0.15, threshold=0.8), cfg)
    assert division_check(sized(cfg, 1.0, health=0.1500001, threshold=0.8), cfg)
    assert not division_check(sized(cfg, 0.7, health=0.9, threshold=0.8), cfg)
    assert division_check(sized(cfg, 0.9, health=0.5, threshold=0.8), cfg)


def test_dead_cells_never_divide(cfg):
    c = sized(cfg, 1.0, threshold=0.5)
    c.alive = False
    assert not division_check(c, cfg)


def test_child_count_at_min_radius(cfg):
    rng = RngStream.root(1)
    counts = np.bincount([sample_child_count(cfg.r_min_div, rng, cfg) for _ in range(10_000)], minlength=7)
    assert counts[2] == 10_000


def test_child_count_mean_rises_with_radius(cfg):
    rng = RngStream.root(2)
    means = []
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        r = cfg.r_min_div + t * (cfg.r_max_div - cfg.r_min_div)
        xs = [sample_child_count(r, rng, cfg) for _ in range(10_000)]
        assert min(xs) >= 2 and max(xs) <= 6
        means.append(np.mean(xs))
        # documented mapping: expected count 2 + 4t, rounded stochastically
        assert means[-1] == pytest.approx(2.0 + 4.0 * t, abs=0.05)
    assert means == sorted(means)
    assert sample_child_count(10.0, rng, cfg) == 6


def test_expected_children_clamped(cfg):
    assert expected_children(0.0, cfg) == 2.0
    assert expected_children(100.0, cfg) == 6.0


def test_fan_children_fit_without_overlap():
    for n in range(2, 7):
        R = 1.0
        rc = fan_child_radius(R, n)
        ring = rc / math.sin(math.pi / n)
        assert ring + rc <= R + 1e-12
        # neighbouring children touch but do not overlap
        chord = 2 * ring * math.sin(math.pi / n)
        assert chord >= 2 * rc - 1e-12
        assert n * rc * rc <= R * R


def test_split_four_ways_even(cfg):
    q = cfg.replace(division_overhead=0.0, min_cell_radius=0.01)
    E, M = 8.0, 3.0
    p = sized(q, 1.0)
    p.energy, p.construction_mass = E, M
    p.tissue_energy = 0.0
    p.molecules = {7: 2.0}
    ledger = Ledger()
    kids = split_resources(p, 0.0, 0.0, 4, RngStream.root(0), q, ledger)
    assert len(kids) == 4
    for k in kids:
        assert k.energy == pytest.approx(E / 4)
        assert k.construction_mass + k.tissue == pytest.approx((M + p.tissue) / 4)
        assert k.molecules == {7: pytest.approx(0.5)}
    assert ledger.sink_mass == 0.0 and ledger.sink_energy == 0.0


def test_division_ledger_balances(cfg):
    p = sized(cfg, 1.3)
    p.tissue_energy = cfg.growth_energy_per_mass * p.tissue
    p.energy, p.construction_mass, p.plant_food, p.meat_food = 5.0, 2.0, 0.3, 0.2
    p.molecules = {3: 1.0, 90: 0.5}
    ledger = Ledger()
    kids = split_resources(p, 0.0, 0.0, 5, RngStream.root(4), cfg, ledger)
    mass = sum(k.tissue + k.construction_mass + k.plant_food + k.meat_food + sum(k.molecules.values())
               for k in kids)
    energy = sum(k.tissue_energy + k.energy + k.plant_food * cfg.energy_density_plant
                 + k.meat_food * cfg.energy_density_meat for k in kids)
    assert mass + ledger.sink_mass == pytest.approx(p.total_mass(), rel=1e-12)
    assert energy + ledger.sink_energy == pytest.approx(p.total_energy(cfg), rel=1e-12)
    assert ledger.sink_mass == pytest.approx(cfg.division_overhead * p.total_mass())


def test_children_inside_parent_disc(cfg):
    p = sized(cfg, 1.5)
    for n in range(2, 7):
        kids = split_resources(p, 3.0, -1.0, n, RngStream.root(n), cfg, Ledger())
        r = fan_child_radius(1.5, len(kids))
        for i, a in enumerate(kids):
            assert math.hypot(a.x - 3.0, a.y + 1.0) + r <= 1.5 + 1e-9
            for b in kids[i + 1:]:
                assert math.hypot(a.x - b.x, a.y - b.y) >= 2 * r - 1e-9


def _parent(cfg, seed=5, nodes=3):
    inn = grn.InnovationCounter()
    rng = RngStream.root(seed)
    g = grn.init_genome(nodes, rng, cfg, inn)
    p = sized(cfg, 1.0)
    p.genome = g
    p.energy, p.construction_mass = 4.0, 2.0
    return p, rng, inn


def test_zero_rates_children_identical(cfg):
    q = cfg.replace(**NO_GRN_MUTATION, **NO_NODE_MUTATION)
    p, rng, inn = _parent(q)
    kids = divide(p, 0.0, 0.0, rng, q, Ledger(), inn)
    assert 2 <= len(kids) <= 6
    for k in kids:
        assert k.genome.to_dict() == p.genome.to_dict()
        assert [(n.uid, n.angle) for n in k.genome.nodes] == [(n.uid, n.angle) for n in p.genome.nodes]


def test_zero_rate_child_expresses_like_parent(cfg):
    q = cfg.replace(**NO_GRN_MUTATION, **NO_NODE_MUTATION)
    p, rng, inn = _parent(q)
    child = divide(p, 0.0, 0.0, rng, q, Ledger(), inn)[0].genome
    inputs = np.random.default_rng(0).uniform(-1, 1, len(p.genome.inputs))
    s_p = np.zeros(len(p.genome.neurons))
    s_c = np.zeros(len(child.neurons))
    for _ in range(5):
        s_p, raw_p = grn.tick(p.genome.compiled(), s_p, inputs)
        s_c, raw_c = grn.tick(child.compiled(), s_c, inputs)
        assert np.array_equal(raw_p, raw_c)


def test_mutate_unregulated_identity(cfg):
    q = cfg.replace(**NO_NODE_MUTATION)
    p, rng, inn = _parent(q)
    assert mutate_unregulated(p.genome, rng, q, inn).to_dict() == p.genome.to_dict()


def test_delete_on_single_node_is_noop(cfg):
    q = cfg.replace(**{**NO_NODE_MUTATION, "p_node_del": 1.0})
    p, rng, inn = _parent(q, nodes=1)
    assert mutate_unregulated(p.genome, rng, q, inn).to_dict() == p.genome.to_dict()


def test_node_add_channel_audit(cfg):
    q = cfg.replace(**{**NO_NODE_MUTATION, "p_node_add": 1.0})
    p, rng, inn = _parent(q)
    g = mutate_unregulated(p.genome, rng, q, inn)
    assert len(g.outputs) == len(p.genome.outputs) + 4
    assert len(g.inputs) == len(p.genome.inputs) + 3
    (new,) = {n.uid for n in g.nodes} - {n.uid for n in p.genome.nodes}
    assert {k for k in g.outputs if k.startswith(f"node:{new}:")} == {
        grn.control_channel(new, 0), grn.control_channel(new, 1), grn.control_channel(new, 2),
        grn.signature_channel(new)}
    assert 0.0 <= next(n.angle for n in g.nodes if n.uid == new) < 2 * math.pi
    grn.validate_genome(g)


def test_node_delete_removes_channels(cfg):
    q = cfg.replace(**{**NO_NODE_MUTATION, "p_node_del": 1.0})
    p, rng, inn = _parent(q)
    g = mutate_unregulated(p.genome, rng, q, inn)
    (gone,) = {n.uid for n in p.genome.nodes} - {n.uid for n in g.nodes}
    assert not any(k.startswith(f"node:{gone}:") for k in list(g.inputs) + list(g.outputs))
    assert len(g.outputs) == len(p.genome.outputs) - 4
    assert len(g.inputs) == len(p.genome.inputs) - 3
    grn.validate_genome(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_node_order_stable(seed, nodes):
    cfg = small_config(p_node_add=0.5, p_node_del=0.5, p_node_angle=0.0, p_colour=0.0)
    p, rng, inn = _parent(cfg, seed, nodes)
    g = p.genome
    for _ in range(10):
        h = mutate_unregulated(g, rng, cfg, inn)
        before = [n.uid for n in g.nodes]
        survivors = [n.uid for n in h.nodes if n.uid in set(before)]
        assert survivors == [u for u in before if u in set(survivors)]
        assert len(h.nodes) >= 1
        angles = {n.uid: n.angle for n in g.nodes}
        assert all(n.angle == angles[n.uid] for n in h.nodes if n.uid in angles)
        g = h


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_angle_and_colour_stay_in_range(seed):
    cfg = small_config(p_node_add=0.0, p_node_del=0.0, p_node_angle=1.0, p_colour=1.0)
    p, rng, inn = _parent(cfg, seed, 2)
    g = p.genome
    for _ in range(30):
        h = mutate_unregulated(g, rng, cfg, inn)
        assert all(0.0 <= n.angle < 2 * math.pi for n in h.nodes)
        assert all(0.0 <= c <= 1.0 for c in h.colour)
        steps = [abs(a - b) for a, b in zip(h.colour, g.colour)]
        assert sum(s > 1e-12 for s in steps) <= 1
        assert max(steps) <= cfg.colour_step + 1e-12
        g = h
