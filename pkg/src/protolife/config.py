"""Simulation configuration and deterministic random streams.

Config documents are INI-style text with one section per subsystem::

    [sim]
    master_seed = 42

    [chemgrid]
    chem_grid_size = 256

Keys left out take their defaults; unknown sections or keys are rejected.
``dump_config`` writes every key in a canonical order, so
``dump_config(load_config(text))`` is stable.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import os
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

SEED_ENV_VAR = "PROTOLIFE_SEED"
PRNG_ALGORITHM = f"philox4x64-10+blake2b-fork/v1 numpy-{np.__version__}"


class ConfigError(ValueError):
    """Raised for malformed config documents or out-of-range values."""


def _key(section: str, default: Any, doc: str = "") -> Any:
    return field(default=default, metadata={"section": section, "doc": doc})


@dataclass(frozen=True)
class SimConfig:
    # sim
    master_seed: int = _key("sim", 0, "64-bit master seed")
    molecule_count: int = _key("sim", 128, "molecule lattice size; signature i/molecule_count")
    attachment_type_count: int = _key("sim", 5, "number of attachment kinds (fixed)")

    # physics
    physics_dt: float = _key("physics", 0.02, "seconds per physics step")
    density: float = _key("physics", 1.0, "kg per m^2 of disc area")
    restitution: float = _key("physics", 0.1)
    linear_damping: float = _key("physics", 2.0, "viscous damping rate, 1/s")
    angular_damping: float = _key("physics", 2.0, "1/s")
    group_drag_scale_min: float = _key("physics", 0.35)
    position_slop: float = _key("physics", 1e-3, "allowed penetration, m")
    position_correction: float = _key("physics", 0.8, "fraction of penetration removed per step")
    max_speed: float = _key("physics", 4.0, "speed clamp, m/s")
    joint_frequency: float = _key("physics", 2.0, "distance joint spring frequency, Hz")
    joint_damping_ratio: float = _key("physics", 1.0)
    joint_angular_frequency: float = _key("physics", 1.0, "relative-angle spring frequency, Hz")
    joint_break_distance: float = _key("physics", 1.0, "stretch beyond rest length that breaks a binding, m")
    world_radius: float = _key("physics", 30.0, "arena radius, m")
    void_decay_rate: float = _key("physics", 0.05, "health/s per metre beyond the arena")

    # chemgrid
    chem_grid_size: int = _key("chemgrid", 1024)
    grid_tick_interval: int = _key("chemgrid", 4, "physics steps per deposit/extract/blur pass")
    chem_mass_per_area: float = _key("chemgrid", 0.5, "mass per m^2 per unit of channel value")
    deposit_blend: float = _key("chemgrid", 0.05, "per-pass interpolation toward the depositor colour")
    deposit_rate: float = _key("chemgrid", 0.1, "share of free mass and energy released into the solution per second")
    deposit_greying: float = _key("chemgrid", 0.5, "render-colour greying per unit of blend")
    colour_recovery_rate: float = _key("chemgrid", 0.05, "render-colour recovery toward base, 1/s")
    extraction_fraction: float = _key("chemgrid", 0.02, "share of the dominant channel taken per pass")
    dominant_min: float = _key("chemgrid", 0.5)
    dominance_ratio: float = _key("chemgrid", 1.5)
    dominance_additive: bool = _key("chemgrid", False, "read the dominance rule as c > other + ratio")
    blue_energy_density: float = _key("chemgrid", 1.0, "energy per mass carried by the blue channel")

    # grn
    grn_tick_interval: int = _key("grn", 5, "physics steps per GRN tick")
    init_weight_sigma: float = _key("grn", 1.0)
    control_connection_probability: float = _key("grn", 0.5)
    p_weight_perturb: float = _key("grn", 0.8)
    weight_perturb_sigma: float = _key("grn", 0.1)
    p_weight_reset: float = _key("grn", 0.05)
    p_add_connection: float = _key("grn", 0.05)
    p_add_neuron: float = _key("grn", 0.02)
    p_toggle_enable: float = _key("grn", 0.01)

    # cellcore
    energy_density_plant: float = _key("cellcore", 1.0, "energy per unit plant food")
    energy_density_meat: float = _key("cellcore", 2.0, "energy per unit meat food")
    health_decay_rate: float = _key("cellcore", 0.005, "health/s")
    death_health: float = _key("cellcore", 0.05)
    repair_mass_per_health: float = _key("cellcore", 2.0)
    repair_energy_per_health: float = _key("cellcore", 4.0)
    max_repair_rate: float = _key("cellcore", 0.05, "health/s")
    repair_reserve: float = _key("cellcore", 0.5, "mass/energy kept back before growth-first cells repair")
    max_growth_rate: float = _key("cellcore", 0.02, "m/s")
    growth_energy_per_mass: float = _key("cellcore", 1.0)
    max_digestion_rate: float = _key("cellcore", 0.5, "mass/s")
    molecule_energy_cost: float = _key("cellcore", 1.0, "energy per unit molecule produced")
    max_production_rate: float = _key("cellcore", 0.02, "molecule units/s")
    max_protozoan_radius: float = _key("cellcore", 2.0)
    min_cell_radius: float = _key("cellcore", 0.05)
    meat_fraction: float = _key("cellcore", 0.6, "share of each store a corpse keeps")
    meat_lifetime: float = _key("cellcore", 120.0, "s")
    meat_chunk_radius: float = _key("cellcore", 0.4, "corpse radius per spawned meat cell")
    plant_mass_rate: float = _key("cellcore", 0.05, "photosynthesis mass/s")
    plant_energy_rate: float = _key("cellcore", 0.05, "photosynthesis energy/s")
    plant_store_cap: float = _key("cellcore", 1.0, "photosynthesis pauses above this mass store")
    plant_growth_rate: float = _key("cellcore", 0.005, "m/s")
    plant_division_radius: float = _key("cellcore", 0.6)
    plant_initial_radius: float = _key("cellcore", 0.3)
    max_plants: int = _key("cellcore", 300)

    # surface
    construction_mass: float = _key("surface", 2.0)
    construction_energy: float = _key("surface", 4.0)
    construction_molecules: float = _key("surface", 1.0)
    build_time: float = _key("surface", 10.0, "s")
    n_rays: int = _key("surface", 8)
    ray_cone_deg: float = _key("surface", 90.0)
    ray_range_radii: float = _key("surface", 10.0)
    phago_acceptance_deg: float = _key("surface", 60.0)
    engulf_capacity: float = _key("surface", 0.8, "max engulfed prey area / predator area")
    engulf_drain_rate: float = _key("surface", 0.5, "fraction of prey absorbed per second")
    engulf_pull_rate: float = _key("surface", 2.0, "1/s")
    engulf_min_mass: float = _key("surface", 1e-3, "prey below this mass is absorbed whole")
    default_thrust: float = _key("surface", 0.2, "N")
    default_torque: float = _key("surface", 0.02, "N m")
    flagellum_multiplier: float = _key("surface", 5.0)
    thrust_energy_cost: float = _key("surface", 0.05, "energy per N s")
    torque_energy_cost: float = _key("surface", 0.5, "energy per N m s")
    spike_length: float = _key("surface", 0.5, "fraction of cell radius")
    spike_damage_rate: float = _key("surface", 2.0, "health/s per metre of penetration")
    binding_transfer_rate: float = _key("surface", 0.1, "max mass or energy moved per second per binding")

    # evolution
    r_min_div: float = _key("evolution", 0.5)
    r_max_div: float = _key("evolution", 2.0)
    division_health: float = _key("evolution", 0.15)
    division_overhead: float = _key("evolution", 0.1)
    p_node_add: float = _key("evolution", 0.02)
    p_node_del: float = _key("evolution", 0.02)
    p_node_angle: float = _key("evolution", 0.1)
    node_angle_sigma: float = _key("evolution", 0.2)
    p_colour: float = _key("evolution", 0.1)
    colour_step: float = _key("evolution", 0.02)

    # engine
    n_plants: int = _key("engine", 150)
    n_protozoa: int = _key("engine", 60)
    protozoan_nodes_min: int = _key("engine", 3)
    protozoan_nodes_max: int = _key("engine", 5)
    initial_protozoan_radius: float = _key("engine", 0.3)
    initial_energy: float = _key("engine", 8.0)
    initial_mass: float = _key("engine", 4.0)
    initial_molecules: float = _key("engine", 2.0, "units of the cell's starting molecule")
    n_formations: int = _key("engine", 8)
    formation_triangles_min: int = _key("engine", 3)
    formation_triangles_max: int = _key("engine", 12)
    rock_edge: float = _key("engine", 2.0, "triangle edge length, m")
    min_corridor: float = _key("engine", 8.0, "minimum gap between formations, m")
    stats_interval: int = _key("engine", 200)

    def __post_init__(self) -> None:
        _validate(self)

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def function_point_spacing(self) -> float:
        return 1.0 / self.attachment_type_count

    @property
    def critical_distance(self) -> float:
        return 0.5 / self.attachment_type_count


SECTIONS = ("sim", "physics", "chemgrid", "grn", "cellcore", "surface", "evolution", "engine")

_FIELDS = {f.name: f for f in fields(SimConfig)}

# (key, predicate, description of bound)
_BOUNDS = [
    ("molecule_count", lambda c: c.molecule_count >= c.attachment_type_count, ">= attachment_type_count"),
    ("attachment_type_count", lambda c: c.attachment_type_count == 5, "== 5"),
    ("chem_grid_size", lambda c: c.chem_grid_size >= 16, ">= 16"),
    ("physics_dt", lambda c: c.physics_dt > 0, "> 0"),
    ("grn_tick_interval", lambda c: c.grn_tick_interval >= 1, ">= 1"),
    ("grid_tick_interval", lambda c: c.grid_tick_interval >= 1, ">= 1"),
    ("stats_interval", lambda c: c.stats_interval >= 1, ">= 1"),
    ("world_radius", lambda c: c.world_radius > 0, "> 0"),
    ("density", lambda c: c.density > 0, "> 0"),
    ("deposit_blend", lambda c: 0 < c.deposit_blend <= 1, "in (0, 1]"),
    ("extraction_fraction", lambda c: 0 <= c.extraction_fraction <= 1, "in [0, 1]"),
    ("meat_fraction", lambda c: 0 <= c.meat_fraction <= 1, "in [0, 1]"),
    ("division_overhead", lambda c: 0 <= c.division_overhead < 1, "in [0, 1)"),
    ("engulf_capacity", lambda c: 0 < c.engulf_capacity <= 1, "in (0, 1]"),
    ("r_max_div", lambda c: c.r_max_div > c.r_min_div, "> r_min_div"),
    ("build_time", lambda c: c.build_time > 0, "> 0"),
    ("protozoan_nodes_min", lambda c: 1 <= c.protozoan_nodes_min <= c.protozoan_nodes_max,
     ">= 1 and <= protozoan_nodes_max"),
    ("formation_triangles_min", lambda c: 1 <= c.formation_triangles_min <= c.formation_triangles_max,
     ">= 1 and <= formation_triangles_max"),
    ("n_rays", lambda c: c.n_rays >= 1, ">= 1"),
    ("master_seed", lambda c: 0 <= c.master_seed < 2**64, "in [0, 2^64)"),
]


def _validate(cfg: SimConfig) -> None:
    for name, ok, bound in _BOUNDS:
        if not ok(cfg):
            raise ConfigError(f"{name} = {getattr(cfg, name)!r} violates bound {bound}")
    for f in fields(cfg):
        if f.type in ("float", "int") and isinstance(getattr(cfg, f.name), (int, float)):
            if getattr(cfg, f.name) < 0 and f.name != "master_seed":
                raise ConfigError(f"{f.name} = {getattr(cfg, f.name)!r} violates bound >= 0")


def _parse_value(name: str, raw: str) -> Any:
    kind = _FIELDS[name].type
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw, 0)
        return float(raw)
    except ValueError:
        raise ConfigError(f"key {name!r}: cannot parse {raw!r} as {kind}") from None


def load_config(text: str, *, env: dict[str, str] | None = None) -> SimConfig:
    """Parse a config document; missing keys default, unknown keys are errors.

    ``env`` (default ``os.environ``) may carry ``PROTOLIFE_SEED``, which
    overrides ``master_seed`` and nothing else.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None

    values: dict[str, Any] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _FIELDS:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if _FIELDS[key].metadata["section"] != section:
                want = _FIELDS[key].metadata["section"]
                raise ConfigError(f"key {key!r} belongs in section [{want}], not [{section}]")
            values[key] = _parse_value(key, raw)

    env = os.environ if env is None else env
    if env.get(SEED_ENV_VAR):
        try:
            values["master_seed"] = _parse_value("master_seed", env[SEED_ENV_VAR])
        except ConfigError as exc:
            raise ConfigError(f"environment variable {SEED_ENV_VAR}: {exc}") from None
    return SimConfig(**values)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: SimConfig) -> str:
    lines: list[str] = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for f in fields(cfg):
            if f.metadata["section"] == section:
                lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
        lines.append("")
    return "\n".join(lines)


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def config_from_dict(data: dict[str, Any]) -> SimConfig:
    unknown = set(data) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    return SimConfig(**data)


# ---------------------------------------------------------------------------
# random streams


def _derive_key(material: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(material, digest_size=16).digest(), "little")


class RngStream:
    """A labelled Philox stream.

    Children are keyed by ``blake2b(parent key, label)``, so forking depends
    only on the parent's identity and the label, never on how many values the
    parent has drawn.
    """

    __slots__ = ("label", "key", "gen")

    def __init__(self, label: str, key: int) -> None:
        self.label = label
        self.key = key
        self.gen = np.random.Generator(np.random.Philox(key=key))

    @classmethod
    def root(cls, master_seed: int) -> "RngStream":
        return cls("root", _derive_key(b"protolife-root:" + int(master_seed).to_bytes(8, "little")))

    def fork(self, label: str) -> "RngStream":
        return fork_stream(self, label)

    # thin draw helpers; every random number in the simulator goes through these
    def random(self) -> float:
        return float(self.gen.random())

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * float(self.gen.random())

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        return float(self.gen.normal(mu, sigma))

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return int(self.gen.integers(lo, hi))

    def get_state(self) -> dict[str, Any]:
        st = self.gen.bit_generator.state
        return {
            "label": self.label,
            "key": str(self.key),
            "counter": [int(x) for x in st["state"]["counter"]],
            "buffer": [int(x) for x in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    @classmethod
    def from_state(cls, data: dict[str, Any]) -> "RngStream":
        stream = cls(data["label"], int(data["key"]))
        st = stream.gen.bit_generator.state
        st["state"]["counter"] = np.array(data["counter"], dtype=np.uint64)
        st["buffer"] = np.array(data["buffer"], dtype=np.uint64)
        st["buffer_pos"] = data["buffer_pos"]
        st["has_uint32"] = data["has_uint32"]
        st["uinteger"] = data["uinteger"]
        stream.gen.bit_generator.state = st
        return stream


def fork_stream(parent: RngStream, label: str) -> RngStream:
    if not label:
        raise ValueError("stream label must be non-empty")
    material = parent.key.to_bytes(16, "little") + b"/" + label.encode("utf-8")
    return RngStream(f"{parent.label}/{label}", _derive_key(material))
