"""Binary world snapshots.

Layout (all integers little-endian)::

    8 bytes   magic b"PROTOSNP"
    u32       format version
    u32       header length H
    H bytes   header JSON: format, prng, tick, config (canonical text)
    u64       body length B
    B bytes   zlib(JSON world state)
    u64       grid length G
    G bytes   zlib(float64 grid pixels, row-major [row, col, channel])
    u32       CRC-32 of every preceding byte

JSON keeps dict insertion order so that a restored world iterates exactly
like the original.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import fields
from typing import Any

import numpy as np

from . import grn
from .cells import Cell, CellKind, Ledger
from .chemgrid import ChemGrid
from .config import PRNG_ALGORITHM, RngStream, dump_config, load_config
from .engine import Binding, World
from .nodes import SurfaceNode
from .physics import Body, Joint, PhysicsParams, PhysicsWorld

MAGIC = b"PROTOSNP"
FORMAT_VERSION = 1


class SnapshotError(ValueError):
    """Corrupt, truncated or incompatible snapshot."""


def _body_to_dict(b: Body) -> dict[str, Any]:
    d = {f.name: getattr(b, f.name) for f in fields(b)}
    d["vertices"] = [list(v) for v in b.vertices]
    d["colour"] = list(b.colour)
    return d


def _body_from_dict(d: dict[str, Any]) -> Body:
    d = dict(d)
    d["vertices"] = tuple(tuple(v) for v in d["vertices"])
    d["colour"] = tuple(d["colour"])
    return Body(**d)


def _joint_to_dict(j: Joint) -> dict[str, Any]:
    d = {f.name: getattr(j, f.name) for f in fields(j)}
    d["anchor_a"] = list(j.anchor_a)
    d["anchor_b"] = list(j.anchor_b)
    return d


def _joint_from_dict(d: dict[str, Any]) -> Joint:
    d = dict(d)
    d["anchor_a"] = tuple(d["anchor_a"])
    d["anchor_b"] = tuple(d["anchor_b"])
    return Joint(**d)


def cell_to_dict(c: Cell) -> dict[str, Any]:
    return {
        "id": c.id, "kind": c.kind.value, "body_id": c.body_id,
        "tissue": c.tissue, "tissue_energy": c.tissue_energy, "energy": c.energy,
        "construction_mass": c.construction_mass, "plant_food": c.plant_food, "meat_food": c.meat_food,
        "molecules": [[k, v] for k, v in c.molecules.items()],
        "health": c.health, "colour": list(c.colour), "render_colour": list(c.render_colour),
        "generation": c.generation, "parent_id": c.parent_id, "birth_tick": c.birth_tick,
        "age": c.age, "alive": c.alive,
        "genome": None if c.genome is None else c.genome.to_dict(),
        "grn_state": None if c.grn_state is None else c.grn_state.tolist(),
        "nodes": [n.to_dict() for n in c.nodes],
        "traits": dict(c.traits),
        "rng": None if c.rng is None else c.rng.get_state(),
        "engulfed_by": c.engulfed_by, "prey": list(c.prey), "prey_start_mass": c.prey_start_mass,
        "engulf_dx": c.engulf_dx, "engulf_dy": c.engulf_dy,
        "last_prey_kind": c.last_prey_kind, "last_prey_id": c.last_prey_id,
    }


def cell_from_dict(d: dict[str, Any]) -> Cell:
    d = dict(d)
    d["kind"] = CellKind(d["kind"])
    d["molecules"] = {int(k): v for k, v in d["molecules"]}
    d["colour"] = tuple(d["colour"])
    d["render_colour"] = tuple(d["render_colour"])
    d["genome"] = None if d["genome"] is None else grn.Genome.from_dict(d["genome"])
    d["grn_state"] = None if d["grn_state"] is None else np.array(d["grn_state"], dtype=np.float64)
    d["nodes"] = [SurfaceNode.from_dict(n) for n in d["nodes"]]
    d["rng"] = None if d["rng"] is None else RngStream.from_state(d["rng"])
    return Cell(**d)


def world_to_dict(w: World) -> dict[str, Any]:
    ph = w.physics
    return {
        "tick": w.tick,
        "next_cell_id": w.next_cell_id,
        "next_binding_id": w.next_binding_id,
        "baseline": list(w.baseline),
        "innovation": w.innovations.value,
        "engine_rng": w.engine_rng.get_state(),
        "rocks": [[[list(p) for p in tri] for tri in f] for f in w.rocks],
        "physics": {
            "next_body_id": ph.next_body_id,
            "next_joint_id": ph.next_joint_id,
            "bodies": [_body_to_dict(b) for b in ph.bodies.values()],
            "joints": [_joint_to_dict(j) for j in ph.joints.values()],
        },
        "cells": [cell_to_dict(c) for c in w.cells.values()],
        "bindings": [b.to_dict() for b in w.bindings.values()],
        "ledger": w.ledger.to_dict(),
    }


def snapshot(w: World) -> bytes:
    header = json.dumps({
        "format": FORMAT_VERSION,
        "prng": PRNG_ALGORITHM,
        "tick": w.tick,
        "config": dump_config(w.cfg),
    }, separators=(",", ":")).encode("utf-8")
    body = zlib.compress(json.dumps(world_to_dict(w), separators=(",", ":")).encode("utf-8"), 6)
    grid = zlib.compress(w.grid.to_bytes(), 6)
    out = bytearray(MAGIC)
    out += struct.pack("<II", FORMAT_VERSION, len(header))
    out += header
    out += struct.pack("<Q", len(body)) + body
    out += struct.pack("<Q", len(grid)) + grid
    out += struct.pack("<I", zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


def _split(data: bytes) -> tuple[dict[str, Any], bytes, bytes]:
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise SnapshotError("not a snapshot (bad magic or too short)")
    version, hlen = struct.unpack_from("<II", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise SnapshotError(f"snapshot format {version} does not match supported format {FORMAT_VERSION}")
    if len(data) < 4:
        raise SnapshotError("truncated snapshot")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise SnapshotError("snapshot checksum mismatch (corrupt or truncated)")
    pos = len(MAGIC) + 8
    try:
        header = json.loads(data[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        (blen,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        body = zlib.decompress(data[pos:pos + blen])
        pos += blen
        (glen,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        grid = zlib.decompress(data[pos:pos + glen])
        pos += glen
    except (struct.error, zlib.error, ValueError) as exc:
        raise SnapshotError(f"corrupt snapshot: {exc}") from None
    if pos != len(data) - 4:
        raise SnapshotError("trailing bytes in snapshot")
    return header, body, grid


def read_header(data: bytes) -> dict[str, Any]:
    return _split(data)[0]


def restore(data: bytes) -> World:
    header, body, grid = _split(data)
    if header.get("prng") != PRNG_ALGORITHM:
        raise SnapshotError(f"snapshot PRNG {header.get('prng')!r} differs from {PRNG_ALGORITHM!r}")
    try:
        cfg = load_config(header["config"], env={})
        return _world_from_dict(cfg, json.loads(body.decode("utf-8")), grid)
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"corrupt snapshot state: {exc}") from None


def _world_from_dict(cfg, d: dict[str, Any], grid: bytes) -> World:
    w = World.__new__(World)
    w.cfg = cfg
    w.tick = d["tick"]
    w.next_cell_id = d["next_cell_id"]
    w.next_binding_id = d["next_binding_id"]
    w.baseline = tuple(d["baseline"])
    w.innovations = grn.InnovationCounter(d["innovation"])
    w.root = RngStream.root(cfg.master_seed)
    w.cell_streams = w.root.fork("cells")
    w.engine_rng = RngStream.from_state(d["engine_rng"])
    w.rocks = [[tuple(tuple(p) for p in tri) for tri in f] for f in d["rocks"]]
    w.stats = []
    ph = PhysicsWorld(PhysicsParams.from_config(cfg))
    ph.next_body_id = d["physics"]["next_body_id"]
    ph.next_joint_id = d["physics"]["next_joint_id"]
    for bd in d["physics"]["bodies"]:
        b = _body_from_dict(bd)
        ph.bodies[b.id] = b
    for jd in d["physics"]["joints"]:
        j = _joint_from_dict(jd)
        ph.joints[j.id] = j
    w.physics = ph
    w.cells = {}
    for cd in d["cells"]:
        c = cell_from_dict(cd)
        w.cells[c.id] = c
    w.bindings = {}
    for bd in d["bindings"]:
        b = Binding(**bd)
        w.bindings[b.id] = b
    w.ledger = Ledger.from_dict(d["ledger"])
    w.grid = ChemGrid.from_config(cfg)
    w.grid.load_bytes(grid)
    return w
