"""Command-line interface: ``protolife run | verify-replay | render | stats | dump``.

Exit codes: 0 success, 1 replay mismatch or bad input data, 2 invalid
config or arguments, 3 missing or incompatible artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any

from .config import PRNG_ALGORITHM, SEED_ENV_VAR, ConfigError, SimConfig, dump_config, load_config
from .engine import StatsRow, World
from .snapshot import FORMAT_VERSION, SnapshotError, restore, snapshot, world_to_dict

STATS_FORMAT = 1
MANIFEST_FORMAT = 1


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# stats CSV


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_stats_header(fh, cfg: SimConfig) -> None:
    fh.write(f"# stats-format {STATS_FORMAT}\n")
    for line in dump_config(cfg).splitlines():
        fh.write(f"# {line}\n" if line else "#\n")
    fh.write(",".join(StatsRow.header()) + "\n")


def write_stats_row(fh, row: StatsRow) -> None:
    fh.write(",".join(_fmt(v) for v in row.values()) + "\n")


def read_stats(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """Parse a stats CSV; returns (columns, rows)."""
    if not path.exists():
        raise CliError(f"stats file not found: {path}", 3)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# stats-format "):
        raise CliError(f"malformed stats CSV {path}: missing '# stats-format' line", 1)
    version = lines[0].split()[-1]
    if version != str(STATS_FORMAT):
        raise CliError(f"stats CSV {path} has format {version}, expected {STATS_FORMAT}", 1)
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(body)
    try:
        columns = next(reader)
    except StopIteration:
        raise CliError(f"malformed stats CSV {path}: no header row", 1) from None
    rows = []
    for i, rec in enumerate(reader, start=2):
        if len(rec) != len(columns):
            raise CliError(f"malformed stats CSV {path}: data row {i} has {len(rec)} fields, "
                           f"expected {len(columns)}", 1)
        rows.append(dict(zip(columns, rec)))
    return columns, rows


def summarize(columns: list[str], rows: list[dict[str, str]]) -> dict[str, dict[str, float] | None]:
    """min/mean/max per numeric column; None where a column never has a value."""
    out: dict[str, dict[str, float] | None] = {}
    for col in columns:
        vals = []
        for r in rows:
            raw = r[col]
            if raw == "":
                continue
            try:
                vals.append(float(raw))
            except ValueError:
                raise CliError(f"malformed stats CSV: column {col} has non-numeric value {raw!r}", 1) from None
        out[col] = (None if not vals else
                    {"min": min(vals), "mean": math.fsum(vals) / len(vals), "max": max(vals)})
    return out


# ---------------------------------------------------------------------------
# commands


def _load_cfg(args) -> SimConfig:
    text = ""
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise CliError(f"config file not found: {p}", 2)
        text = p.read_text()
    try:
        cfg = load_config(text)
        if args.seed is not None:
            cfg = cfg.replace(master_seed=args.seed)
        if args.stats_interval is not None:
            cfg = cfg.replace(stats_interval=args.stats_interval)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", 2) from None
    return cfg


def _snap_name(tick: int) -> str:
    return f"snapshots/snap_{tick:010d}.bin"


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    if args.steps < 0:
        raise CliError("--steps must be >= 0", 2)
    if args.snapshot_interval is not None and args.snapshot_interval < 1:
        raise CliError("--snapshot-interval must be >= 1", 2)
    out = Path(args.out)
    try:
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", 3) from None
    (out / "config.ini").write_text(dump_config(cfg))

    world = World(cfg)
    snaps: list[dict[str, Any]] = []

    def save() -> None:
        name = _snap_name(world.tick)
        (out / name).write_bytes(snapshot(world))
        snaps.append({"tick": world.tick, "path": name})

    save()
    interval = args.snapshot_interval
    with open(out / "stats.csv", "w", newline="") as fh:
        write_stats_header(fh, cfg)
        written = 0
        for _ in range(args.steps):
            world.step()
            while written < len(world.stats):
                write_stats_row(fh, world.stats[written])
                written += 1
            if interval and world.tick % interval == 0:
                save()
    if not snaps or snaps[-1]["tick"] != world.tick:
        save()

    manifest = {
        "manifest_format": MANIFEST_FORMAT,
        "snapshot_format": FORMAT_VERSION,
        "stats_format": STATS_FORMAT,
        "prng": PRNG_ALGORITHM,
        "master_seed": cfg.master_seed,
        "config": dump_config(cfg),
        "start_tick": 0,
        "end_tick": world.tick,
        "steps": args.steps,
        "snapshot_interval": interval,
        "stats": "stats.csv",
        "snapshots": snaps,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"ran {args.steps} steps to tick {world.tick}; "
          f"{len(snaps)} snapshots; manifest {out / 'manifest.json'}")
    return 0


def _load_manifest(path: str) -> tuple[Path, dict[str, Any]]:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.exists():
        raise CliError(f"manifest not found: {p}", 3)
    try:
        m = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed manifest {p}: {exc}", 3) from None
    if m.get("manifest_format") != MANIFEST_FORMAT:
        raise CliError(f"manifest format {m.get('manifest_format')!r} not supported", 3)
    return p.parent, m


def first_difference(a: Any, b: Any, path: str = "") -> str | None:
    """Path of the first differing element of two decoded JSON values."""
    if type(a) is not type(b):
        return path or "<root>"
    if isinstance(a, dict):
        for k in list(a) + [k for k in b if k not in a]:
            if k not in a or k not in b:
                return f"{path}.{k}"
            d = first_difference(a[k], b[k], f"{path}.{k}")
            if d:
                return d
        return None
    if isinstance(a, list):
        for i, (x, y) in enumerate(zip(a, b)):
            d = first_difference(x, y, f"{path}[{i}]")
            if d:
                return d
        return None if len(a) == len(b) else f"{path}.length"
    return None if a == b else (path or "<root>")


def verify_pair(base: Path, snap_a: dict[str, Any], snap_b: dict[str, Any]) -> tuple[bool, str]:
    pa, pb = base / snap_a["path"], base / snap_b["path"]
    for p in (pa, pb):
        if not p.exists():
            raise CliError(f"missing snapshot {p}", 3)
    try:
        world = restore(pa.read_bytes())
    except SnapshotError as exc:
        if "format" in str(exc) or "PRNG" in str(exc):
            raise CliError(f"refusing to compare: {pa}: {exc}", 3) from None
        return False, f"snapshot {pa.name} unreadable: {exc}"
    if world.tick != snap_a["tick"]:
        return False, f"snapshot {pa.name} holds tick {world.tick}, manifest says {snap_a['tick']}"
    expected = pb.read_bytes()
    try:
        ref = restore(expected)
    except SnapshotError as exc:
        if "format" in str(exc) or "PRNG" in str(exc):
            raise CliError(f"refusing to compare: {pb}: {exc}", 3) from None
        return False, f"snapshot {pb.name} unreadable: {exc}"
    ref_state = world_to_dict(ref)
    while world.tick < snap_b["tick"]:
        world.step()
    got = snapshot(world)
    if got == expected:
        return True, f"tick {snap_a['tick']} -> {snap_b['tick']}: identical"
    where = first_difference(world_to_dict(world), ref_state) or "chemical grid"
    return False, (f"divergence by tick {snap_b['tick']} (replayed from tick {snap_a['tick']}); "
                   f"first differing field: {where}")


def cmd_verify_replay(args) -> int:
    base, m = _load_manifest(args.manifest)
    snaps = m["snapshots"]
    if len(snaps) < 2:
        raise CliError("manifest lists fewer than two snapshots; nothing to replay", 3)
    indices = range(len(snaps) - 1) if args.index is None else [args.index]
    ok = True
    for i in indices:
        if not 0 <= i < len(snaps) - 1:
            raise CliError(f"snapshot index {i} out of range 0..{len(snaps) - 2}", 2)
        passed, msg = verify_pair(base, snaps[i], snaps[i + 1])
        print(f"{'PASS' if passed else 'FAIL'} [{i}] {msg}")
        ok &= passed
    return 0 if ok else 1


def _restore_file(p: Path):
    if not p.is_file():
        raise CliError(f"snapshot not found: {p}", 3)
    try:
        return restore(p.read_bytes())
    except OSError as exc:
        raise CliError(f"cannot read {p}: {exc.strerror}", 3) from None
    except SnapshotError as exc:
        raise CliError(f"{p}: {exc}", 3) from None


def cmd_render(args) -> int:
    from .render import render, write_png
    p = Path(args.snapshot)
    world = _restore_file(p)
    try:
        write_png(args.output, render(world, args.render_scale))
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", 3) from None
    print(f"wrote {args.output}")
    return 0


def cmd_stats(args) -> int:
    p = Path(args.source)
    if p.suffix == ".csv":
        csv_path = p
    else:
        base, m = _load_manifest(args.source)
        csv_path = base / m["stats"]
    columns, rows = read_stats(csv_path)
    summary = summarize(columns, rows)
    print(f"{len(rows)} samples from {csv_path}")
    print(f"{'metric':<20} {'min':>12} {'mean':>12} {'max':>12}")
    for col in columns:
        s = summary[col]
        if s is None:
            print(f"{col:<20} {'(none)':>12}")
        else:
            print(f"{col:<20} {s['min']:>12.6g} {s['mean']:>12.6g} {s['max']:>12.6g}")
    if summary.get("mc_min") is None:
        print("no multicellular structures were recorded")
    if args.series_dir:
        d = Path(args.series_dir)
        d.mkdir(parents=True, exist_ok=True)
        for col in columns:
            if col == "tick":
                continue
            with open(d / f"{col}.csv", "w", newline="") as fh:
                fh.write(f"tick,{col}\n")
                for r in rows:
                    fh.write(f"{r['tick']},{r[col]}\n")
        print(f"series written to {d}")
    return 0


def cmd_dump(args) -> int:
    p = Path(args.snapshot)
    world = _restore_file(p)
    from .snapshot import cell_to_dict
    if args.cell is None:
        print(f"tick {world.tick}: {len(world.cells)} cells, {len(world.bindings)} bindings")
        for cid in sorted(world.cells):
            c = world.cells[cid]
            print(f"{cid:>6} {c.kind.value:<9} gen {c.generation:<4} health {c.health:.3f} "
                  f"r {c.radius(world.cfg):.3f} E {c.energy:.3f} M {c.construction_mass:.3f}")
        return 0
    c = world.cells.get(args.cell)
    if c is None:
        raise CliError(f"no cell {args.cell} in {p}", 1)
    if args.genome:
        if c.genome is None:
            raise CliError(f"cell {args.cell} has no genome", 1)
        print(c.genome.dump())
    else:
        d = cell_to_dict(c)
        d.pop("genome")
        print(json.dumps(d, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="protolife", description="Evolving protozoa ecosystem simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded simulation")
    run.add_argument("--config", help="config file (INI); defaults for missing keys")
    run.add_argument("--seed", type=int, help=f"master seed (overrides config and ${SEED_ENV_VAR})")
    run.add_argument("--steps", type=int, required=True, help="physics steps to run")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--snapshot-interval", type=int, help="steps between snapshots")
    run.add_argument("--stats-interval", type=int, help="steps between stats rows")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify-replay", help="re-simulate between snapshots and compare bytes")
    ver.add_argument("manifest", help="manifest.json or run directory")
    ver.add_argument("--index", type=int, help="check only snapshot i -> i+1")
    ver.set_defaults(func=cmd_verify_replay)

    ren = sub.add_parser("render", help="render a snapshot to PNG")
    ren.add_argument("snapshot")
    ren.add_argument("output")
    ren.add_argument("--render-scale", type=float, default=8.0, help="pixels per metre")
    ren.set_defaults(func=cmd_render)

    st = sub.add_parser("stats", help="summarize a run's stats CSV")
    st.add_argument("source", help="manifest.json, run directory or stats CSV")
    st.add_argument("--series-dir", help="write one tick,value CSV per metric here")
    st.set_defaults(func=cmd_stats)

    dp = sub.add_parser("dump", help="list cells or dump one cell / genome")
    dp.add_argument("snapshot")
    dp.add_argument("--cell", type=int)
    dp.add_argument("--genome", action="store_true")
    dp.set_defaults(func=cmd_dump)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
