import pytest

from protolife.engine import World
from protolife.snapshot import SnapshotError, read_header, restore, snapshot

from conftest import small_config
from helpers import edit_body, with_header, with_version


@pytest.fixture(scope="module")
def world():
    w = World(small_config())
    w.run(120)
    return w


def test_fresh_world_idempotent():
    w = World(small_config())
    a = snapshot(w)
    assert snapshot(restore(a)) == a


def test_running_world_idempotent(world):
    a = snapshot(world)
    assert snapshot(restore(a)) == a


def test_header_fields(world):
    h = read_header(snapshot(world))
    assert h["format"] == 1 and h["tick"] == world.tick
    assert h["prng"] and "master_seed" in h["config"]


def test_replay_equivalence(world):
    start = snapshot(world)
    a = restore(start)
    b = restore(start)
    a.run(300)
    b.run(300)
    assert snapshot(a) == snapshot(b)
    original = World(small_config())
    original.run(world.tick + 300)
    assert snapshot(original) == snapshot(a)


def test_truncated(world):
    data = snapshot(world)
    for n in (0, 5, 20, len(data) // 2, len(data) - 1):
        with pytest.raises(SnapshotError):
            restore(data[:n])


def test_flipped_byte(world):
    data = bytearray(snapshot(world))
    data[len(data) // 2] ^= 0x01
    with pytest.raises(SnapshotError, match="checksum"):
        restore(bytes(data))


def test_bad_magic(world):
    with pytest.raises(SnapshotError, match="magic"):
        restore(b"NOTASNAP" + snapshot(world)[8:])


def test_version_mismatch(world):
    with pytest.raises(SnapshotError, match="format 2"):
        restore(with_version(snapshot(world), 2))


def test_prng_mismatch(world):
    data = with_header(snapshot(world), lambda h: h.update(prng="mt19937"))
    with pytest.raises(SnapshotError, match="PRNG"):
        restore(data)


def test_missing_state_field(world):
    data = edit_body(snapshot(world), lambda s: s.pop("cells"))
    with pytest.raises(SnapshotError):
        restore(data)


def test_valid_tamper_restores_but_diverges(world):
    def bump(state):
        state["cells"][0]["energy"] += 1.0
    data = edit_body(snapshot(world), bump)
    w = restore(data)
    assert w.cells[min(w.cells)].energy == pytest.approx(world.cells[min(world.cells)].energy + 1.0)
    assert snapshot(w) != snapshot(world)
