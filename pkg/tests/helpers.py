"""Byte-level snapshot surgery for corruption tests."""

import json
import struct
import zlib

MAGIC = b"PROTOSNP"


def parts(data: bytes):
    pos = len(MAGIC)
    version, hlen = struct.unpack_from("<II", data, pos)
    pos += 8
    header = data[pos:pos + hlen]
    pos += hlen
    (blen,) = struct.unpack_from("<Q", data, pos)
    body = data[pos + 8:pos + 8 + blen]
    pos += 8 + blen
    (glen,) = struct.unpack_from("<Q", data, pos)
    grid = data[pos + 8:pos + 8 + glen]
    return version, header, body, grid


def assemble(version: int, header: bytes, body: bytes, grid: bytes) -> bytes:
    out = bytearray(MAGIC) + struct.pack("<II", version, len(header)) + header
    out += struct.pack("<Q", len(body)) + body + struct.pack("<Q", len(grid)) + grid
    out += struct.pack("<I", zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


def edit_body(data: bytes, fn) -> bytes:
    """Decode the state JSON, apply ``fn`` to it in place, re-encode with a valid checksum."""
    version, header, body, grid = parts(data)
    state = json.loads(zlib.decompress(body))
    fn(state)
    body = zlib.compress(json.dumps(state, separators=(",", ":")).encode(), 6)
    return assemble(version, header, body, grid)


def with_version(data: bytes, version: int) -> bytes:
    _, header, body, grid = parts(data)
    return assemble(version, header, body, grid)


def with_header(data: bytes, fn) -> bytes:
    version, header, body, grid = parts(data)
    h = json.loads(header)
    fn(h)
    return assemble(version, json.dumps(h, separators=(",", ":")).encode(), body, grid)
