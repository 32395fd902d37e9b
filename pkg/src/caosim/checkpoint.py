"""Binary checkpoint and snapshot files.

Layout (all little endian):

    4 bytes   magic b"CAOS"
    u32       format version (1)
    u32 x4    nx, ny, nz_a, nz_o
    f64       p_s
    u32 x2    dealias fraction numerator, denominator
    u64       step index
    f64       t
    f64 ...   v^a spectral coefficients, then v^o, each as (real, imag) pairs
              in C order over (component, level, kx index, ky index); the
              kx/ky indices follow FFT ordering 0, 1, ..., n/2, -n/2+1, ..., -1
    u64       CRC-64/XZ of every preceding byte

CRC-64/XZ: reflected ECMA-182 polynomial 0x42F0E1EBA9EA3693, initial value
and final xor all ones. The standard library has no 64-bit CRC, so a
table-driven version lives here.
"""

from __future__ import annotations

import dataclasses
import struct
from fractions import Fraction

import numpy as np

from .domain import Field3D, HorizontalGrid, State, VerticalGrid, to_spectral

MAGIC = b"CAOS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIdIIQd")


class CheckpointError(OSError):
    pass


def _crc_table():
    poly = 0xC96C5795D7870F42  # bit-reversed 0x42F0E1EBA9EA3693
    table = []
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ poly if c & 1 else c >> 1
        table.append(c)
    return table


_TABLE = _crc_table()


def crc64_xz(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFFFFFFFFFF
    table = _TABLE
    for b in data:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


@dataclasses.dataclass(frozen=True, eq=False)
class Checkpoint:
    state: State
    step: int
    p_s: float

    @property
    def t(self) -> float:
        return self.state.t


def _coeff_bytes(f: Field3D) -> bytes:
    c = np.ascontiguousarray(to_spectral(f).data, dtype="<c16")
    return c.tobytes(order="C")


def encode(state: State, step: int, p_s: float | None = None) -> bytes:
    hg = state.hgrid
    p_s = state.va.vgrid.p_s if p_s is None else p_s
    frac = Fraction(hg.dealias_fraction)
    head = _HEADER.pack(MAGIC, VERSION, hg.nx, hg.ny, state.va.vgrid.nz, state.vo.vgrid.nz, float(p_s),
                        frac.numerator, frac.denominator, step, float(state.t))
    body = head + _coeff_bytes(state.va) + _coeff_bytes(state.vo)
    return body + struct.pack("<Q", crc64_xz(body))


def decode(blob: bytes) -> Checkpoint:
    if len(blob) < _HEADER.size + 8:
        raise CheckpointError("file too short for a checkpoint")
    magic, version, nx, ny, nza, nzo, p_s, num, den, step, t = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    (crc,) = struct.unpack_from("<Q", blob, len(blob) - 8)
    if crc != crc64_xz(blob[:-8]):
        raise CheckpointError("checksum mismatch")
    hg = HorizontalGrid(nx, ny, Fraction(num, den))
    vga, vgo = VerticalGrid.atmosphere(nza, p_s), VerticalGrid.ocean(nzo)
    na, no = 2 * nza * nx * ny, 2 * nzo * nx * ny
    expected = _HEADER.size + 16 * (na + no) + 8
    if len(blob) != expected:
        raise CheckpointError(f"checkpoint has {len(blob)} bytes, expected {expected}")
    arr = np.frombuffer(blob, dtype="<c16", count=na + no, offset=_HEADER.size)
    va = Field3D(hg, vga, arr[:na].reshape((2, nza, nx, ny)).astype(complex), spectral=True)
    vo = Field3D(hg, vgo, arr[na:].reshape((2, nzo, nx, ny)).astype(complex), spectral=True)
    return Checkpoint(State(va, vo, t), step, p_s)


def save(path, state: State, step: int, p_s: float | None = None) -> None:
    blob = encode(state, step, p_s)
    with open(path, "wb") as fh:
        fh.write(blob)


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode(fh.read())
