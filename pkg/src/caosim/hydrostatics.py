"""Diagnostic quantities reconstructed from the horizontal velocities."""

from __future__ import annotations

import dataclasses

import numpy as np

from .calculus import cumulative_integral, div_h
from .domain import Boundary, Field3D, GridError, Kind, SurfaceField, VerticalGrid, trace


@dataclasses.dataclass(frozen=True)
class Reconstruction:
    w: Field3D
    omega: Field3D
    pi: Field3D
    phi: Field3D
    pi_s: SurfaceField
    phi_s: SurfaceField


def _level_field(s: SurfaceField, vgrid: VerticalGrid, profile: np.ndarray) -> Field3D:
    vals = s.values()[:, None] + profile[None, :, None, None]
    return Field3D(s.hgrid, vgrid, vals, spectral=False)


def reconstruct_pi(pi_s: SurfaceField, vgrid: VerticalGrid) -> Field3D:
    """Ocean pressure pi(x, y, z) = pi_s(x, y) - z."""
    if vgrid.kind is not Kind.OCEAN:
        raise GridError("reconstruct_pi needs the ocean grid")
    return _level_field(pi_s, vgrid, -vgrid.nodes)


def reconstruct_phi(phi_s: SurfaceField, vgrid: VerticalGrid) -> Field3D:
    """Geopotential Phi(x, y, p) = Phi_s(x, y) + log p_s - log p."""
    if vgrid.kind is not Kind.ATMOSPHERE:
        raise GridError("reconstruct_phi needs the atmosphere grid")
    if np.any(vgrid.nodes <= 0):
        raise GridError("pressure nodes must be positive")
    return _level_field(phi_s, vgrid, np.log(vgrid.p_s) - np.log(vgrid.nodes))


def vertical_velocity(v: Field3D) -> Field3D:
    """-int_bottom^xi div_H v; zero at the bottom node by construction."""
    return -cumulative_integral(div_h(v))


def reconstruct_w(vo: Field3D) -> Field3D:
    if vo.vgrid.kind is not Kind.OCEAN:
        raise GridError("reconstruct_w needs the ocean grid")
    return vertical_velocity(vo)


def reconstruct_omega(va: Field3D) -> Field3D:
    if va.vgrid.kind is not Kind.ATMOSPHERE:
        raise GridError("reconstruct_omega needs the atmosphere grid")
    return vertical_velocity(va)


def interface_residual(vertical: Field3D) -> float:
    """max |w| (or |omega|) at the interface node: the solenoidal constraint residual."""
    return float(np.max(np.abs(trace(vertical, Boundary.TOP).values())))


def reconstruct(va: Field3D, vo: Field3D, pi_s: SurfaceField, phi_s: SurfaceField) -> Reconstruction:
    return Reconstruction(
        w=reconstruct_w(vo),
        omega=reconstruct_omega(va),
        pi=reconstruct_pi(pi_s, vo.vgrid),
        phi=reconstruct_phi(phi_s, va.vgrid),
        pi_s=pi_s,
        phi_s=phi_s,
    )
